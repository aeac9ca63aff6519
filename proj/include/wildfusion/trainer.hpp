#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "wildfusion/augment.hpp"
#include "wildfusion/image.hpp"
#include "wildfusion/metrics.hpp"
#include "wildfusion/model.hpp"
#include "wildfusion/optimizer.hpp"
#include "wildfusion/smote.hpp"

namespace wildfusion {

// In-memory dataset view for training and evaluation. Images stay empty for
// metadata-only work; metadata stays 0x0 for image-only work.
struct DataBundle {
  std::vector<Image> images;
  Eigen::MatrixXd metadata;  // N x metadata_dim
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool has_images() const { return !images.empty(); }
  bool has_metadata() const { return metadata.rows() > 0; }

  DataBundle subset(const std::vector<std::size_t>& indices) const {
    DataBundle out;
    if (has_images()) {
      out.images.reserve(indices.size());
      for (auto i : indices) out.images.push_back(images[i]);
    }
    if (has_metadata()) {
      out.metadata.resize(static_cast<Eigen::Index>(indices.size()),
                          metadata.cols());
      for (std::size_t r = 0; r < indices.size(); ++r) {
        out.metadata.row(static_cast<Eigen::Index>(r)) =
            metadata.row(static_cast<Eigen::Index>(indices[r]));
      }
    }
    out.labels.reserve(indices.size());
    for (auto i : indices) out.labels.push_back(labels[i]);
    return out;
  }
};

struct TrainOptions {
  int epochs = 25;
  int batch_size = 64;
  OptimizerState schedule;       // base_lr 1e-3, /10 every 7 epochs
  std::uint64_t seed = 0;        // sampling stream
  bool weighted_sampling = true; // inverse class-frequency oversampling
  bool augment = false;
  AugmentationConfig augmentation;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  double val_accuracy = 0.0;
  double val_kappa = 0.0;
};

template <typename S>
struct TrainResult {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  double best_val_accuracy = -1.0;
  std::vector<std::pair<std::string, Tensor<S>>> best_state;
};

template <typename S>
Tensor<S> image_to_tensor(const Image& img) {
  Tensor<S> t({3, img.height(), img.width()});
  const Eigen::Index plane = img.height() * img.width();
  for (std::size_t k = 0; k < 3; ++k) {
    for (Eigen::Index r = 0; r < img.height(); ++r) {
      for (Eigen::Index c = 0; c < img.width(); ++c) {
        t.values()[static_cast<Eigen::Index>(k) * plane + r * img.width() + c] =
            static_cast<S>(img.ch[k](r, c));
      }
    }
  }
  return t;
}

namespace detail {

template <typename S>
Tensor<S> batch_images(const std::vector<Image>& images,
                       const std::vector<std::size_t>& indices) {
  const Image& first = images[indices[0]];
  Tensor<S> batch({static_cast<Eigen::Index>(indices.size()), 3,
                   first.height(), first.width()});
  const Eigen::Index per = 3 * first.height() * first.width();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    Tensor<S> one = image_to_tensor<S>(images[indices[i]]);
    batch.values().segment(static_cast<Eigen::Index>(i) * per, per) =
        one.values();
  }
  return batch;
}

template <typename S>
Tensor<S> batch_metadata(const Eigen::MatrixXd& metadata,
                         const std::vector<std::size_t>& indices) {
  Tensor<S> batch(
      {static_cast<Eigen::Index>(indices.size()), metadata.cols()});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    for (Eigen::Index c = 0; c < metadata.cols(); ++c) {
      batch.values()[static_cast<Eigen::Index>(i) * metadata.cols() + c] =
          static_cast<S>(metadata(static_cast<Eigen::Index>(indices[i]), c));
    }
  }
  return batch;
}

}  // namespace detail

template <typename S>
ConfusionMatrix evaluate_model(const FusionModel<S>& model,
                               const DataBundle& data, int batch_size = 64) {
  const FusionMode mode = model.config().fusion_mode;
  ConfusionMatrix cm(model.config().num_classes);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t at = 0; at < order.size();
       at += static_cast<std::size_t>(batch_size)) {
    const std::vector<std::size_t> batch(
        order.begin() + static_cast<std::ptrdiff_t>(at),
        order.begin() + static_cast<std::ptrdiff_t>(
                            std::min(at + static_cast<std::size_t>(batch_size),
                                     order.size())));
    Tape<S> tape(false);
    Tensor<S> images, metadata;
    if (mode_consumes_images(mode)) {
      images = detail::batch_images<S>(data.images, batch);
    }
    if (mode_consumes_metadata(mode)) {
      metadata = detail::batch_metadata<S>(data.metadata, batch);
    }
    Tensor<S> logits =
        model.forward(tape, images.defined() ? &images : nullptr,
                      metadata.defined() ? &metadata : nullptr,
                      /*training=*/false);
    const Eigen::Index classes = logits.dim(1);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Eigen::Index pred = 0;
      logits.values()
          .segment(static_cast<Eigen::Index>(i) * classes, classes)
          .maxCoeff(&pred);
      cm.accumulate(data.labels[batch[i]], static_cast<int>(pred));
    }
  }
  return cm;
}

// Mini-batch SGD with the step schedule; tracks the best validation epoch
// (highest overall accuracy, ties to the earlier epoch) and snapshots its
// state. The model is left at the final epoch.
template <typename S>
TrainResult<S> train_classifier(FusionModel<S>& model, const DataBundle& train,
                                const DataBundle& val,
                                const TrainOptions& opts) {
  if (train.size() == 0) throw DataError("train_classifier: empty train set");
  const FusionMode mode = model.config().fusion_mode;
  auto params = model.parameters();
  OptimizerState schedule = opts.schedule;
  Rng sample_rng(opts.seed);
  std::uint64_t augment_counter = 0;

  std::vector<double> weights;
  if (opts.weighted_sampling) weights = oversample_weights(train.labels);

  TrainResult<S> result;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    schedule.current_epoch = epoch;

    std::vector<std::size_t> order;
    if (opts.weighted_sampling) {
      order = weighted_sample(weights, train.size(), sample_rng);
    } else {
      order.resize(train.size());
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(
            sample_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(order[i - 1], order[j]);
      }
    }

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < order.size();
         at += static_cast<std::size_t>(opts.batch_size)) {
      const std::vector<std::size_t> batch(
          order.begin() + static_cast<std::ptrdiff_t>(at),
          order.begin() +
              static_cast<std::ptrdiff_t>(std::min(
                  at + static_cast<std::size_t>(opts.batch_size),
                  order.size())));

      Tape<S> tape;
      Tensor<S> images, metadata;
      if (mode_consumes_images(mode)) {
        if (opts.augment) {
          std::vector<Image> augmented;
          augmented.reserve(batch.size());
          for (std::size_t idx : batch) {
            Rng stream = Rng::derive(opts.augmentation.seed, augment_counter++);
            augmented.push_back(
                augment_image(train.images[idx], opts.augmentation, stream));
          }
          std::vector<std::size_t> local(batch.size());
          std::iota(local.begin(), local.end(), 0);
          images = detail::batch_images<S>(augmented, local);
        } else {
          images = detail::batch_images<S>(train.images, batch);
        }
      }
      if (mode_consumes_metadata(mode)) {
        metadata = detail::batch_metadata<S>(train.metadata, batch);
      }
      std::vector<int> labels;
      labels.reserve(batch.size());
      for (std::size_t idx : batch) labels.push_back(train.labels[idx]);

      Tensor<S> logits =
          model.forward(tape, images.defined() ? &images : nullptr,
                        metadata.defined() ? &metadata : nullptr,
                        /*training=*/true);
      Tensor<S> loss = cross_entropy_loss(tape, logits, labels);
      tape.backward(loss, params);
      sgd_step(params, schedule);
      loss_sum += static_cast<double>(loss.item());
      ++batches;
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
    log.lr = schedule.effective_lr();
    if (val.size() > 0) {
      const ConfusionMatrix cm = evaluate_model(model, val, opts.batch_size);
      log.val_accuracy = overall_accuracy(cm);
      log.val_kappa = cohen_kappa(cm);
      if (log.val_accuracy > result.best_val_accuracy) {
        result.best_val_accuracy = log.val_accuracy;
        result.best_epoch = epoch;
        result.best_state = model.snapshot_state();
      }
    }
    result.epochs.push_back(log);
  }
  return result;
}

}  // namespace wildfusion
