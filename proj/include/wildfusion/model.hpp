#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wildfusion/checkpoint.hpp"
#include "wildfusion/metadata.hpp"
#include "wildfusion/ops.hpp"
#include "wildfusion/rng.hpp"

namespace wildfusion {

enum class FusionMode {
  kImageOnly,
  kMetadataOnly,
  kLateFusion,
  kEarlyFusion,
  kCbam,
  kMcbam,
};

const char* fusion_mode_name(FusionMode mode);
FusionMode fusion_mode_from_name(const std::string& name);

inline bool mode_consumes_metadata(FusionMode m) {
  return m == FusionMode::kMetadataOnly || m == FusionMode::kLateFusion ||
         m == FusionMode::kEarlyFusion || m == FusionMode::kMcbam;
}
inline bool mode_consumes_images(FusionMode m) {
  return m != FusionMode::kMetadataOnly;
}

// Residual trunk shape plus the fusion mode. The trunk keeps the bottleneck
// topology (1x1 reduce, 3x3, 1x1 expand with 4x expansion) at configurable
// scale; stage_channel_widths are the bottleneck mid widths.
struct FusionModelConfig {
  FusionMode fusion_mode = FusionMode::kImageOnly;
  int input_image_side = 64;
  int input_channels = 3;
  std::vector<int> stage_channel_widths = {16, 32, 64};
  std::vector<int> blocks_per_stage = {2, 2, 2};
  int metadata_dim = kMetadataDim;
  int num_classes = 13;
  std::vector<int> late_head_widths;  // g1,g2,g3 out widths; empty -> {256,128,num_classes}
  std::vector<int> mlp_hidden = {128, 64};
  int cbam_reduction = 16;
  bool stem_pool = true;
  // Stages where early-fusion gates are active; empty means all stages.
  std::vector<int> early_fusion_stages;

  void validate() const;
  std::vector<int> resolved_late_head_widths() const;
  bool early_fusion_in_stage(int stage) const;

  // Canonical text form; order and formatting are stable across runs.
  std::string canonical_string() const;
  // FNV-1a over the canonical string, 16 hex digits.
  std::string digest() const;
};

// Test hook: forces the named gate families to all-ones (the multiply is
// skipped, which is numerically identical).
struct GateOverride {
  bool early_gates = false;
  bool channel_attention = false;
  bool spatial_attention = false;
  bool metadata_attention = false;
};

template <typename S>
using NamedTensors = std::vector<std::pair<std::string, Tensor<S>>>;

namespace layers {

template <typename S>
void init_uniform(Tensor<S>& t, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    t.values()[i] = static_cast<S>(rng.uniform(-bound, bound));
  }
}

template <typename S>
struct Linear {
  Tensor<S> weight, bias;

  void init(Eigen::Index in, Eigen::Index out, Rng& rng, bool with_bias = true) {
    weight = Tensor<S>({out, in}, true);
    init_uniform(weight, in, rng);
    if (with_bias) bias = Tensor<S>({out}, true);
  }

  Tensor<S> forward(Tape<S>& tape, const Tensor<S>& x) const {
    return linear(tape, x, weight, bias);
  }

  void collect(const std::string& prefix, NamedTensors<S>& out) const {
    out.emplace_back(prefix + ".weight", weight);
    if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
  }
};

template <typename S>
struct Conv2d {
  Tensor<S> weight;  // bias-free, batch norm follows
  Conv2dAttrs attrs;

  void init(Eigen::Index ic, Eigen::Index oc, Eigen::Index kernel,
            Eigen::Index stride, Eigen::Index padding, Rng& rng) {
    weight = Tensor<S>({oc, ic, kernel, kernel}, true);
    init_uniform(weight, ic * kernel * kernel, rng);
    attrs = {stride, padding};
  }

  Tensor<S> forward(Tape<S>& tape, const Tensor<S>& x) const {
    return conv2d(tape, x, weight, {}, attrs);
  }

  void collect(const std::string& prefix, NamedTensors<S>& out) const {
    out.emplace_back(prefix + ".weight", weight);
  }
};

template <typename S>
struct BatchNorm2d {
  Tensor<S> gamma, beta;
  mutable Tensor<S> running_mean, running_var;  // buffers, not parameters
  double momentum = 0.1;
  double eps = 1e-5;

  void init(Eigen::Index channels) {
    gamma = Tensor<S>::ones({channels}, true);
    beta = Tensor<S>({channels}, true);
    running_mean = Tensor<S>({channels});
    running_var = Tensor<S>::ones({channels});
  }

  Tensor<S> forward(Tape<S>& tape, const Tensor<S>& x, bool training) const {
    return batch_norm(tape, x, gamma, beta, running_mean, running_var,
                      {training, momentum, eps});
  }

  void collect(const std::string& prefix, NamedTensors<S>& out) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
    out.emplace_back(prefix + ".running_mean", running_mean);
    out.emplace_back(prefix + ".running_var", running_var);
  }
};

// sigma(Linear(metadata)) as a per-channel gate in (0,1).
template <typename S>
struct MetaGate {
  Linear<S> fc;

  void init(Eigen::Index metadata_dim, Eigen::Index channels, Rng& rng) {
    fc.init(metadata_dim, channels, rng);
  }

  Tensor<S> forward(Tape<S>& tape, const Tensor<S>& metadata) const {
    return sigmoid(tape, fc.forward(tape, metadata));
  }

  void collect(const std::string& prefix, NamedTensors<S>& out) const {
    fc.collect(prefix, out);
  }
};

// Channel attention: sigma(MLP(AvgPool(F)) + MLP(MaxPool(F))), shared MLP.
template <typename S>
struct ChannelAttention {
  Linear<S> fc1, fc2;

  void init(Eigen::Index channels, int reduction, Rng& rng) {
    const Eigen::Index hidden = std::max<Eigen::Index>(1, channels / reduction);
    fc1.init(channels, hidden, rng, /*with_bias=*/false);
    fc2.init(hidden, channels, rng, /*with_bias=*/false);
  }

  Tensor<S> forward(Tape<S>& tape, const Tensor<S>& f) const {
    auto mlp = [&](const Tensor<S>& pooled) {
      return fc2.forward(tape, relu(tape, fc1.forward(tape, pooled)));
    };
    auto avg = mlp(global_avg_pool(tape, f));
    auto mx = mlp(global_max_pool(tape, f));
    return sigmoid(tape, add(tape, avg, mx));  // [B,C]
  }

  void collect(const std::string& prefix, NamedTensors<S>& out) const {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
  }
};

// Spatial attention: sigma(conv7x7([AvgPool_c(F); MaxPool_c(F)])).
template <typename S>
struct SpatialAttention {
  Tensor<S> conv_weight, conv_bias;

  void init(Rng& rng) {
    conv_weight = Tensor<S>({1, 2, 7, 7}, true);
    init_uniform(conv_weight, 2 * 7 * 7, rng);
    conv_bias = Tensor<S>({1}, true);
  }

  Tensor<S> forward(Tape<S>& tape, const Tensor<S>& f) const {
    std::vector<Tensor<S>> pooled = {channel_avg_pool(tape, f),
                                     channel_max_pool(tape, f)};
    auto stacked = concat(tape, pooled, 1);  // [B,2,H,W]
    auto conv = conv2d(tape, stacked, conv_weight, conv_bias, {1, 3});
    return sigmoid(tape, conv);  // [B,1,H,W]
  }

  void collect(const std::string& prefix, NamedTensors<S>& out) const {
    out.emplace_back(prefix + ".conv.weight", conv_weight);
    out.emplace_back(prefix + ".conv.bias", conv_bias);
  }
};

// Metadata attention: sigma(MLP(metadata)) as a per-channel gate.
template <typename S>
struct MetadataAttention {
  Linear<S> fc1, fc2;

  void init(Eigen::Index metadata_dim, Eigen::Index channels, int reduction,
            Rng& rng) {
    const Eigen::Index hidden = std::max<Eigen::Index>(1, channels / reduction);
    fc1.init(metadata_dim, hidden, rng);
    fc2.init(hidden, channels, rng);
  }

  Tensor<S> forward(Tape<S>& tape, const Tensor<S>& metadata) const {
    return sigmoid(tape,
                   fc2.forward(tape, relu(tape, fc1.forward(tape, metadata))));
  }

  void collect(const std::string& prefix, NamedTensors<S>& out) const {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
  }
};

// Channel -> spatial -> (optional) metadata attention, in that order.
template <typename S>
struct CbamAttention {
  ChannelAttention<S> channel;
  SpatialAttention<S> spatial;
  std::optional<MetadataAttention<S>> metadata;

  void init(Eigen::Index channels, int reduction, Eigen::Index metadata_dim,
            bool with_metadata, Rng& rng) {
    channel.init(channels, reduction, rng);
    spatial.init(rng);
    if (with_metadata) {
      metadata.emplace();
      metadata->init(metadata_dim, channels, reduction, rng);
    }
  }

  Tensor<S> forward(Tape<S>& tape, const Tensor<S>& f,
                    const Tensor<S>* metadata_batch,
                    const GateOverride& override_gates) const {
    Tensor<S> f1 = override_gates.channel_attention
                       ? f
                       : mul(tape, channel.forward(tape, f), f);
    Tensor<S> f2 = override_gates.spatial_attention
                       ? f1
                       : mul(tape, spatial.forward(tape, f1), f1);
    if (metadata.has_value() && !override_gates.metadata_attention) {
      return mul(tape, metadata->forward(tape, *metadata_batch), f2);
    }
    return f2;
  }

  void collect(const std::string& prefix, NamedTensors<S>& out) const {
    channel.collect(prefix + ".ca", out);
    spatial.collect(prefix + ".sa", out);
    if (metadata.has_value()) metadata->collect(prefix + ".mm", out);
  }
};

// ResNet50-style bottleneck: 1x1 reduce -> 3x3 -> 1x1 expand (4x), with
// optional per-conv metadata gates (early fusion) and optional attention
// applied to the main path before the residual addition.
template <typename S>
struct Bottleneck {
  static constexpr Eigen::Index kExpansion = 4;

  Conv2d<S> conv1, conv2, conv3;
  BatchNorm2d<S> bn1, bn2, bn3;
  std::optional<Conv2d<S>> proj;
  std::optional<BatchNorm2d<S>> proj_bn;
  std::optional<MetaGate<S>> gate1, gate2, gate3;
  std::optional<CbamAttention<S>> attention;

  void init(Eigen::Index in_ch, Eigen::Index mid, Eigen::Index stride,
            bool gates, bool attn, bool attn_metadata, Eigen::Index meta_dim,
            int reduction, Rng& rng) {
    const Eigen::Index out_ch = mid * kExpansion;
    conv1.init(in_ch, mid, 1, 1, 0, rng);
    bn1.init(mid);
    conv2.init(mid, mid, 3, stride, 1, rng);
    bn2.init(mid);
    conv3.init(mid, out_ch, 1, 1, 0, rng);
    bn3.init(out_ch);
    if (stride != 1 || in_ch != out_ch) {
      proj.emplace();
      proj->init(in_ch, out_ch, 1, stride, 0, rng);
      proj_bn.emplace();
      proj_bn->init(out_ch);
    }
    if (gates) {
      gate1.emplace();
      gate1->init(meta_dim, mid, rng);
      gate2.emplace();
      gate2->init(meta_dim, mid, rng);
      gate3.emplace();
      gate3->init(meta_dim, out_ch, rng);
    }
    if (attn) {
      attention.emplace();
      attention->init(out_ch, reduction, meta_dim, attn_metadata, rng);
    }
  }

  Tensor<S> forward(Tape<S>& tape, const Tensor<S>& x,
                    const Tensor<S>* metadata,
                    const GateOverride& override_gates, bool training) const {
    // Gates multiply each convolution's output before its normalization.
    auto gated = [&](const Tensor<S>& t,
                     const std::optional<MetaGate<S>>& gate) {
      if (!gate.has_value() || override_gates.early_gates) return t;
      return mul(tape, gate->forward(tape, *metadata), t);
    };
    Tensor<S> t = gated(conv1.forward(tape, x), gate1);
    t = relu(tape, bn1.forward(tape, t, training));
    t = gated(conv2.forward(tape, t), gate2);
    t = relu(tape, bn2.forward(tape, t, training));
    t = gated(conv3.forward(tape, t), gate3);
    t = bn3.forward(tape, t, training);
    if (attention.has_value()) {
      t = attention->forward(tape, t, metadata, override_gates);
    }
    Tensor<S> shortcut = x;
    if (proj.has_value()) {
      shortcut = proj_bn->forward(tape, proj->forward(tape, x), training);
    }
    return relu(tape, add(tape, t, shortcut));
  }

  void collect(const std::string& prefix, NamedTensors<S>& out) const {
    conv1.collect(prefix + ".conv1", out);
    bn1.collect(prefix + ".bn1", out);
    conv2.collect(prefix + ".conv2", out);
    bn2.collect(prefix + ".bn2", out);
    conv3.collect(prefix + ".conv3", out);
    bn3.collect(prefix + ".bn3", out);
    if (proj.has_value()) {
      proj->collect(prefix + ".proj", out);
      proj_bn->collect(prefix + ".proj_bn", out);
    }
    if (gate1.has_value()) {
      gate1->collect(prefix + ".gate1", out);
      gate2->collect(prefix + ".gate2", out);
      gate3->collect(prefix + ".gate3", out);
    }
    if (attention.has_value()) attention->collect(prefix + ".attn", out);
  }
};

}  // namespace layers

// The classifier: residual image trunk, metadata MLP, or one of the fusion
// heads, per config.fusion_mode.
template <typename S>
class FusionModel {
 public:
  static FusionModel build(const FusionModelConfig& config,
                           std::uint64_t seed);

  // images: [B, C, side, side] or null in metadata-only mode.
  // metadata: [B, metadata_dim]; required in metadata-consuming modes and
  // ignored otherwise. Returns logits [B, num_classes].
  Tensor<S> forward(Tape<S>& tape, const Tensor<S>* images,
                    const Tensor<S>* metadata, bool training = false) const;

  const FusionModelConfig& config() const { return config_; }

  void set_gate_override(const GateOverride& o) { override_ = o; }
  const GateOverride& gate_override() const { return override_; }

  std::vector<Tensor<S>> parameters() const;  // trainable only
  NamedTensors<S> named_state() const;        // parameters + buffers

  // Loads every entry by name; throws when a name is unknown or a tensor is
  // missing.
  void load_state(const std::vector<TensorEntry>& entries);

  // Copies tensors whose names exist in both models.
  void copy_matching_state(const FusionModel& source);

  // Deep copy / restore of all tensors, for best-epoch tracking.
  std::vector<std::pair<std::string, Tensor<S>>> snapshot_state() const;
  void restore_state(const std::vector<std::pair<std::string, Tensor<S>>>&);

 private:
  FusionModelConfig config_;
  GateOverride override_;

  layers::Conv2d<S> stem_conv_;
  layers::BatchNorm2d<S> stem_bn_;
  std::vector<std::vector<layers::Bottleneck<S>>> stages_;
  layers::Linear<S> head_fc_;                       // image-feature head
  layers::Linear<S> late_g1_, late_g2_, late_g3_;   // late-fusion head
  std::vector<layers::Linear<S>> meta_mlp_;         // metadata-only MLP

  Tensor<S> trunk_features(Tape<S>& tape, const Tensor<S>& images,
                           const Tensor<S>* metadata, bool training) const;
};

extern template class FusionModel<float>;
extern template class FusionModel<double>;

}  // namespace wildfusion
