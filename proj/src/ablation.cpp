#include "wildfusion/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <sstream>
#include <thread>

#include "wildfusion/errors.hpp"
#include "wildfusion/split.hpp"
#include "wildfusion/trainer.hpp"

namespace wildfusion {

namespace {

// Combinations of `items` of size `k` in lexicographic order.
template <typename T>
void for_each_combination(const std::vector<T>& items, int k,
                          const std::function<void(const std::vector<T>&)>& fn) {
  const int n = static_cast<int>(items.size());
  if (k > n) return;
  std::vector<int> pick(static_cast<std::size_t>(k));
  std::iota(pick.begin(), pick.end(), 0);
  std::vector<T> subset(static_cast<std::size_t>(k));
  while (true) {
    for (int i = 0; i < k; ++i) {
      subset[static_cast<std::size_t>(i)] =
          items[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])];
    }
    fn(subset);
    int i = k - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) {
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

}  // namespace

std::string feature_subset_name(const FeatureGroupSet& groups) {
  std::string out;
  for (FeatureGroup g : groups) {
    if (!out.empty()) out += "+";
    out += feature_group_name(g);
  }
  return out;
}

FeatureGroupSet feature_subset_from_name(const std::string& name) {
  FeatureGroupSet out;
  std::stringstream ss(name);
  std::string part;
  while (std::getline(ss, part, '+')) {
    out.insert(feature_group_from_name(part));
  }
  if (out.empty()) throw DataError("empty feature subset '" + name + "'");
  return out;
}

std::uint64_t trial_count_closed_form(int num_classes, int num_groups) {
  const std::uint64_t class_subsets =
      (1ULL << num_classes) - 1ULL - static_cast<std::uint64_t>(num_classes);
  const std::uint64_t feature_subsets = (1ULL << num_groups) - 1ULL;
  return class_subsets * feature_subsets;
}

std::vector<Trial> enumerate_trials(const std::vector<int>& classes,
                                    const std::vector<FeatureGroup>& groups,
                                    int min_subset, int max_subset,
                                    std::uint64_t seed) {
  if (static_cast<int>(classes.size()) < 2) {
    throw DataError("enumerate_trials: need at least 2 classes");
  }
  if (groups.empty()) {
    throw DataError("enumerate_trials: need at least one feature group");
  }
  if (min_subset < 2) min_subset = 2;
  std::vector<int> sorted_classes = classes;
  std::sort(sorted_classes.begin(), sorted_classes.end());

  // Feature subsets in canonical order: size, then lexicographic.
  std::vector<FeatureGroup> sorted_groups = groups;
  std::sort(sorted_groups.begin(), sorted_groups.end());
  std::vector<FeatureGroupSet> feature_subsets;
  for (int k = 1; k <= static_cast<int>(sorted_groups.size()); ++k) {
    for_each_combination<FeatureGroup>(
        sorted_groups, k, [&](const std::vector<FeatureGroup>& subset) {
          feature_subsets.emplace_back(subset.begin(), subset.end());
        });
  }

  const int cap = max_subset > 0
                      ? std::min(max_subset,
                                 static_cast<int>(sorted_classes.size()))
                      : static_cast<int>(sorted_classes.size());
  std::vector<Trial> trials;
  std::uint64_t index = 0;
  for (int k = min_subset; k <= cap; ++k) {
    for_each_combination<int>(
        sorted_classes, k, [&](const std::vector<int>& class_subset) {
          for (const auto& features : feature_subsets) {
            Trial t;
            t.class_subset = class_subset;
            t.feature_subset = features;
            t.seed = Rng::derive(seed, index++).next_u64();
            trials.push_back(std::move(t));
          }
        });
  }
  return trials;
}

TrialResult run_trial(const Trial& trial, const AblationDataset& dataset,
                      const TrialOptions& options) {
  if (trial.class_subset.size() < 2) {
    throw DataError("run_trial: class subset must have at least 2 classes");
  }
  if (trial.feature_subset.empty()) {
    throw DataError("run_trial: empty feature subset");
  }

  // Filter to the class subset and remap labels to 0..k-1.
  std::map<int, int> remap;
  for (std::size_t i = 0; i < trial.class_subset.size(); ++i) {
    remap[trial.class_subset[i]] = static_cast<int>(i);
  }
  std::vector<Eigen::Index> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
    const auto it = remap.find(dataset.labels[i]);
    if (it != remap.end()) {
      rows.push_back(static_cast<Eigen::Index>(i));
      labels.push_back(it->second);
    }
  }
  for (const auto& [cls, local] : remap) {
    if (std::find(labels.begin(), labels.end(), local) == labels.end()) {
      throw DataError("run_trial: no samples for class " +
                      std::to_string(cls));
    }
  }

  // Select the feature-group columns.
  std::vector<std::pair<int, int>> slices;  // offset, width in layout order
  {
    const FeatureGroupSet& g = trial.feature_subset;
    const bool merged = g.count(FeatureGroup::kPositionTemperature) > 0;
    if (g.count(FeatureGroup::kDatetime))
      slices.push_back({kDatetimeOffset, kDatetimeDim});
    if (merged) {
      slices.push_back({kTemperatureOffset, kTemperatureDim + kPositionDim});
    } else {
      if (g.count(FeatureGroup::kTemperature))
        slices.push_back({kTemperatureOffset, kTemperatureDim});
      if (g.count(FeatureGroup::kPosition))
        slices.push_back({kPositionOffset, kPositionDim});
    }
    if (g.count(FeatureGroup::kSceneAttributes))
      slices.push_back({kSceneAttributeOffset, kSceneAttributeDim});
    if (g.count(FeatureGroup::kSceneDescriptors))
      slices.push_back({kSceneDescriptorOffset, kSceneDescriptorDim});
  }
  int width = 0;
  for (const auto& s : slices) width += s.second;

  Eigen::MatrixXd features(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    int at = 0;
    for (const auto& [offset, w] : slices) {
      features.block(static_cast<Eigen::Index>(r), at, 1, w) =
          dataset.features.block(rows[r], offset, 1, w);
      at += w;
    }
  }

  // Split, then oversample the training split only.
  const SplitAssignment split = split_dataset(labels, trial.seed);
  const auto train_idx = split.indices_of(Split::kTrain);
  const auto test_idx = split.indices_of(Split::kTest);

  DataBundle train;
  train.metadata.resize(static_cast<Eigen::Index>(train_idx.size()), width);
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    train.metadata.row(static_cast<Eigen::Index>(i)) =
        features.row(static_cast<Eigen::Index>(train_idx[i]));
    train.labels.push_back(labels[train_idx[i]]);
  }
  if (options.use_smote) {
    SmoteConfig smote = options.smote;
    smote.seed = Rng::derive(trial.seed, 0x5307e).next_u64();
    const SmoteResult synth =
        oversample_minorities(train.metadata, train.labels, smote);
    if (synth.features.rows() > 0) {
      Eigen::MatrixXd combined(train.metadata.rows() + synth.features.rows(),
                               width);
      combined.topRows(train.metadata.rows()) = train.metadata;
      combined.bottomRows(synth.features.rows()) = synth.features;
      train.metadata = std::move(combined);
      train.labels.insert(train.labels.end(), synth.labels.begin(),
                          synth.labels.end());
    }
  }

  DataBundle test;
  test.metadata.resize(static_cast<Eigen::Index>(test_idx.size()), width);
  for (std::size_t i = 0; i < test_idx.size(); ++i) {
    test.metadata.row(static_cast<Eigen::Index>(i)) =
        features.row(static_cast<Eigen::Index>(test_idx[i]));
    test.labels.push_back(labels[test_idx[i]]);
  }

  FusionModelConfig config;
  config.fusion_mode = FusionMode::kMetadataOnly;
  config.metadata_dim = width;
  config.num_classes = static_cast<int>(trial.class_subset.size());
  config.mlp_hidden = options.mlp_hidden;
  auto model = FusionModel<double>::build(config, trial.seed);

  TrainOptions train_options;
  train_options.epochs = options.epochs;
  train_options.batch_size = options.batch_size;
  train_options.schedule = options.schedule;
  train_options.seed = Rng::derive(trial.seed, 0x7a41).next_u64();
  train_options.weighted_sampling = false;  // SMOTE already rebalanced
  train_classifier(model, train, /*val=*/DataBundle{}, train_options);

  const ConfusionMatrix cm = evaluate_model(model, test);
  TrialResult result;
  result.trial = trial;
  result.accuracy = overall_accuracy(cm);
  result.kappa = cohen_kappa(cm);
  return result;
}

std::vector<TrialResult> run_trials(const std::vector<Trial>& trials,
                                    const AblationDataset& dataset,
                                    const TrialOptions& options, int workers) {
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
  }
  std::vector<TrialResult> results(trials.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(
      static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= trials.size()) break;
          results[i] = run_trial(trials[i], dataset, options);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

ScoreBoard counting_scores(const std::vector<TrialResult>& results) {
  if (results.empty()) throw DataError("counting_scores: no results");

  // Universe per cardinality: all class subsets and feature subsets seen.
  std::map<int, std::set<std::vector<int>>> class_subsets_by_card;
  std::map<int, std::set<FeatureGroupSet>> feature_subsets_by_card;
  std::map<std::pair<std::vector<int>, int>,
           std::vector<const TrialResult*>>
      grouped;
  for (const auto& r : results) {
    const int card = static_cast<int>(r.trial.feature_subset.size());
    class_subsets_by_card[card].insert(r.trial.class_subset);
    feature_subsets_by_card[card].insert(r.trial.feature_subset);
    grouped[{r.trial.class_subset, card}].push_back(&r);
  }

  // Coverage check: every (class subset, feature subset) pair per
  // cardinality.
  std::vector<std::string> missing;
  for (const auto& [card, class_subsets] : class_subsets_by_card) {
    const auto& feature_universe = feature_subsets_by_card[card];
    for (const auto& cs : class_subsets) {
      const auto it = grouped.find({cs, card});
      std::set<FeatureGroupSet> seen;
      if (it != grouped.end()) {
        for (const auto* r : it->second) seen.insert(r->trial.feature_subset);
      }
      for (const auto& fs : feature_universe) {
        if (!seen.count(fs)) {
          std::string cs_name;
          for (int c : cs) {
            if (!cs_name.empty()) cs_name += ",";
            cs_name += std::to_string(c);
          }
          missing.push_back("{" + cs_name + "} x " + feature_subset_name(fs));
        }
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "counting_scores: incomplete coverage, missing pairs:";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) {
      msg += " " + missing[i];
    }
    if (missing.size() > 10) {
      msg += " (+" + std::to_string(missing.size() - 10) + " more)";
    }
    throw DataError(msg);
  }

  ScoreBoard board;
  for (const auto& [card, feature_universe] : feature_subsets_by_card) {
    for (const auto& fs : feature_universe) {
      board.wins[card][fs] = 0;
    }
  }
  for (const auto& [key, rs] : grouped) {
    const auto& [class_subset, card] = key;
    // Winner by accuracy; ties break to the earlier canonical subset
    // (smaller set in FeatureGroupSet order), and are logged.
    const TrialResult* best = nullptr;
    bool tied = false;
    for (const auto* r : rs) {
      if (best == nullptr || r->accuracy > best->accuracy) {
        best = r;
        tied = false;
      } else if (r->accuracy == best->accuracy) {
        tied = true;
        if (r->trial.feature_subset < best->trial.feature_subset) best = r;
      }
    }
    if (tied) {
      std::string cs_name;
      for (int c : class_subset) {
        if (!cs_name.empty()) cs_name += ",";
        cs_name += std::to_string(c);
      }
      board.tie_log.push_back(
          "tie on {" + cs_name + "} cardinality " + std::to_string(card) +
          ", awarded to " + feature_subset_name(best->trial.feature_subset));
    }
    board.wins[card][best->trial.feature_subset] += 1;
    board.class_subsets_scored[card] += 1;
  }
  return board;
}

}  // namespace wildfusion
