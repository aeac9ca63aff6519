#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wildfusion/metadata.hpp"
#include "wildfusion/optimizer.hpp"
#include "wildfusion/smote.hpp"

namespace wildfusion {

// One (class subset, feature subset) classification trial.
struct Trial {
  std::vector<int> class_subset;  // sorted, size >= 2
  FeatureGroupSet feature_subset; // non-empty
  std::uint64_t seed = 0;
};

struct TrialResult {
  Trial trial;
  double accuracy = 0.0;
  double kappa = 0.0;
};

std::string feature_subset_name(const FeatureGroupSet& groups);
FeatureGroupSet feature_subset_from_name(const std::string& name);

// Cartesian product of all class subsets of size in [min_subset, max_subset]
// (max_subset 0 means no cap) with all non-empty feature subsets, in
// canonical order: subsets ordered by size then lexicographically. Trial
// count is (sum of class subset counts) * (2^|groups| - 1).
std::vector<Trial> enumerate_trials(const std::vector<int>& classes,
                                    const std::vector<FeatureGroup>& groups,
                                    int min_subset = 2, int max_subset = 0,
                                    std::uint64_t seed = 0);

// Closed form (2^n - 1 - n) * (2^g - 1) for min_subset 2, no cap.
std::uint64_t trial_count_closed_form(int num_classes, int num_groups);

// Full encoded metadata (N x 538) with integer class labels.
struct AblationDataset {
  Eigen::MatrixXd features;
  std::vector<int> labels;
};

struct TrialOptions {
  std::vector<int> mlp_hidden = {128, 64};
  SmoteConfig smote;
  bool use_smote = true;
  int epochs = 15;
  int batch_size = 32;
  OptimizerState schedule{0.1, 7, 0.1, 0};
};

// Filters the dataset to the trial's class subset, selects the feature-group
// columns, splits 81/9/10, applies Borderline SMOTE to the training split
// only, trains the metadata MLP, and scores the held-out test split.
TrialResult run_trial(const Trial& trial, const AblationDataset& dataset,
                      const TrialOptions& options);

// Embarrassingly parallel trial sweep; workers <= 0 means all cores.
std::vector<TrialResult> run_trials(const std::vector<Trial>& trials,
                                    const AblationDataset& dataset,
                                    const TrialOptions& options,
                                    int workers = 0);

// The counting method: per class subset and per feature-subset cardinality,
// the feature subset with the highest accuracy earns one point.
struct ScoreBoard {
  // cardinality -> feature subset -> win count
  std::map<int, std::map<FeatureGroupSet, int>> wins;
  // cardinality -> number of class subsets scored
  std::map<int, int> class_subsets_scored;
  std::vector<std::string> tie_log;
};

ScoreBoard counting_scores(const std::vector<TrialResult>& results);

}  // namespace wildfusion
