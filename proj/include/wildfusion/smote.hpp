#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "wildfusion/rng.hpp"

namespace wildfusion {

struct SmoteConfig {
  int m_neighbors = 5;          // neighborhood for the Safe/Danger/Noise test
  int k_interp_neighbors = 5;   // minority neighbors used for interpolation
  int synthetic_per_danger = 1; // synthetic samples generated per DANGER point
  std::uint64_t seed = 0;
};

// A minority point is Noise when all m nearest neighbors are majority,
// Danger when at least half (but not all) are, Safe otherwise. The Noise
// test takes precedence over the Danger test.
enum class BoundaryLabel { kSafe, kDanger, kNoise };

// Labels each minority point from its m nearest neighbors (Euclidean, over
// minority+majority combined, self excluded, distance ties broken by lower
// sample index). Rows are points.
std::vector<BoundaryLabel> classify_boundary_points(
    const Eigen::MatrixXd& minority, const Eigen::MatrixXd& majority, int m);

// Borderline-1 SMOTE: synthetic points are interpolations p + delta*(p'-p)
// from DANGER minority points toward their k nearest minority neighbors,
// delta uniform in [0,1]. Noise points never contribute. Returns
// synthetic_per_danger * |Danger| rows; zero rows when nothing is in danger.
Eigen::MatrixXd borderline_smote(const Eigen::MatrixXd& minority,
                                 const Eigen::MatrixXd& majority,
                                 const SmoteConfig& config);

// Multi-class convenience: every class smaller than the largest is treated
// as minority against the rest, one class at a time. Returns the synthetic
// rows and their class labels appended in class order.
struct SmoteResult {
  Eigen::MatrixXd features;  // zero rows when no class had DANGER points
  std::vector<int> labels;
};
SmoteResult oversample_minorities(const Eigen::MatrixXd& features,
                                  const std::vector<int>& labels,
                                  const SmoteConfig& config);

// Inverse class-frequency weights; expected class frequency under weighted
// draws with replacement is uniform.
std::vector<double> oversample_weights(const std::vector<int>& labels);

// Weighted draw of `count` indices with replacement.
std::vector<std::size_t> weighted_sample(const std::vector<double>& weights,
                                         std::size_t count, Rng& rng);

}  // namespace wildfusion
