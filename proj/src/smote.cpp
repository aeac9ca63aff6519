#include "wildfusion/smote.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "wildfusion/errors.hpp"

namespace wildfusion {

namespace {

// Indices of the k nearest rows of `pool` to `query`, excluding `self_row`
// (pass -1 to keep all). Ties broken by lower row index.
std::vector<Eigen::Index> k_nearest(const Eigen::MatrixXd& pool,
                                    const Eigen::RowVectorXd& query,
                                    Eigen::Index self_row, int k) {
  std::vector<std::pair<double, Eigen::Index>> dist;
  dist.reserve(static_cast<std::size_t>(pool.rows()));
  for (Eigen::Index r = 0; r < pool.rows(); ++r) {
    if (r == self_row) continue;
    dist.emplace_back((pool.row(r) - query).squaredNorm(), r);
  }
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk),
                    dist.end());
  std::vector<Eigen::Index> out;
  out.reserve(kk);
  for (std::size_t i = 0; i < kk; ++i) out.push_back(dist[i].second);
  return out;
}

}  // namespace

std::vector<BoundaryLabel> classify_boundary_points(
    const Eigen::MatrixXd& minority, const Eigen::MatrixXd& majority, int m) {
  if (m < 1) throw DataError("classify_boundary_points: m must be >= 1");
  const Eigen::Index total = minority.rows() + majority.rows();
  if (total < m + 1) {
    throw DataError("classify_boundary_points: m = " + std::to_string(m) +
                    " but dataset has only " + std::to_string(total) +
                    " points");
  }
  if (minority.rows() > 0 && majority.rows() > 0 &&
      minority.cols() != majority.cols()) {
    throw DataError("classify_boundary_points: dimension mismatch");
  }

  // Combined pool with minority rows first so self-exclusion works by index.
  Eigen::MatrixXd pool(total, minority.cols());
  pool.topRows(minority.rows()) = minority;
  pool.bottomRows(majority.rows()) = majority;

  std::vector<BoundaryLabel> labels(
      static_cast<std::size_t>(minority.rows()));
  for (Eigen::Index i = 0; i < minority.rows(); ++i) {
    const auto nn = k_nearest(pool, minority.row(i), i, m);
    int majority_count = 0;
    for (Eigen::Index idx : nn) {
      if (idx >= minority.rows()) ++majority_count;
    }
    BoundaryLabel label;
    if (majority_count == m) {
      label = BoundaryLabel::kNoise;
    } else if (2 * majority_count >= m) {
      label = BoundaryLabel::kDanger;
    } else {
      label = BoundaryLabel::kSafe;
    }
    labels[static_cast<std::size_t>(i)] = label;
  }
  return labels;
}

Eigen::MatrixXd borderline_smote(const Eigen::MatrixXd& minority,
                                 const Eigen::MatrixXd& majority,
                                 const SmoteConfig& config) {
  if (minority.rows() < 1) {
    throw DataError("borderline_smote: no minority points");
  }
  if (minority.rows() < config.k_interp_neighbors) {
    throw DataError("borderline_smote: need at least k_interp_neighbors = " +
                    std::to_string(config.k_interp_neighbors) +
                    " minority points, have " +
                    std::to_string(minority.rows()));
  }
  const auto labels =
      classify_boundary_points(minority, majority, config.m_neighbors);

  std::vector<Eigen::Index> danger;
  for (Eigen::Index i = 0; i < minority.rows(); ++i) {
    if (labels[static_cast<std::size_t>(i)] == BoundaryLabel::kDanger) {
      danger.push_back(i);
    }
  }
  Eigen::MatrixXd synthetic(
      static_cast<Eigen::Index>(danger.size()) * config.synthetic_per_danger,
      minority.cols());
  if (danger.empty()) return synthetic;

  Rng rng(config.seed);
  Eigen::Index row = 0;
  for (Eigen::Index p : danger) {
    // Interpolate toward minority neighbors only (Borderline-1).
    const auto nn =
        k_nearest(minority, minority.row(p), p, config.k_interp_neighbors);
    for (int s = 0; s < config.synthetic_per_danger; ++s) {
      const Eigen::Index q = nn[static_cast<std::size_t>(rng.uniform_int(
          0, static_cast<std::int64_t>(nn.size()) - 1))];
      const double delta = rng.uniform();
      synthetic.row(row++) =
          minority.row(p) + delta * (minority.row(q) - minority.row(p));
    }
  }
  return synthetic;
}

SmoteResult oversample_minorities(const Eigen::MatrixXd& features,
                                  const std::vector<int>& labels,
                                  const SmoteConfig& config) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw DataError("oversample_minorities: row/label count mismatch");
  }
  std::map<int, std::vector<Eigen::Index>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[labels[i]].push_back(static_cast<Eigen::Index>(i));
  }
  std::size_t largest = 0;
  for (const auto& [cls, rows] : by_class) {
    largest = std::max(largest, rows.size());
  }

  SmoteResult result;
  std::vector<Eigen::MatrixXd> chunks;
  Eigen::Index total_rows = 0;
  int class_stream = 0;
  for (const auto& [cls, rows] : by_class) {
    ++class_stream;
    if (rows.size() >= largest) continue;
    if (static_cast<int>(rows.size()) < config.k_interp_neighbors) continue;
    Eigen::MatrixXd minority(static_cast<Eigen::Index>(rows.size()),
                             features.cols());
    Eigen::MatrixXd majority(
        features.rows() - static_cast<Eigen::Index>(rows.size()),
        features.cols());
    Eigen::Index mi = 0, ma = 0;
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
      if (labels[static_cast<std::size_t>(r)] == cls) {
        minority.row(mi++) = features.row(r);
      } else {
        majority.row(ma++) = features.row(r);
      }
    }
    SmoteConfig per_class = config;
    per_class.seed = Rng::derive(config.seed, static_cast<std::uint64_t>(
                                                  class_stream))
                         .next_u64();
    Eigen::MatrixXd synth = borderline_smote(minority, majority, per_class);
    if (synth.rows() == 0) continue;
    total_rows += synth.rows();
    for (Eigen::Index r = 0; r < synth.rows(); ++r) result.labels.push_back(cls);
    chunks.push_back(std::move(synth));
  }
  result.features.resize(total_rows, features.cols());
  Eigen::Index at = 0;
  for (const auto& c : chunks) {
    result.features.middleRows(at, c.rows()) = c;
    at += c.rows();
  }
  return result;
}

std::vector<double> oversample_weights(const std::vector<int>& labels) {
  if (labels.empty()) throw DataError("oversample_weights: empty input");
  std::map<int, std::int64_t> counts;
  for (int l : labels) counts[l] += 1;
  std::vector<double> weights(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    weights[i] = 1.0 / static_cast<double>(counts[labels[i]]);
  }
  return weights;
}

std::vector<std::size_t> weighted_sample(const std::vector<double>& weights,
                                         std::size_t count, Rng& rng) {
  if (weights.empty()) throw DataError("weighted_sample: empty weights");
  std::vector<double> cumulative(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
  const double total = cumulative.back();
  if (total <= 0) throw DataError("weighted_sample: non-positive weight sum");
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = rng.uniform() * total;
    out[i] = static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), u) -
        cumulative.begin());
    if (out[i] >= weights.size()) out[i] = weights.size() - 1;
  }
  return out;
}

}  // namespace wildfusion
