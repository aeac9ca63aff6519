#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace wildfusion {

// C x C count matrix; rows are the actual class, columns the predicted one.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const { return static_cast<int>(counts_.rows()); }
  std::int64_t total() const { return counts_.sum(); }
  std::int64_t at(int actual, int predicted) const {
    return counts_(actual, predicted);
  }

  void accumulate(int actual, int predicted);

  // Element-wise merge; associative and commutative.
  ConfusionMatrix& merge(const ConfusionMatrix& other);

  const Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>& counts()
      const {
    return counts_;
  }

  static ConfusionMatrix from_counts(
      const Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>& m);

 private:
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts_;
};

struct ClassMetrics {
  double precision = 0, recall = 0, f1 = 0, fpr = 0, fnr = 0, accuracy = 0;
  std::int64_t support = 0;
  bool no_support = false;  // zero row and zero column; rates reported as 0
};

struct MetricReport {
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0, macro_fpr = 0,
         macro_fnr = 0;
  double overall_accuracy = 0;
  double kappa = 0;
};

// Per-class precision/recall/F1/FPR/FNR plus per-class accuracy (recall) and
// unweighted macro averages over classes with support. 0/0 cells evaluate to
// 0 and set the no_support flag.
MetricReport per_class_metrics(const ConfusionMatrix& m);

double overall_accuracy(const ConfusionMatrix& m);

// Chance-corrected agreement (p_o - p_e) / (1 - p_e) from the marginals.
// Throws when p_e == 1 (kappa undefined).
double cohen_kappa(const ConfusionMatrix& m);

// Full report: per-class table plus aggregates and kappa.
MetricReport evaluate_metrics(const ConfusionMatrix& m);

// Plain-text rendering with one record per class plus aggregates; fixed
// field names, consumed by the report command.
std::string render_metric_report(const MetricReport& report,
                                 const std::vector<std::string>& class_names);

}  // namespace wildfusion
