#include "wildfusion/metrics.hpp"

#include <iomanip>
#include <sstream>

#include "wildfusion/errors.hpp"

namespace wildfusion {

ConfusionMatrix::ConfusionMatrix(int num_classes) {
  if (num_classes < 1) {
    throw DataError("ConfusionMatrix: need at least one class");
  }
  counts_.setZero(num_classes, num_classes);
}

void ConfusionMatrix::accumulate(int actual, int predicted) {
  const int c = num_classes();
  if (actual < 0 || actual >= c || predicted < 0 || predicted >= c) {
    throw DataError("ConfusionMatrix::accumulate: class (" +
                    std::to_string(actual) + "," + std::to_string(predicted) +
                    ") out of range [0," + std::to_string(c) + ")");
  }
  counts_(actual, predicted) += 1;
}

ConfusionMatrix& ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes() != num_classes()) {
    throw DataError("ConfusionMatrix::merge: class count mismatch");
  }
  counts_ += other.counts_;
  return *this;
}

ConfusionMatrix ConfusionMatrix::from_counts(
    const Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw DataError("ConfusionMatrix::from_counts: matrix must be square");
  }
  if ((m.array() < 0).any()) {
    throw DataError("ConfusionMatrix::from_counts: negative count");
  }
  ConfusionMatrix cm(static_cast<int>(m.rows()));
  cm.counts_ = m;
  return cm;
}

MetricReport per_class_metrics(const ConfusionMatrix& m) {
  const int c = m.num_classes();
  const auto& n = m.counts();
  const std::int64_t total = m.total();
  if (total == 0) throw DataError("per_class_metrics: empty matrix");

  MetricReport report;
  report.per_class.resize(static_cast<std::size_t>(c));
  int with_support = 0;
  for (int i = 0; i < c; ++i) {
    auto& cm = report.per_class[static_cast<std::size_t>(i)];
    const std::int64_t tp = n(i, i);
    const std::int64_t fn = n.row(i).sum() - tp;
    const std::int64_t fp = n.col(i).sum() - tp;
    const std::int64_t tn = total - tp - fn - fp;
    cm.support = tp + fn;
    const auto rate = [](std::int64_t num, std::int64_t den) {
      return den > 0 ? static_cast<double>(num) / static_cast<double>(den)
                     : 0.0;
    };
    cm.precision = rate(tp, tp + fp);
    cm.recall = rate(tp, tp + fn);
    cm.f1 = rate(2 * tp, 2 * tp + fp + fn);
    cm.fpr = rate(fp, fp + tn);
    cm.fnr = rate(fn, fn + tp);
    cm.accuracy = cm.recall;  // per-class accuracy = diagonal over row sum
    cm.no_support = (tp + fn + fp) == 0;
    if (!cm.no_support) {
      ++with_support;
      report.macro_precision += cm.precision;
      report.macro_recall += cm.recall;
      report.macro_f1 += cm.f1;
      report.macro_fpr += cm.fpr;
      report.macro_fnr += cm.fnr;
    }
  }
  if (with_support > 0) {
    report.macro_precision /= with_support;
    report.macro_recall /= with_support;
    report.macro_f1 /= with_support;
    report.macro_fpr /= with_support;
    report.macro_fnr /= with_support;
  }
  return report;
}

double overall_accuracy(const ConfusionMatrix& m) {
  const std::int64_t total = m.total();
  if (total == 0) throw DataError("overall_accuracy: empty matrix");
  return static_cast<double>(m.counts().trace()) /
         static_cast<double>(total);
}

double cohen_kappa(const ConfusionMatrix& m) {
  const std::int64_t total = m.total();
  if (total == 0) throw DataError("cohen_kappa: empty matrix");
  const double n = static_cast<double>(total);
  const double p_o = static_cast<double>(m.counts().trace()) / n;
  double p_e = 0.0;
  for (int k = 0; k < m.num_classes(); ++k) {
    const double row = static_cast<double>(m.counts().row(k).sum());
    const double col = static_cast<double>(m.counts().col(k).sum());
    p_e += row * col;
  }
  p_e /= n * n;
  if (p_e >= 1.0) {
    throw DataError("cohen_kappa: p_e = 1, kappa undefined");
  }
  return (p_o - p_e) / (1.0 - p_e);
}

MetricReport evaluate_metrics(const ConfusionMatrix& m) {
  MetricReport report = per_class_metrics(m);
  report.overall_accuracy = overall_accuracy(m);
  report.kappa = cohen_kappa(m);
  return report;
}

std::string render_metric_report(const MetricReport& report,
                                 const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "class\tprecision\trecall\tf1\tfpr\tfnr\taccuracy\tsupport\n";
  for (std::size_t i = 0; i < report.per_class.size(); ++i) {
    const auto& c = report.per_class[i];
    const std::string name =
        i < class_names.size() ? class_names[i] : "class_" + std::to_string(i);
    os << name << '\t' << c.precision << '\t' << c.recall << '\t' << c.f1
       << '\t' << c.fpr << '\t' << c.fnr << '\t' << c.accuracy << '\t'
       << c.support;
    if (c.no_support) os << "\t(no support)";
    os << '\n';
  }
  os << "macro\t" << report.macro_precision << '\t' << report.macro_recall
     << '\t' << report.macro_f1 << '\t' << report.macro_fpr << '\t'
     << report.macro_fnr << "\t-\t-\n";
  os << "overall_accuracy\t" << report.overall_accuracy << '\n';
  os << "cohen_kappa\t" << report.kappa << '\n';
  return os.str();
}

}  // namespace wildfusion
