#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "wildfusion/tape.hpp"
#include "wildfusion/tensor.hpp"

namespace wildfusion {

// Central finite-difference verification of reverse-mode gradients.
//
// `graph` maps the point tensors to a scalar tensor; it is invoked once on a
// recording tape for the analytic gradients and twice per coordinate on
// non-recording tapes for the numeric estimate. Returns
//   max over coordinates of |analytic - numeric| / max(1, |analytic|)
// over every point tensor with requires_grad set. Runs in double precision.
template <typename Graph>
double finite_difference_check(Graph&& graph, std::vector<Tensord>& point,
                               double epsilon = 1e-5) {
  if (epsilon <= 0) throw Error("finite_difference_check: epsilon must be > 0");

  const auto eval = [&]() -> double {
    Taped probe(false);
    Tensord y = graph(probe, point);
    if (y.size() != 1) {
      throw ShapeError("finite_difference_check: graph output must be scalar, got " +
                       shape_to_string(y.shape()));
    }
    return y.item();
  };

  std::vector<Eigen::ArrayXd> analytic(point.size());
  {
    Taped tape;
    Tensord y = graph(tape, point);
    if (y.size() != 1) {
      throw ShapeError("finite_difference_check: graph output must be scalar, got " +
                       shape_to_string(y.shape()));
    }
    if (y.requires_grad()) {
      tape.backward(y, point);
    }
    for (std::size_t i = 0; i < point.size(); ++i) {
      if (!point[i].requires_grad()) continue;
      analytic[i] = point[i].has_grad()
                        ? Eigen::ArrayXd(point[i].grad())
                        : Eigen::ArrayXd(Eigen::ArrayXd::Zero(point[i].size()));
      point[i].zero_grad();
    }
  }

  const auto central_err = [&](Eigen::ArrayXd::Scalar* slot, double a,
                               double step) {
    const double saved = *slot;
    *slot = saved + step;
    const double f_plus = eval();
    *slot = saved - step;
    const double f_minus = eval();
    *slot = saved;
    const double numeric = (f_plus - f_minus) / (2.0 * step);
    return std::abs(a - numeric) / std::max(1.0, std::abs(a));
  };

  double max_err = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    if (!point[i].requires_grad()) continue;
    auto& vals = point[i].values();
    for (Eigen::Index j = 0; j < vals.size(); ++j) {
      const double a = analytic[i][j];
      double err = central_err(&vals[j], a, epsilon);
      // A coordinate whose probe interval straddles a relu/max kink shows a
      // step-dependent discrepancy; a wrong analytic gradient does not.
      // Shrink the step for such coordinates before believing the error.
      for (double step = epsilon / 16.0; err > 1e-6 && step > epsilon / 300.0;
           step /= 16.0) {
        err = std::min(err, central_err(&vals[j], a, step));
      }
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace wildfusion
