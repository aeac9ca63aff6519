#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "wildfusion/tensor.hpp"

namespace wildfusion {

// Plain SGD with a step schedule: the learning rate drops by decay_factor
// every decay_period_epochs.
struct OptimizerState {
  double base_lr = 1e-3;
  int decay_period_epochs = 7;
  double decay_factor = 0.1;
  int current_epoch = 0;

  void validate() const {
    if (base_lr <= 0) throw Error("OptimizerState: base_lr must be > 0");
    if (decay_period_epochs <= 0)
      throw Error("OptimizerState: decay_period_epochs must be > 0");
    if (decay_factor <= 0 || decay_factor >= 1)
      throw Error("OptimizerState: decay_factor must be in (0,1)");
    if (current_epoch < 0)
      throw Error("OptimizerState: current_epoch must be >= 0");
  }

  double effective_lr() const {
    validate();
    return base_lr *
           std::pow(decay_factor, current_epoch / decay_period_epochs);
  }
};

// w <- w - lr * grad for every parameter, then clears the grads.
template <typename S>
void sgd_step(std::vector<Tensor<S>>& params, const OptimizerState& state) {
  const S lr = static_cast<S>(state.effective_lr());
  for (auto& p : params) {
    if (!p.has_grad()) {
      throw Error("sgd_step: parameter with shape " +
                  shape_to_string(p.shape()) + " has no gradient");
    }
  }
  for (auto& p : params) {
    p.values() -= lr * p.grad();
    p.zero_grad();
  }
}

}  // namespace wildfusion
