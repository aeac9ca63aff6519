#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "wildfusion/errors.hpp"
#include "wildfusion/tensor.hpp"

namespace wildfusion {

// Wengert list of executed primitives. Recording order is execution order,
// which is already topological, so one reverse sweep visits every primitive
// exactly once. A tape and its tensors are a single-threaded unit of work;
// independent tapes may run on different threads.
template <typename Scalar>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return steps_.size(); }

  void record(const char* op, std::function<void()> backward_step) {
    steps_.push_back(Step{op, std::move(backward_step)});
  }

  // Seeds d(loss)/d(loss) = 1 and sweeps the list in reverse, accumulating
  // into the grad field of every tensor that requires gradients. Tensors in
  // `materialize` get a zero gradient if the sweep never touched them.
  void backward(Tensor<Scalar>& loss,
                std::vector<Tensor<Scalar>> materialize = {}) {
    if (loss.size() != 1) {
      throw ShapeError("backward: loss must be scalar, got shape " +
                       shape_to_string(loss.shape()));
    }
    if (!loss.requires_grad()) {
      throw Error("backward: loss is not connected to the tape");
    }
    if (consumed_) {
      throw Error("backward: tape already traversed");
    }
    consumed_ = true;
    loss.seed_grad(Scalar(1));
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
      it->backward();
    }
    for (auto& t : materialize) {
      if (t.requires_grad()) t.grad_or_zeros();
    }
  }

  void clear() {
    steps_.clear();
    consumed_ = false;
  }

 private:
  struct Step {
    const char* op;
    std::function<void()> backward;
  };

  std::vector<Step> steps_;
  bool recording_ = true;
  bool consumed_ = false;
};

using Taped = Tape<double>;
using Tapef = Tape<float>;

}  // namespace wildfusion
