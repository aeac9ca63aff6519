#pragma once

#include <string>
#include <vector>

#include "wildfusion/ops.hpp"

namespace wildfusion {

enum class PrimitiveKind {
  kLinear,
  kConv2d,
  kRelu,
  kSigmoid,
  kAvgPool,
  kMaxPool,
  kGlobalAvgPool,
  kGlobalMaxPool,
  kChannelAvgPool,
  kChannelMaxPool,
  kElementwiseMul,
  kConcat,
  kAdd,
  kBatchNorm,
  kReshape,
  kSum,
};

inline const char* primitive_name(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::kLinear: return "linear";
    case PrimitiveKind::kConv2d: return "conv2d";
    case PrimitiveKind::kRelu: return "relu";
    case PrimitiveKind::kSigmoid: return "sigmoid";
    case PrimitiveKind::kAvgPool: return "avg-pool";
    case PrimitiveKind::kMaxPool: return "max-pool";
    case PrimitiveKind::kGlobalAvgPool: return "global-avg-pool";
    case PrimitiveKind::kGlobalMaxPool: return "global-max-pool";
    case PrimitiveKind::kChannelAvgPool: return "channel-avg-pool";
    case PrimitiveKind::kChannelMaxPool: return "channel-max-pool";
    case PrimitiveKind::kElementwiseMul: return "elementwise-mul";
    case PrimitiveKind::kConcat: return "concat";
    case PrimitiveKind::kAdd: return "add";
    case PrimitiveKind::kBatchNorm: return "batch-norm";
    case PrimitiveKind::kReshape: return "reshape";
    case PrimitiveKind::kSum: return "sum";
  }
  return "unknown";
}

struct PrimitiveAttrs {
  Conv2dAttrs conv;
  Pool2dAttrs pool;
  BatchNormAttrs batch_norm;
  int axis = 0;
  Shape target_shape;
};

// Uniform dispatch over the primitive set; the typed free functions in
// ops.hpp are preferred in model code, this entry exists so harnesses can
// iterate over every kind.
template <typename S>
Tensor<S> apply_primitive(Tape<S>& tape, PrimitiveKind kind,
                          std::vector<Tensor<S>> inputs,
                          const PrimitiveAttrs& attrs = {}) {
  const auto arity = [&](std::size_t lo, std::size_t hi) {
    if (inputs.size() < lo || inputs.size() > hi) {
      throw ShapeError(std::string(primitive_name(kind)) + ": expected " +
                       std::to_string(lo) +
                       (hi != lo ? ".." + std::to_string(hi) : "") +
                       " inputs, got " + std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case PrimitiveKind::kLinear:
      arity(2, 3);
      return linear(tape, inputs[0], inputs[1],
                    inputs.size() == 3 ? inputs[2] : Tensor<S>{});
    case PrimitiveKind::kConv2d:
      arity(2, 3);
      return conv2d(tape, inputs[0], inputs[1],
                    inputs.size() == 3 ? inputs[2] : Tensor<S>{}, attrs.conv);
    case PrimitiveKind::kRelu:
      arity(1, 1);
      return relu(tape, inputs[0]);
    case PrimitiveKind::kSigmoid:
      arity(1, 1);
      return sigmoid(tape, inputs[0]);
    case PrimitiveKind::kAvgPool:
      arity(1, 1);
      return avg_pool2d(tape, inputs[0], attrs.pool);
    case PrimitiveKind::kMaxPool:
      arity(1, 1);
      return max_pool2d(tape, inputs[0], attrs.pool);
    case PrimitiveKind::kGlobalAvgPool:
      arity(1, 1);
      return global_avg_pool(tape, inputs[0]);
    case PrimitiveKind::kGlobalMaxPool:
      arity(1, 1);
      return global_max_pool(tape, inputs[0]);
    case PrimitiveKind::kChannelAvgPool:
      arity(1, 1);
      return channel_avg_pool(tape, inputs[0]);
    case PrimitiveKind::kChannelMaxPool:
      arity(1, 1);
      return channel_max_pool(tape, inputs[0]);
    case PrimitiveKind::kElementwiseMul:
      arity(2, 2);
      return mul(tape, inputs[0], inputs[1]);
    case PrimitiveKind::kConcat:
      arity(1, SIZE_MAX);
      return concat(tape, inputs, attrs.axis);
    case PrimitiveKind::kAdd:
      arity(2, 2);
      return add(tape, inputs[0], inputs[1]);
    case PrimitiveKind::kBatchNorm:
      arity(5, 5);
      return batch_norm(tape, inputs[0], inputs[1], inputs[2], inputs[3],
                        inputs[4], attrs.batch_norm);
    case PrimitiveKind::kReshape:
      arity(1, 1);
      return reshape(tape, inputs[0], attrs.target_shape);
    case PrimitiveKind::kSum:
      arity(1, 1);
      return sum(tape, inputs[0]);
  }
  throw Error("apply_primitive: unknown primitive kind " +
              std::to_string(static_cast<int>(kind)));
}

}  // namespace wildfusion
