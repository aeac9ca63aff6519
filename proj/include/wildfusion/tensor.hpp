#pragma once

#include <Eigen/Core>

#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wildfusion/errors.hpp"

namespace wildfusion {

using Shape = std::vector<Eigen::Index>;

inline Eigen::Index numel(const Shape& shape) {
  Eigen::Index n = 1;
  for (Eigen::Index d : shape) n *= d;
  return n;
}

inline std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename Scalar>
using MatrixRM =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense tensor in row-major order with optional gradient storage. Copies
// share the underlying payload (handle semantics, like the graph engines
// this mirrors); clone() makes an independent deep copy.
template <typename Scalar>
class Tensor {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : payload_(std::make_shared<Payload>()) {
    validate_shape(shape);
    payload_->shape = std::move(shape);
    payload_->values = Storage::Zero(numel(payload_->shape));
    payload_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return Tensor(std::move(shape), requires_grad);
  }

  static Tensor full(Shape shape, Scalar value, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    t.values().setConstant(value);
    return t;
  }

  static Tensor ones(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), Scalar(1), requires_grad);
  }

  static Tensor scalar(Scalar value, bool requires_grad = false) {
    return full({1}, value, requires_grad);
  }

  static Tensor from(Shape shape, std::vector<Scalar> values,
                     bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    if (static_cast<Eigen::Index>(values.size()) != t.size()) {
      throw ShapeError("Tensor::from: " + std::to_string(values.size()) +
                       " values for shape " + shape_to_string(t.shape()));
    }
    for (Eigen::Index i = 0; i < t.size(); ++i) t.values()[i] = values[i];
    return t;
  }

  bool defined() const { return payload_ != nullptr; }
  const Shape& shape() const { return payload_->shape; }
  int rank() const { return static_cast<int>(payload_->shape.size()); }
  Eigen::Index dim(int i) const { return payload_->shape[i]; }
  Eigen::Index size() const { return payload_->values.size(); }

  Storage& values() { return payload_->values; }
  const Storage& values() const { return payload_->values; }
  Scalar* data() { return payload_->values.data(); }
  const Scalar* data() const { return payload_->values.data(); }

  Scalar item() const {
    if (size() != 1) {
      throw ShapeError("Tensor::item: tensor has shape " +
                       shape_to_string(shape()));
    }
    return payload_->values[0];
  }

  bool requires_grad() const { return payload_ && payload_->requires_grad; }
  void set_requires_grad(bool v) { payload_->requires_grad = v; }

  bool has_grad() const { return payload_ && payload_->grad_set; }

  Storage& grad() {
    if (!has_grad()) throw Error("Tensor::grad: gradient not populated");
    return payload_->grad;
  }
  const Storage& grad() const {
    if (!has_grad()) throw Error("Tensor::grad: gradient not populated");
    return payload_->grad;
  }

  // Gradient mutation is const: Tensor is a handle and the payload is
  // shared, so `const Tensor&` only promises not to rebind the handle.

  // Materializes a zero gradient when none has been accumulated, so unused
  // parameters still report a (zero) gradient.
  Storage& grad_or_zeros() const {
    ensure_grad();
    return payload_->grad;
  }

  void accumulate_grad(const Eigen::Ref<const Storage>& g) const {
    if (g.size() != size()) {
      throw ShapeError("accumulate_grad: gradient size " +
                       std::to_string(g.size()) + " vs tensor size " +
                       std::to_string(size()));
    }
    ensure_grad();
    payload_->grad += g;
  }

  void seed_grad(Scalar value) const {
    ensure_grad();
    payload_->grad.setConstant(value);
  }

  void zero_grad() const {
    if (payload_) {
      payload_->grad.resize(0);
      payload_->grad_set = false;
    }
  }

  Tensor clone() const {
    Tensor t(shape(), requires_grad());
    t.values() = values();
    return t;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> t(shape(), requires_grad());
    t.values() = values().template cast<Other>();
    return t;
  }

  // Row-major matrix views over the flat data.
  Eigen::Map<MatrixRM<Scalar>> matrix(Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != size()) {
      throw ShapeError("Tensor::matrix: " + std::to_string(rows) + "x" +
                       std::to_string(cols) + " view of " +
                       shape_to_string(shape()));
    }
    return Eigen::Map<MatrixRM<Scalar>>(data(), rows, cols);
  }
  Eigen::Map<const MatrixRM<Scalar>> matrix(Eigen::Index rows,
                                            Eigen::Index cols) const {
    if (rows * cols != size()) {
      throw ShapeError("Tensor::matrix: " + std::to_string(rows) + "x" +
                       std::to_string(cols) + " view of " +
                       shape_to_string(shape()));
    }
    return Eigen::Map<const MatrixRM<Scalar>>(data(), rows, cols);
  }

  bool same_payload(const Tensor& other) const {
    return payload_ == other.payload_;
  }

 private:
  struct Payload {
    Shape shape;
    Storage values;
    Storage grad;
    bool requires_grad = false;
    bool grad_set = false;
  };

  static void validate_shape(const Shape& shape) {
    for (Eigen::Index d : shape) {
      if (d <= 0) {
        throw ShapeError("Tensor: non-positive dimension in " +
                         shape_to_string(shape));
      }
    }
  }

  void ensure_grad() const {
    if (!payload_->grad_set) {
      payload_->grad = Storage::Zero(size());
      payload_->grad_set = true;
    }
  }

  std::shared_ptr<Payload> payload_;
};

using Tensord = Tensor<double>;
using Tensorf = Tensor<float>;

}  // namespace wildfusion
