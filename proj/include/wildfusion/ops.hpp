#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "wildfusion/tape.hpp"
#include "wildfusion/tensor.hpp"

// Differentiable primitives. Each op validates shapes, runs the forward pass
// with Eigen, and, when the tape is recording and any input requires
// gradients, pushes a backward step that accumulates into the inputs' grads.
// Backward steps no-op when the op's output never received a gradient.

namespace wildfusion {

struct Conv2dAttrs {
  Eigen::Index stride = 1;
  Eigen::Index padding = 0;
};

struct Pool2dAttrs {
  Eigen::Index kernel = 2;
  Eigen::Index stride = 2;
};

struct BatchNormAttrs {
  bool training = true;
  double momentum = 0.1;
  double eps = 1e-5;
};

namespace detail {

template <typename S>
bool want_grad(const Tape<S>& tape, std::initializer_list<const Tensor<S>*> inputs) {
  if (!tape.recording()) return false;
  for (const auto* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

template <typename S>
void im2col(const S* x, Eigen::Index ic, Eigen::Index h, Eigen::Index w,
            Eigen::Index kh, Eigen::Index kw, Eigen::Index stride,
            Eigen::Index pad, Eigen::Index oh, Eigen::Index ow,
            Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& col) {
  col.setZero(ic * kh * kw, oh * ow);
  for (Eigen::Index c = 0; c < ic; ++c) {
    const S* plane = x + c * h * w;
    for (Eigen::Index ki = 0; ki < kh; ++ki) {
      for (Eigen::Index kj = 0; kj < kw; ++kj) {
        const Eigen::Index row = (c * kh + ki) * kw + kj;
        for (Eigen::Index oi = 0; oi < oh; ++oi) {
          const Eigen::Index ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= h) continue;
          for (Eigen::Index oj = 0; oj < ow; ++oj) {
            const Eigen::Index jj = oj * stride - pad + kj;
            if (jj < 0 || jj >= w) continue;
            col(row, oi * ow + oj) = plane[ii * w + jj];
          }
        }
      }
    }
  }
}

template <typename S>
void col2im_add(const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& col,
                Eigen::Index ic, Eigen::Index h, Eigen::Index w,
                Eigen::Index kh, Eigen::Index kw, Eigen::Index stride,
                Eigen::Index pad, Eigen::Index oh, Eigen::Index ow, S* dx) {
  for (Eigen::Index c = 0; c < ic; ++c) {
    S* plane = dx + c * h * w;
    for (Eigen::Index ki = 0; ki < kh; ++ki) {
      for (Eigen::Index kj = 0; kj < kw; ++kj) {
        const Eigen::Index row = (c * kh + ki) * kw + kj;
        for (Eigen::Index oi = 0; oi < oh; ++oi) {
          const Eigen::Index ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= h) continue;
          for (Eigen::Index oj = 0; oj < ow; ++oj) {
            const Eigen::Index jj = oj * stride - pad + kj;
            if (jj < 0 || jj >= w) continue;
            plane[ii * w + jj] += col(row, oi * ow + oj);
          }
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <typename S>
Tensor<S> relu(Tape<S>& tape, const Tensor<S>& x) {
  Tensor<S> out(x.shape());
  out.values() = x.values().max(S(0));
  if (detail::want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("relu", [x, out]() mutable {
      if (!out.has_grad()) return;
      x.accumulate_grad(
          (out.grad() * (x.values() > S(0)).template cast<S>()).eval());
    });
  }
  return out;
}

template <typename S>
Tensor<S> sigmoid(Tape<S>& tape, const Tensor<S>& x) {
  Tensor<S> out(x.shape());
  out.values() = S(1) / (S(1) + (-x.values()).exp());
  if (detail::want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("sigmoid", [x, out]() mutable {
      if (!out.has_grad()) return;
      const auto& y = out.values();
      x.accumulate_grad((out.grad() * y * (S(1) - y)).eval());
    });
  }
  return out;
}

template <typename S>
Tensor<S> add(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
  detail::require(a.shape() == b.shape(),
                  "add: shape mismatch " + shape_to_string(a.shape()) +
                      " vs " + shape_to_string(b.shape()));
  Tensor<S> out(a.shape());
  out.values() = a.values() + b.values();
  if (detail::want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record("add", [a, b, out]() mutable {
      if (!out.has_grad()) return;
      if (a.requires_grad()) a.accumulate_grad(out.grad());
      if (b.requires_grad()) b.accumulate_grad(out.grad());
    });
  }
  return out;
}

// Element-wise multiply with the broadcast forms the fusion blocks need:
//   same shape                    x  same shape
//   [C]       over [C,H,W]           per-channel gate, unbatched
//   [B,C]     over [B,C,H,W]         per-channel gate
//   [B,1,H,W] over [B,C,H,W]         spatial gate
template <typename S>
Tensor<S> mul(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
  enum class Mode { kSame, kChannelVec, kBatchChannel, kSpatial };
  // Canonicalize so `big` is the full-rank operand; the product itself is
  // commutative.
  Tensor<S> big = a, small = b;
  if (a.size() < b.size()) {
    big = b;
    small = a;
  }

  Mode mode;
  if (big.shape() == small.shape()) {
    mode = Mode::kSame;
  } else if (big.rank() == 3 && small.rank() == 1 &&
             small.dim(0) == big.dim(0)) {
    mode = Mode::kChannelVec;
  } else if (big.rank() == 4 && small.rank() == 2 &&
             small.dim(0) == big.dim(0) && small.dim(1) == big.dim(1)) {
    mode = Mode::kBatchChannel;
  } else if (big.rank() == 4 && small.rank() == 4 && small.dim(1) == 1 &&
             small.dim(0) == big.dim(0) && small.dim(2) == big.dim(2) &&
             small.dim(3) == big.dim(3)) {
    mode = Mode::kSpatial;
  } else {
    throw ShapeError("elementwise-mul: no broadcast between " +
                     shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }

  Tensor<S> out(big.shape());
  const Eigen::Index plane = big.rank() >= 2
                                 ? big.dim(big.rank() - 1) * big.dim(big.rank() - 2)
                                 : 1;
  switch (mode) {
    case Mode::kSame:
      out.values() = big.values() * small.values();
      break;
    case Mode::kChannelVec: {
      const Eigen::Index c = big.dim(0);
      for (Eigen::Index i = 0; i < c; ++i) {
        out.values().segment(i * plane, plane) =
            big.values().segment(i * plane, plane) * small.values()[i];
      }
      break;
    }
    case Mode::kBatchChannel: {
      const Eigen::Index bs = big.dim(0), c = big.dim(1);
      for (Eigen::Index n = 0; n < bs; ++n) {
        for (Eigen::Index i = 0; i < c; ++i) {
          out.values().segment((n * c + i) * plane, plane) =
              big.values().segment((n * c + i) * plane, plane) *
              small.values()[n * c + i];
        }
      }
      break;
    }
    case Mode::kSpatial: {
      const Eigen::Index bs = big.dim(0), c = big.dim(1);
      for (Eigen::Index n = 0; n < bs; ++n) {
        for (Eigen::Index i = 0; i < c; ++i) {
          out.values().segment((n * c + i) * plane, plane) =
              big.values().segment((n * c + i) * plane, plane) *
              small.values().segment(n * plane, plane);
        }
      }
      break;
    }
  }

  if (detail::want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record("elementwise-mul", [big, small, out, mode, plane]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      using Storage = typename Tensor<S>::Storage;
      switch (mode) {
        case Mode::kSame:
          if (big.requires_grad())
            big.accumulate_grad((g * small.values()).eval());
          if (small.requires_grad())
            small.accumulate_grad((g * big.values()).eval());
          break;
        case Mode::kChannelVec: {
          const Eigen::Index c = big.dim(0);
          if (big.requires_grad()) {
            Storage db(big.size());
            for (Eigen::Index i = 0; i < c; ++i)
              db.segment(i * plane, plane) =
                  g.segment(i * plane, plane) * small.values()[i];
            big.accumulate_grad(db);
          }
          if (small.requires_grad()) {
            Storage ds = Storage::Zero(c);
            for (Eigen::Index i = 0; i < c; ++i)
              ds[i] = (g.segment(i * plane, plane) *
                       big.values().segment(i * plane, plane))
                          .sum();
            small.accumulate_grad(ds);
          }
          break;
        }
        case Mode::kBatchChannel: {
          const Eigen::Index bs = big.dim(0), c = big.dim(1);
          if (big.requires_grad()) {
            Storage db(big.size());
            for (Eigen::Index n = 0; n < bs; ++n)
              for (Eigen::Index i = 0; i < c; ++i)
                db.segment((n * c + i) * plane, plane) =
                    g.segment((n * c + i) * plane, plane) *
                    small.values()[n * c + i];
            big.accumulate_grad(db);
          }
          if (small.requires_grad()) {
            Storage ds = Storage::Zero(small.size());
            for (Eigen::Index n = 0; n < bs; ++n)
              for (Eigen::Index i = 0; i < c; ++i)
                ds[n * c + i] = (g.segment((n * c + i) * plane, plane) *
                                 big.values().segment((n * c + i) * plane, plane))
                                    .sum();
            small.accumulate_grad(ds);
          }
          break;
        }
        case Mode::kSpatial: {
          const Eigen::Index bs = big.dim(0), c = big.dim(1);
          if (big.requires_grad()) {
            Storage db(big.size());
            for (Eigen::Index n = 0; n < bs; ++n)
              for (Eigen::Index i = 0; i < c; ++i)
                db.segment((n * c + i) * plane, plane) =
                    g.segment((n * c + i) * plane, plane) *
                    small.values().segment(n * plane, plane);
            big.accumulate_grad(db);
          }
          if (small.requires_grad()) {
            Storage ds = Storage::Zero(small.size());
            for (Eigen::Index n = 0; n < bs; ++n)
              for (Eigen::Index i = 0; i < c; ++i)
                ds.segment(n * plane, plane) +=
                    g.segment((n * c + i) * plane, plane) *
                    big.values().segment((n * c + i) * plane, plane);
            small.accumulate_grad(ds);
          }
          break;
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape ops

template <typename S>
Tensor<S> concat(Tape<S>& tape, const std::vector<Tensor<S>>& xs, int axis) {
  detail::require(!xs.empty(), "concat: no inputs");
  const int rank = xs[0].rank();
  detail::require(axis >= 0 && axis < rank, "concat: axis " +
                                                std::to_string(axis) +
                                                " out of range for rank " +
                                                std::to_string(rank));
  Shape out_shape = xs[0].shape();
  Eigen::Index axis_total = 0;
  for (const auto& x : xs) {
    detail::require(x.rank() == rank, "concat: rank mismatch");
    for (int d = 0; d < rank; ++d) {
      if (d == axis) continue;
      detail::require(x.dim(d) == xs[0].dim(d),
                      "concat: dim " + std::to_string(d) + " mismatch " +
                          shape_to_string(x.shape()) + " vs " +
                          shape_to_string(xs[0].shape()));
    }
    axis_total += x.dim(axis);
  }
  out_shape[axis] = axis_total;

  Eigen::Index outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[d];
  for (int d = axis + 1; d < rank; ++d) inner *= out_shape[d];

  Tensor<S> out(out_shape);
  const Eigen::Index out_stride = axis_total * inner;
  Eigen::Index offset = 0;
  for (const auto& x : xs) {
    const Eigen::Index block = x.dim(axis) * inner;
    for (Eigen::Index o = 0; o < outer; ++o) {
      out.values().segment(o * out_stride + offset, block) =
          x.values().segment(o * block, block);
    }
    offset += block;
  }

  bool any_grad = false;
  for (const auto& x : xs) any_grad |= x.requires_grad();
  if (tape.recording() && any_grad) {
    out.set_requires_grad(true);
    auto inputs = xs;
    tape.record("concat", [inputs, out, outer, inner, out_stride]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      Eigen::Index offset = 0;
      for (auto& x : inputs) {
        const Eigen::Index block = x.size() / outer;
        if (x.requires_grad()) {
          typename Tensor<S>::Storage dx(x.size());
          for (Eigen::Index o = 0; o < outer; ++o)
            dx.segment(o * block, block) =
                g.segment(o * out_stride + offset, block);
          x.accumulate_grad(dx);
        }
        offset += block;
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> reshape(Tape<S>& tape, const Tensor<S>& x, Shape shape) {
  detail::require(numel(shape) == x.size(),
                  "reshape: cannot view " + shape_to_string(x.shape()) +
                      " as " + shape_to_string(shape));
  Tensor<S> out(shape);
  out.values() = x.values();
  if (detail::want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("reshape", [x, out]() mutable {
      if (!out.has_grad()) return;
      x.accumulate_grad(out.grad());
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear

// x: [B,in], weight: [out,in], bias: [out] or undefined.
template <typename S>
Tensor<S> linear(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& weight,
                 const Tensor<S>& bias = {}) {
  detail::require(x.rank() == 2, "linear: input must be [B,in], got " +
                                     shape_to_string(x.shape()));
  detail::require(weight.rank() == 2, "linear: weight must be [out,in], got " +
                                          shape_to_string(weight.shape()));
  detail::require(x.dim(1) == weight.dim(1),
                  "linear: input width " + std::to_string(x.dim(1)) +
                      " vs weight width " + std::to_string(weight.dim(1)));
  const Eigen::Index batch = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  if (bias.defined()) {
    detail::require(bias.rank() == 1 && bias.dim(0) == out_dim,
                    "linear: bias shape " + shape_to_string(bias.shape()) +
                        " vs out width " + std::to_string(out_dim));
  }

  Tensor<S> out(Shape{batch, out_dim});
  auto xm = x.matrix(batch, in);
  auto wm = weight.matrix(out_dim, in);
  auto om = out.matrix(batch, out_dim);
  om.noalias() = xm * wm.transpose();
  if (bias.defined()) {
    om.rowwise() +=
        Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(bias.data(),
                                                              out_dim);
  }

  if (detail::want_grad(tape, {&x, &weight, &bias})) {
    out.set_requires_grad(true);
    tape.record("linear", [x, weight, bias, out, batch, in, out_dim]() mutable {
      if (!out.has_grad()) return;
      Eigen::Map<const MatrixRM<S>> g(out.grad().data(), batch, out_dim);
      if (x.requires_grad()) {
        MatrixRM<S> dx = g * weight.matrix(out_dim, in);
        x.accumulate_grad(Eigen::Map<const typename Tensor<S>::Storage>(
            dx.data(), dx.size()));
      }
      if (weight.requires_grad()) {
        MatrixRM<S> dw = g.transpose() * x.matrix(batch, in);
        weight.accumulate_grad(Eigen::Map<const typename Tensor<S>::Storage>(
            dw.data(), dw.size()));
      }
      if (bias.defined() && bias.requires_grad()) {
        bias.accumulate_grad(g.colwise().sum().transpose().array().eval());
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution

// x: [B,IC,H,W], weight: [OC,IC,KH,KW], bias: [OC] or undefined.
template <typename S>
Tensor<S> conv2d(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& weight,
                 const Tensor<S>& bias = {}, const Conv2dAttrs& attrs = {}) {
  detail::require(x.rank() == 4, "conv2d: input must be [B,C,H,W], got " +
                                     shape_to_string(x.shape()));
  detail::require(weight.rank() == 4,
                  "conv2d: weight must be [OC,IC,KH,KW], got " +
                      shape_to_string(weight.shape()));
  detail::require(x.dim(1) == weight.dim(1),
                  "conv2d: input channels " + std::to_string(x.dim(1)) +
                      " vs kernel channels " + std::to_string(weight.dim(1)));
  detail::require(attrs.stride >= 1 && attrs.padding >= 0,
                  "conv2d: invalid stride/padding");
  const Eigen::Index batch = x.dim(0), ic = x.dim(1), h = x.dim(2),
                     w = x.dim(3);
  const Eigen::Index oc = weight.dim(0), kh = weight.dim(2),
                     kw = weight.dim(3);
  const Eigen::Index oh = (h + 2 * attrs.padding - kh) / attrs.stride + 1;
  const Eigen::Index ow = (w + 2 * attrs.padding - kw) / attrs.stride + 1;
  detail::require(h + 2 * attrs.padding >= kh && w + 2 * attrs.padding >= kw &&
                      oh >= 1 && ow >= 1,
                  "conv2d: kernel " + std::to_string(kh) + "x" +
                      std::to_string(kw) + " too large for input " +
                      shape_to_string(x.shape()) + " with padding " +
                      std::to_string(attrs.padding));
  if (bias.defined()) {
    detail::require(bias.rank() == 1 && bias.dim(0) == oc,
                    "conv2d: bias shape " + shape_to_string(bias.shape()));
  }

  Tensor<S> out(Shape{batch, oc, oh, ow});
  {
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> col;
    auto wm = weight.matrix(oc, ic * kh * kw);
    for (Eigen::Index n = 0; n < batch; ++n) {
      detail::im2col(x.data() + n * ic * h * w, ic, h, w, kh, kw, attrs.stride,
                     attrs.padding, oh, ow, col);
      Eigen::Map<MatrixRM<S>> om(out.data() + n * oc * oh * ow, oc, oh * ow);
      om.noalias() = wm * col;
      if (bias.defined()) {
        om.colwise() += Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>(
            bias.data(), oc);
      }
    }
  }

  if (detail::want_grad(tape, {&x, &weight, &bias})) {
    out.set_requires_grad(true);
    tape.record("conv2d", [x, weight, bias, out, attrs, batch, ic, h, w, oc,
                           kh, kw, oh, ow]() mutable {
      if (!out.has_grad()) return;
      Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> col;
      auto wm = weight.matrix(oc, ic * kh * kw);
      MatrixRM<S> dw = MatrixRM<S>::Zero(oc, ic * kh * kw);
      typename Tensor<S>::Storage dx;
      if (x.requires_grad())
        dx = Tensor<S>::Storage::Zero(x.size());
      Eigen::Matrix<S, Eigen::Dynamic, 1> db =
          Eigen::Matrix<S, Eigen::Dynamic, 1>::Zero(oc);
      for (Eigen::Index n = 0; n < batch; ++n) {
        Eigen::Map<const MatrixRM<S>> g(out.grad().data() + n * oc * oh * ow,
                                        oc, oh * ow);
        if (x.requires_grad() || weight.requires_grad()) {
          detail::im2col(x.data() + n * ic * h * w, ic, h, w, kh, kw,
                         attrs.stride, attrs.padding, oh, ow, col);
        }
        if (weight.requires_grad()) dw.noalias() += g * col.transpose();
        if (x.requires_grad()) {
          Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> dcol =
              wm.transpose() * g;
          detail::col2im_add(dcol, ic, h, w, kh, kw, attrs.stride,
                             attrs.padding, oh, ow,
                             dx.data() + n * ic * h * w);
        }
        if (bias.defined() && bias.requires_grad()) db += g.rowwise().sum();
      }
      if (weight.requires_grad()) {
        weight.accumulate_grad(Eigen::Map<const typename Tensor<S>::Storage>(
            dw.data(), dw.size()));
      }
      if (x.requires_grad()) x.accumulate_grad(dx);
      if (bias.defined() && bias.requires_grad())
        bias.accumulate_grad(db.array());
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pooling

template <typename S>
Tensor<S> avg_pool2d(Tape<S>& tape, const Tensor<S>& x,
                     const Pool2dAttrs& attrs = {}) {
  detail::require(x.rank() == 4, "avg-pool: input must be [B,C,H,W], got " +
                                     shape_to_string(x.shape()));
  const Eigen::Index batch = x.dim(0), c = x.dim(1), h = x.dim(2),
                     w = x.dim(3);
  const Eigen::Index k = attrs.kernel, st = attrs.stride;
  detail::require(k >= 1 && st >= 1 && k <= h && k <= w,
                  "avg-pool: kernel " + std::to_string(k) +
                      " does not fit input " + shape_to_string(x.shape()));
  const Eigen::Index oh = (h - k) / st + 1, ow = (w - k) / st + 1;
  Tensor<S> out(Shape{batch, c, oh, ow});
  const S inv = S(1) / S(k * k);
  for (Eigen::Index p = 0; p < batch * c; ++p) {
    const S* in_plane = x.data() + p * h * w;
    S* out_plane = out.data() + p * oh * ow;
    for (Eigen::Index oi = 0; oi < oh; ++oi)
      for (Eigen::Index oj = 0; oj < ow; ++oj) {
        S acc = 0;
        for (Eigen::Index ki = 0; ki < k; ++ki)
          for (Eigen::Index kj = 0; kj < k; ++kj)
            acc += in_plane[(oi * st + ki) * w + oj * st + kj];
        out_plane[oi * ow + oj] = acc * inv;
      }
  }
  if (detail::want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("avg-pool", [x, out, batch, c, h, w, k, st, oh, ow,
                             inv]() mutable {
      if (!out.has_grad()) return;
      typename Tensor<S>::Storage dx = Tensor<S>::Storage::Zero(x.size());
      for (Eigen::Index p = 0; p < batch * c; ++p) {
        const S* g_plane = out.grad().data() + p * oh * ow;
        S* dx_plane = dx.data() + p * h * w;
        for (Eigen::Index oi = 0; oi < oh; ++oi)
          for (Eigen::Index oj = 0; oj < ow; ++oj) {
            const S g = g_plane[oi * ow + oj] * inv;
            for (Eigen::Index ki = 0; ki < k; ++ki)
              for (Eigen::Index kj = 0; kj < k; ++kj)
                dx_plane[(oi * st + ki) * w + oj * st + kj] += g;
          }
      }
      x.accumulate_grad(dx);
    });
  }
  return out;
}

template <typename S>
Tensor<S> max_pool2d(Tape<S>& tape, const Tensor<S>& x,
                     const Pool2dAttrs& attrs = {}) {
  detail::require(x.rank() == 4, "max-pool: input must be [B,C,H,W], got " +
                                     shape_to_string(x.shape()));
  const Eigen::Index batch = x.dim(0), c = x.dim(1), h = x.dim(2),
                     w = x.dim(3);
  const Eigen::Index k = attrs.kernel, st = attrs.stride;
  detail::require(k >= 1 && st >= 1 && k <= h && k <= w,
                  "max-pool: kernel " + std::to_string(k) +
                      " does not fit input " + shape_to_string(x.shape()));
  const Eigen::Index oh = (h - k) / st + 1, ow = (w - k) / st + 1;
  Tensor<S> out(Shape{batch, c, oh, ow});
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(out.size()));
  for (Eigen::Index p = 0; p < batch * c; ++p) {
    const S* in_plane = x.data() + p * h * w;
    S* out_plane = out.data() + p * oh * ow;
    for (Eigen::Index oi = 0; oi < oh; ++oi)
      for (Eigen::Index oj = 0; oj < ow; ++oj) {
        S best = -std::numeric_limits<S>::infinity();
        Eigen::Index best_idx = 0;
        for (Eigen::Index ki = 0; ki < k; ++ki)
          for (Eigen::Index kj = 0; kj < k; ++kj) {
            const Eigen::Index idx = (oi * st + ki) * w + oj * st + kj;
            if (in_plane[idx] > best) {
              best = in_plane[idx];
              best_idx = idx;
            }
          }
        out_plane[oi * ow + oj] = best;
        argmax[static_cast<std::size_t>(p * oh * ow + oi * ow + oj)] =
            p * h * w + best_idx;
      }
  }
  if (detail::want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("max-pool", [x, out, argmax]() mutable {
      if (!out.has_grad()) return;
      typename Tensor<S>::Storage dx = Tensor<S>::Storage::Zero(x.size());
      for (Eigen::Index i = 0; i < out.size(); ++i)
        dx[argmax[static_cast<std::size_t>(i)]] += out.grad()[i];
      x.accumulate_grad(dx);
    });
  }
  return out;
}

// [B,C,H,W] -> [B,C]
template <typename S>
Tensor<S> global_avg_pool(Tape<S>& tape, const Tensor<S>& x) {
  detail::require(x.rank() == 4, "global-avg-pool: input must be [B,C,H,W]");
  const Eigen::Index bc = x.dim(0) * x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<S> out(Shape{x.dim(0), x.dim(1)});
  for (Eigen::Index p = 0; p < bc; ++p)
    out.values()[p] = x.values().segment(p * plane, plane).mean();
  if (detail::want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("global-avg-pool", [x, out, bc, plane]() mutable {
      if (!out.has_grad()) return;
      typename Tensor<S>::Storage dx(x.size());
      for (Eigen::Index p = 0; p < bc; ++p)
        dx.segment(p * plane, plane).setConstant(out.grad()[p] / S(plane));
      x.accumulate_grad(dx);
    });
  }
  return out;
}

template <typename S>
Tensor<S> global_max_pool(Tape<S>& tape, const Tensor<S>& x) {
  detail::require(x.rank() == 4, "global-max-pool: input must be [B,C,H,W]");
  const Eigen::Index bc = x.dim(0) * x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<S> out(Shape{x.dim(0), x.dim(1)});
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(bc));
  for (Eigen::Index p = 0; p < bc; ++p) {
    Eigen::Index rel = 0;
    out.values()[p] = x.values().segment(p * plane, plane).maxCoeff(&rel);
    argmax[static_cast<std::size_t>(p)] = p * plane + rel;
  }
  if (detail::want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("global-max-pool", [x, out, argmax]() mutable {
      if (!out.has_grad()) return;
      typename Tensor<S>::Storage dx = Tensor<S>::Storage::Zero(x.size());
      for (Eigen::Index p = 0; p < out.size(); ++p)
        dx[argmax[static_cast<std::size_t>(p)]] += out.grad()[p];
      x.accumulate_grad(dx);
    });
  }
  return out;
}

// [B,C,H,W] -> [B,1,H,W], mean over channels.
template <typename S>
Tensor<S> channel_avg_pool(Tape<S>& tape, const Tensor<S>& x) {
  detail::require(x.rank() == 4, "channel-avg-pool: input must be [B,C,H,W]");
  const Eigen::Index batch = x.dim(0), c = x.dim(1),
                     plane = x.dim(2) * x.dim(3);
  Tensor<S> out(Shape{batch, 1, x.dim(2), x.dim(3)});
  for (Eigen::Index n = 0; n < batch; ++n) {
    auto seg = out.values().segment(n * plane, plane);
    seg.setZero();
    for (Eigen::Index i = 0; i < c; ++i)
      seg += x.values().segment((n * c + i) * plane, plane);
    seg /= S(c);
  }
  if (detail::want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("channel-avg-pool", [x, out, batch, c, plane]() mutable {
      if (!out.has_grad()) return;
      typename Tensor<S>::Storage dx(x.size());
      for (Eigen::Index n = 0; n < batch; ++n)
        for (Eigen::Index i = 0; i < c; ++i)
          dx.segment((n * c + i) * plane, plane) =
              out.grad().segment(n * plane, plane) / S(c);
      x.accumulate_grad(dx);
    });
  }
  return out;
}

// [B,C,H,W] -> [B,1,H,W], max over channels.
template <typename S>
Tensor<S> channel_max_pool(Tape<S>& tape, const Tensor<S>& x) {
  detail::require(x.rank() == 4, "channel-max-pool: input must be [B,C,H,W]");
  const Eigen::Index batch = x.dim(0), c = x.dim(1),
                     plane = x.dim(2) * x.dim(3);
  Tensor<S> out(Shape{batch, 1, x.dim(2), x.dim(3)});
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(out.size()));
  for (Eigen::Index n = 0; n < batch; ++n) {
    for (Eigen::Index s = 0; s < plane; ++s) {
      S best = -std::numeric_limits<S>::infinity();
      Eigen::Index best_ch = 0;
      for (Eigen::Index i = 0; i < c; ++i) {
        const S v = x.values()[(n * c + i) * plane + s];
        if (v > best) {
          best = v;
          best_ch = i;
        }
      }
      out.values()[n * plane + s] = best;
      argmax[static_cast<std::size_t>(n * plane + s)] =
          (n * c + best_ch) * plane + s;
    }
  }
  if (detail::want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("channel-max-pool", [x, out, argmax]() mutable {
      if (!out.has_grad()) return;
      typename Tensor<S>::Storage dx = Tensor<S>::Storage::Zero(x.size());
      for (Eigen::Index i = 0; i < out.size(); ++i)
        dx[argmax[static_cast<std::size_t>(i)]] += out.grad()[i];
      x.accumulate_grad(dx);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch normalization over channels of a [B,C,H,W] tensor.
//
// Training mode uses per-batch statistics and folds them into the running
// buffers with the given momentum; evaluation mode reads the running buffers.
// running_mean / running_var are buffers, not differentiable parameters.
template <typename S>
Tensor<S> batch_norm(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& gamma,
                     const Tensor<S>& beta, Tensor<S>& running_mean,
                     Tensor<S>& running_var, const BatchNormAttrs& attrs = {}) {
  detail::require(x.rank() == 4, "batch-norm: input must be [B,C,H,W], got " +
                                     shape_to_string(x.shape()));
  const Eigen::Index batch = x.dim(0), c = x.dim(1),
                     plane = x.dim(2) * x.dim(3);
  detail::require(gamma.size() == c && beta.size() == c &&
                      running_mean.size() == c && running_var.size() == c,
                  "batch-norm: parameter size mismatch with " +
                      std::to_string(c) + " channels");
  const Eigen::Index n_per_c = batch * plane;
  const S eps = static_cast<S>(attrs.eps);

  using Storage = typename Tensor<S>::Storage;
  Storage mean(c), var(c);
  if (attrs.training) {
    mean.setZero();
    var.setZero();
    for (Eigen::Index nb = 0; nb < batch; ++nb)
      for (Eigen::Index i = 0; i < c; ++i)
        mean[i] += x.values().segment((nb * c + i) * plane, plane).sum();
    mean /= S(n_per_c);
    for (Eigen::Index nb = 0; nb < batch; ++nb)
      for (Eigen::Index i = 0; i < c; ++i)
        var[i] += (x.values().segment((nb * c + i) * plane, plane) - mean[i])
                      .square()
                      .sum();
    var /= S(n_per_c);
    const S mom = static_cast<S>(attrs.momentum);
    const S unbias =
        n_per_c > 1 ? S(n_per_c) / S(n_per_c - 1) : S(1);
    running_mean.values() = (S(1) - mom) * running_mean.values() + mom * mean;
    running_var.values() =
        (S(1) - mom) * running_var.values() + mom * (var * unbias);
  } else {
    mean = running_mean.values();
    var = running_var.values();
  }

  Storage inv_std = (var + eps).sqrt().inverse();
  Tensor<S> out(x.shape());
  for (Eigen::Index nb = 0; nb < batch; ++nb)
    for (Eigen::Index i = 0; i < c; ++i)
      out.values().segment((nb * c + i) * plane, plane) =
          (x.values().segment((nb * c + i) * plane, plane) - mean[i]) *
              inv_std[i] * gamma.values()[i] +
          beta.values()[i];

  if (detail::want_grad(tape, {&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    const bool training = attrs.training;
    tape.record("batch-norm", [x, gamma, beta, out, mean, inv_std, batch, c,
                               plane, n_per_c, training]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      Storage dgamma = Storage::Zero(c), dbeta = Storage::Zero(c);
      Storage sum_g = Storage::Zero(c), sum_g_xhat = Storage::Zero(c);
      for (Eigen::Index nb = 0; nb < batch; ++nb)
        for (Eigen::Index i = 0; i < c; ++i) {
          const auto gi = g.segment((nb * c + i) * plane, plane);
          const auto xhat =
              ((x.values().segment((nb * c + i) * plane, plane) - mean[i]) *
               inv_std[i])
                  .eval();
          sum_g[i] += gi.sum();
          sum_g_xhat[i] += (gi * xhat).sum();
        }
      dbeta = sum_g;
      dgamma = sum_g_xhat;
      if (x.requires_grad()) {
        Storage dx(x.size());
        for (Eigen::Index nb = 0; nb < batch; ++nb)
          for (Eigen::Index i = 0; i < c; ++i) {
            const auto gi = g.segment((nb * c + i) * plane, plane);
            const auto xhat =
                ((x.values().segment((nb * c + i) * plane, plane) - mean[i]) *
                 inv_std[i])
                    .eval();
            if (training) {
              dx.segment((nb * c + i) * plane, plane) =
                  gamma.values()[i] * inv_std[i] *
                  (gi - sum_g[i] / S(n_per_c) -
                   xhat * (sum_g_xhat[i] / S(n_per_c)));
            } else {
              dx.segment((nb * c + i) * plane, plane) =
                  gi * gamma.values()[i] * inv_std[i];
            }
          }
        x.accumulate_grad(dx);
      }
      if (gamma.requires_grad()) gamma.accumulate_grad(dgamma);
      if (beta.requires_grad()) beta.accumulate_grad(dbeta);
    });
  }
  return out;
}

// Reduction to a scalar; the adjoint broadcasts the upstream gradient.
template <typename S>
Tensor<S> sum(Tape<S>& tape, const Tensor<S>& x) {
  Tensor<S> out = Tensor<S>::scalar(x.values().sum());
  if (detail::want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("sum", [x, out]() mutable {
      if (!out.has_grad()) return;
      x.accumulate_grad(typename Tensor<S>::Storage(
          Tensor<S>::Storage::Constant(x.size(), out.grad()[0])));
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss

// Mean-reduced softmax cross entropy. logits: [B,C], labels: B class indices.
template <typename S>
Tensor<S> cross_entropy_loss(Tape<S>& tape, const Tensor<S>& logits,
                             const std::vector<int>& labels) {
  detail::require(logits.rank() == 2, "cross-entropy: logits must be [B,C]");
  const Eigen::Index batch = logits.dim(0), classes = logits.dim(1);
  detail::require(static_cast<Eigen::Index>(labels.size()) == batch,
                  "cross-entropy: " + std::to_string(labels.size()) +
                      " labels for batch " + std::to_string(batch));
  for (int label : labels) {
    if (label < 0 || label >= classes) {
      throw Error("cross-entropy: label " + std::to_string(label) +
                  " out of range [0," + std::to_string(classes) + ")");
    }
  }

  S total = 0;
  for (Eigen::Index n = 0; n < batch; ++n) {
    const auto row = logits.values().segment(n * classes, classes);
    const S m = row.maxCoeff();
    const S lse = m + std::log((row - m).exp().sum());
    total += lse - row[labels[static_cast<std::size_t>(n)]];
  }
  Tensor<S> out = Tensor<S>::scalar(total / S(batch));

  if (detail::want_grad(tape, {&logits})) {
    out.set_requires_grad(true);
    tape.record("cross-entropy", [logits, out, labels, batch,
                                  classes]() mutable {
      if (!out.has_grad()) return;
      const S g = out.grad()[0] / S(batch);
      typename Tensor<S>::Storage dl(logits.size());
      for (Eigen::Index n = 0; n < batch; ++n) {
        const auto row = logits.values().segment(n * classes, classes);
        const S m = row.maxCoeff();
        const auto e = (row - m).exp().eval();
        dl.segment(n * classes, classes) = e / e.sum() * g;
        dl[n * classes + labels[static_cast<std::size_t>(n)]] -= g;
      }
      logits.accumulate_grad(dl);
    });
  }
  return out;
}

}  // namespace wildfusion
