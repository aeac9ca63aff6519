#include <cmath>

#include "doctest.h"
#include "wildfusion/ops.hpp"
#include "wildfusion/primitive.hpp"
#include "wildfusion/rng.hpp"

using namespace wildfusion;

TEST_CASE("tensor construction and invariants") {
  CHECK_THROWS_AS(Tensord({2, 0, 3}), ShapeError);
  CHECK_THROWS_AS(Tensord::from({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensord::ones({2, 2}).item(), ShapeError);
  CHECK_THROWS_AS(Tensord::ones({2, 3}).matrix(2, 4), ShapeError);

  auto t = Tensord::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(numel(t.shape()) == t.size());
  CHECK(shape_to_string(t.shape()) == "[2x3]");

  // Handle semantics: copies share the payload, clone does not.
  auto alias = t;
  alias.values()[0] = 99;
  CHECK(t.values()[0] == 99);
  auto deep = t.clone();
  deep.values()[0] = 1;
  CHECK(t.values()[0] == 99);

  // grad, when present, has the tensor's shape.
  auto p = Tensord::ones({4}, true);
  CHECK_FALSE(p.has_grad());
  CHECK_THROWS_AS(p.grad(), Error);
  p.grad_or_zeros();
  CHECK(p.grad().size() == 4);
  CHECK_THROWS_AS(p.accumulate_grad(Eigen::ArrayXd::Zero(3)), ShapeError);
}

TEST_CASE("relu clamps negatives") {
  Taped tape;
  auto x = Tensord::from({3}, {-2, 0, 3});
  auto y = relu(tape, x);
  CHECK(y.values()[0] == 0);
  CHECK(y.values()[1] == 0);
  CHECK(y.values()[2] == 3);
}

TEST_CASE("sigmoid at zero is one half") {
  Taped tape;
  auto y = sigmoid(tape, Tensord::from({1}, {0.0}));
  CHECK(y.values()[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("conv2d with a 1x1 identity kernel is the identity") {
  Taped tape;
  Rng rng(7);
  auto x = Tensord({1, 1, 5, 4});
  for (Eigen::Index i = 0; i < x.size(); ++i) x.values()[i] = rng.normal();
  auto kernel = Tensord::from({1, 1, 1, 1}, {1.0});
  auto y = conv2d(tape, x, kernel, {}, {1, 0});
  REQUIRE(y.shape() == Shape{1, 1, 5, 4});
  CHECK((y.values() - x.values()).abs().maxCoeff() == 0.0);
}

TEST_CASE("elementwise-mul broadcasts a channel vector over a map") {
  Taped tape;
  auto vec = Tensord::from({3}, {2, 0, 1});
  auto map = Tensord::ones({3, 2, 2});
  auto y = mul(tape, vec, map);
  REQUIRE(y.shape() == Shape{3, 2, 2});
  for (int i = 0; i < 4; ++i) {
    CHECK(y.values()[i] == 2.0);
    CHECK(y.values()[4 + i] == 0.0);
    CHECK(y.values()[8 + i] == 1.0);
  }
}

TEST_CASE("shape errors name the primitive and the dimensions") {
  Taped tape;
  auto a = Tensord::ones({2, 3});
  auto b = Tensord::ones({2, 4});
  CHECK_THROWS_WITH_AS(add(tape, a, b),
                       doctest::Contains("add"), ShapeError);
  CHECK_THROWS_AS(mul(tape, Tensord::ones({5}), Tensord::ones({3, 2, 2})),
                  ShapeError);
  CHECK_THROWS_AS(linear(tape, Tensord::ones({2, 3}), Tensord::ones({4, 5})),
                  ShapeError);
  CHECK_THROWS_AS(conv2d(tape, Tensord::ones({1, 2, 4, 4}),
                         Tensord::ones({3, 3, 3, 3})),
                  ShapeError);
  CHECK_THROWS_AS(conv2d(tape, Tensord::ones({1, 1, 2, 2}),
                         Tensord::ones({1, 1, 5, 5})),
                  ShapeError);
}

TEST_CASE("cross entropy on uniform logits is ln C") {
  Taped tape;
  const int classes = 13;
  auto logits = Tensord::ones({1, classes});
  auto loss = cross_entropy_loss(tape, logits, {4});
  CHECK(loss.item() == doctest::Approx(std::log(13.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy saturates for a confident correct answer") {
  Taped tape;
  auto logits = Tensord::from({1, 2}, {40.0, -40.0});
  auto loss = cross_entropy_loss(tape, logits, {0});
  CHECK(loss.item() < 1e-12);
}

TEST_CASE("cross entropy matches a direct softmax-log oracle") {
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    const int batch = 1 + static_cast<int>(rng.uniform_int(0, 5));
    const int classes = 2 + static_cast<int>(rng.uniform_int(0, 8));
    Tensord logits({batch, classes});
    std::vector<int> labels;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      logits.values()[i] = rng.uniform(-5.0, 5.0);
    }
    for (int b = 0; b < batch; ++b) {
      labels.push_back(static_cast<int>(rng.uniform_int(0, classes - 1)));
    }
    // Direct, unstabilized oracle.
    double expected = 0.0;
    for (int b = 0; b < batch; ++b) {
      double denom = 0.0;
      for (int c = 0; c < classes; ++c) {
        denom += std::exp(logits.values()[b * classes + c]);
      }
      expected += -std::log(
          std::exp(logits.values()[b * classes + labels[(size_t)b]]) / denom);
    }
    expected /= batch;
    Taped tape;
    auto loss = cross_entropy_loss(tape, logits, labels);
    CHECK(loss.item() == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("cross entropy rejects out-of-range labels") {
  Taped tape;
  auto logits = Tensord::ones({2, 3});
  CHECK_THROWS_AS(cross_entropy_loss(tape, logits, {0, 3}), Error);
  CHECK_THROWS_AS(cross_entropy_loss(tape, logits, {-1, 0}), Error);
}

TEST_CASE("pooling shapes and values") {
  Taped tape;
  auto x = Tensord::from({1, 1, 2, 2}, {1, 2, 3, 4});
  auto avg = avg_pool2d(tape, x, {2, 2});
  CHECK(avg.values()[0] == doctest::Approx(2.5));
  auto mx = max_pool2d(tape, x, {2, 2});
  CHECK(mx.values()[0] == 4.0);
  auto gap = global_avg_pool(tape, x);
  REQUIRE(gap.shape() == Shape{1, 1});
  CHECK(gap.values()[0] == doctest::Approx(2.5));
  auto gmp = global_max_pool(tape, x);
  CHECK(gmp.values()[0] == 4.0);
  auto cap = channel_avg_pool(tape, Tensord::from({1, 2, 1, 2}, {1, 2, 3, 4}));
  REQUIRE(cap.shape() == Shape{1, 1, 1, 2});
  CHECK(cap.values()[0] == 2.0);
  CHECK(cap.values()[1] == 3.0);
  auto cmp = channel_max_pool(tape, Tensord::from({1, 2, 1, 2}, {1, 5, 3, 4}));
  CHECK(cmp.values()[0] == 3.0);
  CHECK(cmp.values()[1] == 5.0);
}

TEST_CASE("concat then slice recovers the operands") {
  Taped tape;
  auto a = Tensord::from({2, 2}, {1, 2, 3, 4});
  auto b = Tensord::from({2, 3}, {5, 6, 7, 8, 9, 10});
  auto y = concat(tape, {a, b}, 1);
  REQUIRE(y.shape() == Shape{2, 5});
  const std::vector<double> expected = {1, 2, 5, 6, 7, 3, 4, 8, 9, 10};
  for (int i = 0; i < 10; ++i) CHECK(y.values()[i] == expected[(size_t)i]);
}

TEST_CASE("algebraic identities: add zero, mul by ones") {
  Rng rng(5);
  Taped tape;
  auto x = Tensord({2, 3, 4, 4});
  for (Eigen::Index i = 0; i < x.size(); ++i) x.values()[i] = rng.normal();
  auto zero = Tensord::zeros({2, 3, 4, 4});
  auto same = add(tape, x, zero);
  CHECK((same.values() - x.values()).abs().maxCoeff() == 0.0);
  auto ones = Tensord::ones({2, 3});
  auto gated = mul(tape, x, ones);
  CHECK((gated.values() - x.values()).abs().maxCoeff() == 0.0);
}

TEST_CASE("batch norm training vs eval") {
  Rng rng(11);
  auto x = Tensord({4, 2, 3, 3});
  for (Eigen::Index i = 0; i < x.size(); ++i) x.values()[i] = rng.normal();
  auto gamma = Tensord::ones({2});
  auto beta = Tensord::zeros({2});
  auto rm = Tensord::zeros({2});
  auto rv = Tensord::ones({2});

  Taped tape;
  auto y = batch_norm(tape, x, gamma, beta, rm, rv, {true, 0.1, 1e-5});
  // Per-channel batch statistics of the output are ~(0, 1).
  const Eigen::Index plane = 9;
  for (int c = 0; c < 2; ++c) {
    double sum = 0.0, sq = 0.0;
    for (int n = 0; n < 4; ++n) {
      auto seg = y.values().segment((n * 2 + c) * plane, plane);
      sum += seg.sum();
      sq += seg.square().sum();
    }
    const double mean = sum / 36.0;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(sq / 36.0 == doctest::Approx(1.0).epsilon(1e-3));
  }
  // Running stats moved away from init.
  CHECK(rm.values().abs().maxCoeff() > 0.0);

  // Eval mode with frozen stats is an affine map, deterministic.
  Taped eval_tape(false);
  auto y1 = batch_norm(eval_tape, x, gamma, beta, rm, rv, {false, 0.1, 1e-5});
  auto y2 = batch_norm(eval_tape, x, gamma, beta, rm, rv, {false, 0.1, 1e-5});
  CHECK((y1.values() - y2.values()).abs().maxCoeff() == 0.0);
}

TEST_CASE("apply_primitive dispatches and rejects bad arity") {
  Taped tape;
  auto x = Tensord::from({3}, {-1, 0, 2});
  auto y = apply_primitive(tape, PrimitiveKind::kRelu, {x});
  CHECK(y.values()[0] == 0.0);
  CHECK_THROWS_AS(apply_primitive(tape, PrimitiveKind::kRelu, {x, x}),
                  ShapeError);
  CHECK_THROWS_AS(
      apply_primitive(tape, static_cast<PrimitiveKind>(999), {x}), Error);
}

TEST_CASE("forward pass is deterministic") {
  Rng rng(3);
  auto x = Tensord({2, 3, 6, 6});
  auto w = Tensord({4, 3, 3, 3});
  for (Eigen::Index i = 0; i < x.size(); ++i) x.values()[i] = rng.normal();
  for (Eigen::Index i = 0; i < w.size(); ++i) w.values()[i] = rng.normal();
  Taped t1(false), t2(false);
  auto y1 = conv2d(t1, x, w, {}, {1, 1});
  auto y2 = conv2d(t2, x, w, {}, {1, 1});
  CHECK((y1.values() - y2.values()).abs().maxCoeff() == 0.0);
}

TEST_CASE("finite forward outputs on finite inputs") {
  Rng rng(17);
  auto x = Tensord({2, 2, 5, 5});
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x.values()[i] = rng.uniform(-50.0, 50.0);
  }
  Taped tape;
  auto s = sigmoid(tape, x);
  auto r = relu(tape, s);
  auto p = avg_pool2d(tape, r, {2, 2});
  CHECK(p.values().isFinite().all());
}
