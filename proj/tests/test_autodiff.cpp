#include <cmath>

#include "doctest.h"
#include "wildfusion/gradcheck.hpp"
#include "wildfusion/ops.hpp"
#include "wildfusion/primitive.hpp"
#include "wildfusion/rng.hpp"

using namespace wildfusion;

namespace {

Tensord randn(Shape shape, Rng& rng, bool requires_grad = true) {
  Tensord t(std::move(shape), requires_grad);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.values()[i] = rng.normal();
  return t;
}

// Keeps values away from relu/max kinks so the central difference is valid.
Tensord randn_offset(Shape shape, Rng& rng, bool requires_grad = true) {
  Tensord t = randn(std::move(shape), rng, requires_grad);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (std::abs(t.values()[i]) < 0.05) {
      t.values()[i] += t.values()[i] >= 0 ? 0.1 : -0.1;
    }
  }
  return t;
}

// Fixed random projection to a scalar so each output coordinate gets a
// distinct adjoint. Seeded per call site: the graph is re-evaluated for
// every finite-difference probe and must stay the same function.
Tensord project(Taped& tape, const Tensord& y, std::uint64_t seed) {
  Tensord weights(y.shape());
  Rng rng(seed);
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    weights.values()[i] = rng.uniform(0.5, 1.5);
  }
  return sum(tape, mul(tape, y, weights));
}

}  // namespace

TEST_CASE("square function gradient: d(x*x)/dx = 2x") {
  Taped tape;
  auto x = Tensord::from({1}, {3.0}, true);
  auto y = mul(tape, x, x);
  tape.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("backward requires a scalar, connected loss") {
  Taped tape;
  auto x = Tensord::ones({2, 2}, true);
  auto y = relu(tape, x);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
  auto constant = Tensord::scalar(5.0);
  CHECK_THROWS_AS(tape.backward(constant), Error);
}

TEST_CASE("backward visits the tape once") {
  Taped tape;
  auto x = Tensord::from({1}, {2.0}, true);
  auto y = mul(tape, x, x);
  tape.backward(y);
  CHECK_THROWS_AS(tape.backward(y), Error);
}

TEST_CASE("gradients of unused parameters are zero") {
  Taped tape;
  auto x = Tensord::from({1}, {2.0}, true);
  auto unused = Tensord::from({3}, {1, 2, 3}, true);
  auto y = mul(tape, x, x);
  tape.backward(y, {unused});
  REQUIRE(unused.has_grad());
  CHECK(unused.grad().abs().maxCoeff() == 0.0);
}

TEST_CASE("concat adjoint routes slices to the inputs unchanged") {
  Taped tape;
  auto a = Tensord::from({2}, {1, 2}, true);
  auto b = Tensord::from({3}, {3, 4, 5}, true);
  auto y = concat(tape, {a, b}, 0);
  auto w = Tensord::from({5}, {10, 20, 30, 40, 50});
  auto loss = sum(tape, mul(tape, y, w));
  tape.backward(loss);
  CHECK(a.grad()[0] == 10.0);
  CHECK(a.grad()[1] == 20.0);
  CHECK(b.grad()[0] == 30.0);
  CHECK(b.grad()[1] == 40.0);
  CHECK(b.grad()[2] == 50.0);
}

TEST_CASE("finite_difference_check basics") {
  SUBCASE("constant graph has zero error") {
    std::vector<Tensord> point = {Tensord::from({2}, {1.0, 2.0}, true)};
    const double err = finite_difference_check(
        [](Taped&, std::vector<Tensord>&) { return Tensord::scalar(7.0); },
        point);
    CHECK(err == 0.0);
  }
  SUBCASE("sigmoid slope at zero is one quarter") {
    std::vector<Tensord> point = {Tensord::from({1}, {0.0}, true)};
    Taped tape;
    auto y = sigmoid(tape, point[0]);
    tape.backward(y);
    CHECK(point[0].grad()[0] == doctest::Approx(0.25).epsilon(1e-14));
    point[0].zero_grad();
    const double err = finite_difference_check(
        [](Taped& t, std::vector<Tensord>& p) { return sigmoid(t, p[0]); },
        point, 1e-5);
    CHECK(err < 1e-8);
  }
  SUBCASE("non-scalar graph output is rejected") {
    std::vector<Tensord> point = {Tensord::ones({2}, true)};
    CHECK_THROWS_AS(finite_difference_check(
                        [](Taped& t, std::vector<Tensord>& p) {
                          return relu(t, p[0]);
                        },
                        point),
                    ShapeError);
  }
  SUBCASE("epsilon must be positive") {
    std::vector<Tensord> point = {Tensord::ones({1}, true)};
    CHECK_THROWS_AS(finite_difference_check(
                        [](Taped& t, std::vector<Tensord>& p) {
                          return sum(t, p[0]);
                        },
                        point, 0.0),
                    Error);
  }
}

// Every primitive's analytic gradient matches central differences at double
// precision, on randomized small shapes over 20 random seeds.
TEST_CASE("gradient fidelity per primitive on randomized shapes") {
  constexpr double kTol = 1e-4;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const auto dim = [&rng](Eigen::Index lo, Eigen::Index hi) {
      return rng.uniform_int(lo, hi);
    };
    const Eigen::Index batch = dim(1, 3);
    const Eigen::Index channels = dim(1, 4);
    const Eigen::Index side = dim(3, 6);
    const Eigen::Index features = dim(2, 7);
    const Eigen::Index out_features = dim(2, 5);

    {  // linear (+bias)
      std::vector<Tensord> p = {randn({batch, features}, rng),
                                randn({out_features, features}, rng),
                                randn({out_features}, rng)};
      auto graph = [&](Taped& t, std::vector<Tensord>& in) {
        return project(t, linear(t, in[0], in[1], in[2]), seed);
      };
      CHECK(finite_difference_check(graph, p) < kTol);
    }
    {  // conv2d with random kernel/stride/padding (+bias)
      const Eigen::Index kernel = dim(1, 3);
      const Eigen::Index stride = dim(1, 2);
      const Eigen::Index padding = dim(0, 1);
      const Eigen::Index oc = dim(1, 4);
      std::vector<Tensord> p = {randn({batch, channels, side, side}, rng),
                                randn({oc, channels, kernel, kernel}, rng),
                                randn({oc}, rng)};
      auto graph = [&](Taped& t, std::vector<Tensord>& in) {
        return project(t, conv2d(t, in[0], in[1], in[2], {stride, padding}),
                       seed);
      };
      CHECK(finite_difference_check(graph, p) < kTol);
    }
    {  // relu (inputs away from the kink)
      std::vector<Tensord> p = {randn_offset({batch, features}, rng)};
      auto graph = [&](Taped& t, std::vector<Tensord>& in) {
        return project(t, relu(t, in[0]), seed + 1);
      };
      CHECK(finite_difference_check(graph, p) < kTol);
    }
    {  // sigmoid
      std::vector<Tensord> p = {randn({batch, features}, rng)};
      auto graph = [&](Taped& t, std::vector<Tensord>& in) {
        return project(t, sigmoid(t, in[0]), seed + 2);
      };
      CHECK(finite_difference_check(graph, p) < kTol);
    }
    {  // avg-pool / max-pool with random kernel and stride
      const Eigen::Index kernel = dim(1, side > 3 ? 3 : side);
      const Eigen::Index stride = dim(1, 2);
      std::vector<Tensord> p = {randn({batch, channels, side, side}, rng)};
      auto graph = [&](Taped& t, std::vector<Tensord>& in) {
        return project(t, avg_pool2d(t, in[0], {kernel, stride}), seed + 3);
      };
      CHECK(finite_difference_check(graph, p) < kTol);
      auto graph_max = [&](Taped& t, std::vector<Tensord>& in) {
        return project(t, max_pool2d(t, in[0], {kernel, stride}), seed + 4);
      };
      CHECK(finite_difference_check(graph_max, p) < kTol);
    }
    {  // global and channel pools
      std::vector<Tensord> p = {randn({batch, channels, side, side}, rng)};
      auto graph_gap = [&](Taped& t, std::vector<Tensord>& in) {
        return project(t, global_avg_pool(t, in[0]), seed + 5);
      };
      CHECK(finite_difference_check(graph_gap, p) < kTol);
      auto graph_gmp = [&](Taped& t, std::vector<Tensord>& in) {
        return project(t, global_max_pool(t, in[0]), seed + 6);
      };
      CHECK(finite_difference_check(graph_gmp, p) < kTol);
      auto graph_cap = [&](Taped& t, std::vector<Tensord>& in) {
        return project(t, channel_avg_pool(t, in[0]), seed + 7);
      };
      CHECK(finite_difference_check(graph_cap, p) < kTol);
      auto graph_cmp = [&](Taped& t, std::vector<Tensord>& in) {
        return project(t, channel_max_pool(t, in[0]), seed + 8);
      };
      CHECK(finite_difference_check(graph_cmp, p) < kTol);
    }
    {  // elementwise-mul, same shape and all broadcast modes
      auto graph_mul = [&](Taped& t, std::vector<Tensord>& in) {
        return project(t, mul(t, in[0], in[1]), seed + 9);
      };
      std::vector<Tensord> same = {randn({batch, channels, side}, rng),
                                   randn({batch, channels, side}, rng)};
      CHECK(finite_difference_check(graph_mul, same) < kTol);
      std::vector<Tensord> chan = {randn({channels}, rng),
                                   randn({channels, side, side}, rng)};
      CHECK(finite_difference_check(graph_mul, chan) < kTol);
      std::vector<Tensord> bc = {randn({batch, channels}, rng),
                                 randn({batch, channels, side, side}, rng)};
      CHECK(finite_difference_check(graph_mul, bc) < kTol);
      std::vector<Tensord> sp = {randn({batch, 1, side, side}, rng),
                                 randn({batch, channels, side, side}, rng)};
      CHECK(finite_difference_check(graph_mul, sp) < kTol);
    }
    {  // concat + add + reshape
      const Eigen::Index extra = dim(1, 4);
      std::vector<Tensord> p = {randn({batch, features}, rng),
                                randn({batch, extra}, rng),
                                randn({batch, features + extra}, rng)};
      auto graph = [&](Taped& t, std::vector<Tensord>& in) {
        auto joined = concat(t, {in[0], in[1]}, 1);
        auto summed = add(t, joined, in[2]);
        auto flat = reshape(t, summed, {batch * (features + extra)});
        return project(t, flat, seed + 10);
      };
      CHECK(finite_difference_check(graph, p) < kTol);
    }
    {  // batch-norm, training and eval modes
      std::vector<Tensord> p = {randn({batch + 1, channels, side, side}, rng),
                                randn({channels}, rng),
                                randn({channels}, rng)};
      for (const bool training : {true, false}) {
        auto graph = [&](Taped& t, std::vector<Tensord>& in) {
          Tensord rm = Tensord::zeros({channels});
          Tensord rv = Tensord::ones({channels});
          return project(t,
                         batch_norm(t, in[0], in[1], in[2], rm, rv,
                                    {training, 0.1, 1e-5}),
                         seed + 11 + (training ? 1 : 0));
        };
        CHECK(finite_difference_check(graph, p) < kTol);
      }
    }
    {  // cross entropy through a linear-relu chain
      std::vector<Tensord> p = {randn_offset({batch, features}, rng),
                                randn({out_features, features}, rng),
                                randn({out_features}, rng),
                                randn({3, out_features}, rng)};
      std::vector<int> labels;
      for (Eigen::Index b = 0; b < batch; ++b) {
        labels.push_back(static_cast<int>(rng.uniform_int(0, 2)));
      }
      auto graph = [&](Taped& t, std::vector<Tensord>& in) {
        auto h = relu(t, linear(t, in[0], in[1], in[2]));
        auto logits = linear(t, h, in[3]);
        return cross_entropy_loss(t, logits, labels);
      };
      CHECK(finite_difference_check(graph, p) < kTol);
    }
    {  // sum
      std::vector<Tensord> p = {randn({features, out_features}, rng)};
      auto graph = [&](Taped& t, std::vector<Tensord>& in) {
        return sum(t, in[0]);
      };
      CHECK(finite_difference_check(graph, p) < kTol);
    }
  }
}

TEST_CASE("linear layer finite-difference example") {
  Rng rng(42);
  std::vector<Tensord> p = {randn({4, 3}, rng), randn({2, 3}, rng),
                            randn({2}, rng)};
  auto graph = [&](Taped& t, std::vector<Tensord>& in) {
    return sum(t, linear(t, in[0], in[1], in[2]));
  };
  CHECK(finite_difference_check(graph, p, 1e-5) < 1e-4);
}
