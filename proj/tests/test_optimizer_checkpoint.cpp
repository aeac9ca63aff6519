#include <cstring>
#include <fstream>

#include "doctest.h"
#include "support/synthetic.hpp"
#include "wildfusion/checkpoint.hpp"
#include "wildfusion/model.hpp"
#include "wildfusion/ops.hpp"
#include "wildfusion/optimizer.hpp"

using namespace wildfusion;

TEST_CASE("sgd update rule") {
  auto w = Tensord::from({1}, {1.0}, true);
  w.accumulate_grad(Eigen::ArrayXd::Constant(1, 0.5));
  std::vector<Tensord> params = {w};
  OptimizerState state{0.1, 7, 0.1, 0};
  sgd_step(params, state);
  CHECK(w.values()[0] == doctest::Approx(0.95).epsilon(1e-15));
  CHECK_FALSE(w.has_grad());  // grads cleared
}

TEST_CASE("zero gradient leaves the parameter unchanged") {
  auto w = Tensord::from({3}, {1, 2, 3}, true);
  w.grad_or_zeros();
  std::vector<Tensord> params = {w};
  sgd_step(params, OptimizerState{});
  CHECK(w.values()[0] == 1.0);
  CHECK(w.values()[1] == 2.0);
  CHECK(w.values()[2] == 3.0);
}

TEST_CASE("missing gradient is an error") {
  auto w = Tensord::from({1}, {1.0}, true);
  std::vector<Tensord> params = {w};
  CHECK_THROWS_AS(sgd_step(params, OptimizerState{}), Error);
}

TEST_CASE("step schedule: order of magnitude every seven epochs") {
  OptimizerState state;  // base 1e-3, period 7, factor 0.1
  state.current_epoch = 0;
  CHECK(state.effective_lr() == doctest::Approx(1e-3).epsilon(1e-15));
  state.current_epoch = 6;
  CHECK(state.effective_lr() == doctest::Approx(1e-3).epsilon(1e-15));
  state.current_epoch = 7;
  CHECK(state.effective_lr() == doctest::Approx(1e-4).epsilon(1e-12));
  state.current_epoch = 14;
  CHECK(state.effective_lr() == doctest::Approx(1e-5).epsilon(1e-12));
}

TEST_CASE("effective lr is non-increasing and strictly positive") {
  OptimizerState state;
  double prev = state.base_lr;
  for (int epoch = 0; epoch < 60; ++epoch) {
    state.current_epoch = epoch;
    const double lr = state.effective_lr();
    CHECK(lr > 0.0);
    CHECK(lr <= prev);
    CHECK(lr == doctest::Approx(1e-3 * std::pow(0.1, epoch / 7))
                    .epsilon(1e-12));
    prev = lr;
  }
}

TEST_CASE("optimizer state validation") {
  CHECK_THROWS_AS((OptimizerState{-1.0, 7, 0.1, 0}.effective_lr()), Error);
  CHECK_THROWS_AS((OptimizerState{1e-3, 0, 0.1, 0}.effective_lr()), Error);
  CHECK_THROWS_AS((OptimizerState{1e-3, 7, 1.5, 0}.effective_lr()), Error);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  testsupport::TempDir dir("ckpt");
  Rng rng(21);
  Checkpoint out;
  out.config_digest = "00ff00ff00ff00ff";
  for (int i = 0; i < 3; ++i) {
    Tensord t({2 + i, 3});
    for (Eigen::Index j = 0; j < t.size(); ++j) {
      t.values()[j] = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
    }
    out.tensors.push_back(to_entry("tensor_" + std::to_string(i), t));
  }
  Tensorf f({4});
  for (Eigen::Index j = 0; j < f.size(); ++j) {
    f.values()[j] = static_cast<float>(rng.normal());
  }
  out.tensors.push_back(to_entry("single_precision", f));

  const auto path = dir.path() / "model.ckpt";
  save_checkpoint(path, out);
  const Checkpoint in = load_checkpoint(path);

  CHECK(in.config_digest == out.config_digest);
  REQUIRE(in.tensors.size() == out.tensors.size());
  for (std::size_t i = 0; i < in.tensors.size(); ++i) {
    CHECK(in.tensors[i].name == out.tensors[i].name);
    CHECK(in.tensors[i].dtype == out.tensors[i].dtype);
    CHECK(in.tensors[i].shape == out.tensors[i].shape);
    REQUIRE(in.tensors[i].bytes.size() == out.tensors[i].bytes.size());
    CHECK(std::memcmp(in.tensors[i].bytes.data(), out.tensors[i].bytes.data(),
                      in.tensors[i].bytes.size()) == 0);
  }
}

TEST_CASE("checkpoint model state round trip") {
  testsupport::TempDir dir("ckpt_model");
  FusionModelConfig config;
  config.fusion_mode = FusionMode::kMetadataOnly;
  config.metadata_dim = 10;
  config.num_classes = 3;
  config.mlp_hidden = {8, 4};
  auto model = FusionModel<double>::build(config, 77);

  Checkpoint ckpt;
  ckpt.config_digest = config.digest();
  for (const auto& [name, tensor] : model.named_state()) {
    ckpt.tensors.push_back(to_entry(name, tensor));
  }
  const auto path = dir.path() / "meta.ckpt";
  save_checkpoint(path, ckpt);

  auto reloaded = FusionModel<double>::build(config, 999);  // different init
  reloaded.load_state(load_checkpoint(path).tensors);

  Tensord meta = Tensord::ones({2, 10});
  Taped tape(false);
  auto a = model.forward(tape, nullptr, &meta);
  auto b = reloaded.forward(tape, nullptr, &meta);
  CHECK((a.values() - b.values()).abs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint rejects corrupt headers") {
  testsupport::TempDir dir("ckpt_bad");
  const auto path = dir.path() / "bad.ckpt";
  {
    std::ofstream out(path);
    out << "not-a-checkpoint v1\n";
  }
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
}
