#include <fstream>

#include "doctest.h"
#include "wildfusion/errors.hpp"
#include "support/synthetic.hpp"
#include "wildfusion/augment.hpp"
#include "wildfusion/image.hpp"

using namespace wildfusion;

namespace {

Image random_image(Eigen::Index side, Rng& rng) {
  Image img(side, side);
  for (auto& c : img.ch) {
    for (Eigen::Index r = 0; r < side; ++r) {
      for (Eigen::Index j = 0; j < side; ++j) c(r, j) = rng.uniform();
    }
  }
  return img;
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    m = std::max(m, (a.ch[k] - b.ch[k]).abs().maxCoeff());
  }
  return m;
}

}  // namespace

TEST_CASE("horizontal flip is an involution") {
  Rng rng(1);
  const Image img = random_image(40, rng);
  CHECK(max_abs_diff(hflip(hflip(img)), img) == 0.0);
}

TEST_CASE("identity configuration leaves the image unchanged") {
  Rng rng(2);
  const Image img = random_image(40, rng);
  AugmentationConfig config;
  config.hflip_prob = 0.0;
  config.rotation_prob = 0.0;
  config.jitter_prob = 0.0;
  config.cutout_prob = 0.0;
  Rng stream(3);
  const Image out = augment_image(img, config, stream);
  CHECK(max_abs_diff(out, img) == 0.0);
}

TEST_CASE("rotation by zero degrees is the identity") {
  Rng rng(4);
  const Image img = random_image(24, rng);
  CHECK(max_abs_diff(rotate(img, 0.0), img) == 0.0);
}

TEST_CASE("cutout zero-fills exactly the holes") {
  Rng rng(5);
  Image img = random_image(64, rng);
  // Ensure no pixel is already zero so the complement check is meaningful.
  for (auto& c : img.ch) c = c * 0.9 + 0.1;

  AugmentationConfig config;
  config.hflip_prob = 0.0;
  config.rotation_prob = 0.0;
  config.jitter_prob = 0.0;
  config.cutout_prob = 1.0;
  config.cutout_holes = 8;
  config.cutout_size = 32;
  Rng stream(6);
  AppliedAugmentation applied;
  const Image out = augment_image(img, config, stream, &applied);

  REQUIRE(applied.cutout);
  REQUIRE(applied.holes.size() == 8);
  Eigen::ArrayXXd in_hole = Eigen::ArrayXXd::Zero(64, 64);
  for (const auto& hole : applied.holes) {
    CHECK(hole.size == 32);
    CHECK(hole.row >= 0);
    CHECK(hole.col >= 0);
    CHECK(hole.row + hole.size <= 64);
    CHECK(hole.col + hole.size <= 64);
    in_hole.block(hole.row, hole.col, hole.size, hole.size).setOnes();
  }
  for (Eigen::Index r = 0; r < 64; ++r) {
    for (Eigen::Index c = 0; c < 64; ++c) {
      for (std::size_t k = 0; k < 3; ++k) {
        if (in_hole(r, c) > 0) {
          CHECK(out.ch[k](r, c) == 0.0);
        } else {
          CHECK(out.ch[k](r, c) == img.ch[k](r, c));
        }
      }
    }
  }
}

TEST_CASE("image smaller than the cutout hole is an error") {
  Rng rng(7);
  const Image img = random_image(16, rng);
  AugmentationConfig config;  // default 32x32 holes
  Rng stream(8);
  CHECK_THROWS_AS(augment_image(img, config, stream), DataError);
}

TEST_CASE("flip rate and rotation bounds over many draws") {
  Rng rng(9);
  const Image img = random_image(40, rng);
  AugmentationConfig config;
  config.cutout_size = 8;  // fits the small test image
  int flips = 0;
  Rng stream(10);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    AppliedAugmentation applied;
    (void)augment_image(img, config, stream, &applied);
    flips += applied.flipped ? 1 : 0;
    REQUIRE(applied.rotated);
    CHECK(applied.rotation_degrees >= -45.0);
    CHECK(applied.rotation_degrees <= 45.0);
    CHECK(std::abs(applied.brightness) <= 0.1);
    CHECK(std::abs(applied.contrast) <= 0.1);
    CHECK(std::abs(applied.saturation) <= 0.1);
    CHECK(std::abs(applied.hue) <= 0.1);
  }
  const double rate = static_cast<double>(flips) / draws;
  CHECK(rate == doctest::Approx(0.5).epsilon(0.04));  // 0.5 +- 0.02
}

TEST_CASE("augmentation preserves dimensions and is seed-deterministic") {
  Rng rng(11);
  const Image img = random_image(48, rng);
  AugmentationConfig config;
  config.cutout_size = 16;
  Rng s1(42), s2(42);
  const Image a = augment_image(img, config, s1);
  const Image b = augment_image(img, config, s2);
  CHECK(a.height() == img.height());
  CHECK(a.width() == img.width());
  CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("undecodable images are rejected") {
  testsupport::TempDir dir("ppm_bad");
  const auto path = dir.path() / "not_an_image.ppm";
  std::ofstream(path) << "JFIF nonsense";
  CHECK_THROWS_AS(load_ppm(path), DataError);
  CHECK_THROWS_AS(load_ppm(dir.path() / "missing.ppm"), DataError);

  const auto truncated = dir.path() / "truncated.ppm";
  std::ofstream(truncated) << "P6\n4 4\n255\nxx";
  CHECK_THROWS_AS(load_ppm(truncated), DataError);
}

TEST_CASE("ppm round trip") {
  testsupport::TempDir dir("ppm");
  Rng rng(12);
  Image img = random_image(20, rng);
  // Quantize to the 8-bit grid so the round trip is exact.
  for (auto& c : img.ch) {
    c = (c * 255.0).round() / 255.0;
  }
  const auto path = dir.path() / "test.ppm";
  save_ppm(path, img);
  const Image back = load_ppm(path);
  REQUIRE(back.height() == img.height());
  REQUIRE(back.width() == img.width());
  CHECK(max_abs_diff(back, img) < 1e-9);
}

TEST_CASE("preprocess crops bands then resizes") {
  Rng rng(13);
  Image img = random_image(100, rng);
  const Image out = preprocess_image(img, 10, 10, 32);
  CHECK(out.height() == 32);
  CHECK(out.width() == 32);

  // Band height 0 on an already-conformant image is the identity.
  const Image square = random_image(32, rng);
  const Image same = preprocess_image(square, 0, 0, 32);
  CHECK(max_abs_diff(same, square) == 0.0);

  // Output side matches the target whatever the input aspect ratio.
  Image wide(54, 96);
  for (auto& c : wide.ch) c.setRandom();
  const Image squared = preprocess_image(wide, 3, 3, 32);
  CHECK(squared.height() == 32);
  CHECK(squared.width() == 32);

  CHECK_THROWS_AS(preprocess_image(img, 60, 60, 32), DataError);
}
