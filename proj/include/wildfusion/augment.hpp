#pragma once

#include <cstdint>
#include <vector>

#include "wildfusion/image.hpp"
#include "wildfusion/rng.hpp"

namespace wildfusion {

struct AugmentationConfig {
  double hflip_prob = 0.5;
  double rotation_range_degrees = 45.0;  // theta drawn uniform in [-range, range]
  double rotation_prob = 1.0;
  double jitter_limit = 0.1;  // brightness/contrast/hue/saturation, each +-limit
  double jitter_prob = 1.0;
  int cutout_holes = 8;
  Eigen::Index cutout_size = 32;
  double cutout_prob = 1.0;
  std::uint64_t seed = 0;
};

// What a single augment_image call actually did, for verification.
struct AppliedAugmentation {
  bool flipped = false;
  bool rotated = false;
  double rotation_degrees = 0.0;
  bool jittered = false;
  double brightness = 0.0, contrast = 0.0, saturation = 0.0, hue = 0.0;
  bool cutout = false;
  struct Hole {
    Eigen::Index row, col, size;
  };
  std::vector<Hole> holes;
};

Image hflip(const Image& image);

// Rotation about the image center; bilinear sampling, exposed corners
// zero-filled.
Image rotate(const Image& image, double degrees);

Image color_jitter(const Image& image, double brightness, double contrast,
                   double saturation, double hue);

// Flip, rotate, jitter, then cutout, with the probabilities and limits in
// `config`. Deterministic given the rng state.
Image augment_image(const Image& image, const AugmentationConfig& config,
                    Rng& rng, AppliedAugmentation* applied = nullptr);

}  // namespace wildfusion
