#include "wildfusion/augment.hpp"

#include <algorithm>
#include <cmath>

#include "wildfusion/errors.hpp"

namespace wildfusion {

namespace {

constexpr double kPi = 3.14159265358979323846;

void rgb_to_hsv(double r, double g, double b, double& h, double& s,
                double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0.0;
  if (d <= 0) {
    h = 0.0;
    return;
  }
  if (mx == r) {
    h = std::fmod((g - b) / d, 6.0);
  } else if (mx == g) {
    h = (b - r) / d + 2.0;
  } else {
    h = (r - g) / d + 4.0;
  }
  h /= 6.0;
  if (h < 0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g,
                double& b) {
  const double hh = std::fmod(h < 0 ? h + 1.0 : h, 1.0) * 6.0;
  const int i = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace

Image hflip(const Image& image) {
  Image out(image.height(), image.width());
  for (std::size_t k = 0; k < 3; ++k) {
    out.ch[k] = image.ch[k].rowwise().reverse();
  }
  return out;
}

Image rotate(const Image& image, double degrees) {
  if (degrees == 0.0) return image;
  const double rad = degrees * kPi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const Eigen::Index h = image.height(), w = image.width();
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  Image out(h, w);
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      // Inverse mapping: sample the source at the back-rotated position.
      const double dy = static_cast<double>(r) - cy;
      const double dx = static_cast<double>(c) - cx;
      const double sy = cy + cs * dy - sn * dx;
      const double sx = cx + sn * dy + cs * dx;
      if (sy < 0 || sy > static_cast<double>(h - 1) || sx < 0 ||
          sx > static_cast<double>(w - 1)) {
        continue;  // exposed corner, stays zero
      }
      const auto y0 = static_cast<Eigen::Index>(sy);
      const auto x0 = static_cast<Eigen::Index>(sx);
      const Eigen::Index y1 = std::min(y0 + 1, h - 1);
      const Eigen::Index x1 = std::min(x0 + 1, w - 1);
      const double wy = sy - static_cast<double>(y0);
      const double wx = sx - static_cast<double>(x0);
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& src = image.ch[k];
        out.ch[k](r, c) =
            (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
            wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
      }
    }
  }
  return out;
}

Image color_jitter(const Image& image, double brightness, double contrast,
                   double saturation, double hue) {
  Image out(image.height(), image.width());
  const double mean =
      (image.ch[0].mean() + image.ch[1].mean() + image.ch[2].mean()) / 3.0;
  for (Eigen::Index r = 0; r < image.height(); ++r) {
    for (Eigen::Index c = 0; c < image.width(); ++c) {
      double rr = image.ch[0](r, c), gg = image.ch[1](r, c),
             bb = image.ch[2](r, c);
      // Brightness and contrast as multiplicative factors around 1.
      rr = (rr - mean) * (1.0 + contrast) + mean;
      gg = (gg - mean) * (1.0 + contrast) + mean;
      bb = (bb - mean) * (1.0 + contrast) + mean;
      rr *= 1.0 + brightness;
      gg *= 1.0 + brightness;
      bb *= 1.0 + brightness;
      if (saturation != 0.0 || hue != 0.0) {
        double h, s, v;
        rgb_to_hsv(std::clamp(rr, 0.0, 1.0), std::clamp(gg, 0.0, 1.0),
                   std::clamp(bb, 0.0, 1.0), h, s, v);
        s = std::clamp(s * (1.0 + saturation), 0.0, 1.0);
        h += hue;  // hue shift in [0,1) turns, wraps
        hsv_to_rgb(h, s, v, rr, gg, bb);
      }
      out.ch[0](r, c) = std::clamp(rr, 0.0, 1.0);
      out.ch[1](r, c) = std::clamp(gg, 0.0, 1.0);
      out.ch[2](r, c) = std::clamp(bb, 0.0, 1.0);
    }
  }
  return out;
}

Image augment_image(const Image& image, const AugmentationConfig& config,
                    Rng& rng, AppliedAugmentation* applied) {
  if (config.cutout_prob > 0 && (image.height() < config.cutout_size ||
                                 image.width() < config.cutout_size)) {
    throw DataError("augment_image: image " + std::to_string(image.height()) +
                    "x" + std::to_string(image.width()) +
                    " smaller than cutout hole " +
                    std::to_string(config.cutout_size));
  }
  AppliedAugmentation record;
  Image out = image;

  if (rng.bernoulli(config.hflip_prob)) {
    out = hflip(out);
    record.flipped = true;
  }
  if (rng.bernoulli(config.rotation_prob)) {
    record.rotation_degrees = rng.uniform(-config.rotation_range_degrees,
                                          config.rotation_range_degrees);
    record.rotated = true;
    out = rotate(out, record.rotation_degrees);
  }
  if (rng.bernoulli(config.jitter_prob)) {
    record.jittered = true;
    record.brightness = rng.uniform(-config.jitter_limit, config.jitter_limit);
    record.contrast = rng.uniform(-config.jitter_limit, config.jitter_limit);
    record.saturation = rng.uniform(-config.jitter_limit, config.jitter_limit);
    record.hue = rng.uniform(-config.jitter_limit, config.jitter_limit);
    out = color_jitter(out, record.brightness, record.contrast,
                       record.saturation, record.hue);
  }
  if (rng.bernoulli(config.cutout_prob)) {
    record.cutout = true;
    for (int hole = 0; hole < config.cutout_holes; ++hole) {
      const Eigen::Index r =
          rng.uniform_int(0, out.height() - config.cutout_size);
      const Eigen::Index c =
          rng.uniform_int(0, out.width() - config.cutout_size);
      for (std::size_t k = 0; k < 3; ++k) {
        out.ch[k].block(r, c, config.cutout_size, config.cutout_size)
            .setZero();
      }
      record.holes.push_back({r, c, config.cutout_size});
    }
  }
  if (applied) *applied = record;
  return out;
}

}  // namespace wildfusion
