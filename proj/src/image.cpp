#include "wildfusion/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "wildfusion/errors.hpp"

namespace wildfusion {

namespace {

int read_pnm_token(std::istream& in) {
  // Skips whitespace and '#' comments.
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = 0;
  in >> value;
  return in ? value : -1;
}

}  // namespace

Image load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image '" + path.string() + "'");
  std::string magic;
  in >> magic;
  if (magic != "P6" && magic != "P5") {
    throw DataError("image '" + path.string() +
                    "': unsupported format (want binary PPM/PGM)");
  }
  const int w = read_pnm_token(in);
  const int h = read_pnm_token(in);
  const int maxval = read_pnm_token(in);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw DataError("image '" + path.string() + "': bad header");
  }
  in.get();  // single whitespace after maxval

  const int channels = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) *
                                 static_cast<std::size_t>(h) *
                                 static_cast<std::size_t>(channels));
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw DataError("image '" + path.string() + "': truncated payload");
  }

  Image img(h, w);
  const double scale = 1.0 / maxval;
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      const std::size_t base =
          (static_cast<std::size_t>(r) * static_cast<std::size_t>(w) +
           static_cast<std::size_t>(c)) *
          static_cast<std::size_t>(channels);
      if (channels == 3) {
        img.ch[0](r, c) = raw[base + 0] * scale;
        img.ch[1](r, c) = raw[base + 1] * scale;
        img.ch[2](r, c) = raw[base + 2] * scale;
      } else {
        const double v = raw[base] * scale;
        img.ch[0](r, c) = img.ch[1](r, c) = img.ch[2](r, c) = v;
      }
    }
  }
  return img;
}

void save_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image '" + path.string() + "'");
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> raw;
  raw.reserve(static_cast<std::size_t>(image.width() * image.height() * 3));
  for (Eigen::Index r = 0; r < image.height(); ++r) {
    for (Eigen::Index c = 0; c < image.width(); ++c) {
      for (int k = 0; k < 3; ++k) {
        const double v = std::clamp(image.ch[static_cast<std::size_t>(k)](r, c),
                                    0.0, 1.0);
        raw.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
}

Image resize_bilinear(const Image& image, Eigen::Index out_h,
                      Eigen::Index out_w) {
  if (out_h < 1 || out_w < 1) {
    throw DataError("resize_bilinear: non-positive target size");
  }
  const Eigen::Index h = image.height(), w = image.width();
  if (h == out_h && w == out_w) return image;
  Image out(out_h, out_w);
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (Eigen::Index r = 0; r < out_h; ++r) {
    // Pixel-center alignment.
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(h - 1));
    const auto y0 = static_cast<Eigen::Index>(fy);
    const Eigen::Index y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (Eigen::Index c = 0; c < out_w; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(w - 1));
      const auto x0 = static_cast<Eigen::Index>(fx);
      const Eigen::Index x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& src = image.ch[k];
        out.ch[k](r, c) = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                          wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
      }
    }
  }
  return out;
}

Image crop_bands(const Image& image, Eigen::Index top, Eigen::Index bottom) {
  if (top < 0 || bottom < 0) {
    throw DataError("crop_bands: negative band height");
  }
  const Eigen::Index remaining = image.height() - top - bottom;
  if (remaining < 1) {
    throw DataError("crop_bands: image height " +
                    std::to_string(image.height()) +
                    " shorter than bands " + std::to_string(top) + "+" +
                    std::to_string(bottom));
  }
  if (top == 0 && bottom == 0) return image;
  Image out(remaining, image.width());
  for (std::size_t k = 0; k < 3; ++k) {
    out.ch[k] = image.ch[k].middleRows(top, remaining);
  }
  return out;
}

Image preprocess_image(const Image& image, Eigen::Index band_top,
                       Eigen::Index band_bottom, Eigen::Index target_side) {
  return resize_bilinear(crop_bands(image, band_top, band_bottom), target_side,
                         target_side);
}

}  // namespace wildfusion
