#pragma once

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <string>

namespace wildfusion {

// RGB raster with channel values in [0,1]; each channel is H rows x W cols.
struct Image {
  std::array<Eigen::ArrayXXd, 3> ch;

  Image() = default;
  Image(Eigen::Index height, Eigen::Index width) {
    for (auto& c : ch) c.setZero(height, width);
  }

  Eigen::Index height() const { return ch[0].rows(); }
  Eigen::Index width() const { return ch[0].cols(); }
};

// Binary PPM (P6, 8-bit) and PGM (P5, replicated to three channels).
Image load_ppm(const std::filesystem::path& path);
void save_ppm(const std::filesystem::path& path, const Image& image);

Image resize_bilinear(const Image& image, Eigen::Index out_h,
                      Eigen::Index out_w);

// Removes the information bands: `top` rows from the top and `bottom` rows
// from the bottom.
Image crop_bands(const Image& image, Eigen::Index top, Eigen::Index bottom);

// Crop the configured bands, then resize to target_side x target_side.
Image preprocess_image(const Image& image, Eigen::Index band_top,
                       Eigen::Index band_bottom, Eigen::Index target_side);

}  // namespace wildfusion
