#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wildfusion/datetime.hpp"
#include "wildfusion/metadata.hpp"

namespace wildfusion {

// One camera-trap observation.
struct SampleRecord {
  std::string image_path;
  int species_id = 0;
  int location_id = 0;
  double latitude = 0.0;
  double longitude = 0.0;
  DateTime timestamp;
  std::optional<double> temperature_celsius;
  Eigen::Matrix<double, kSceneAttributeDim, 1> scene_attributes;
  Eigen::Matrix<double, kSceneDescriptorDim, 1> scene_descriptors;

  RawMetadata raw_metadata() const {
    return {timestamp, temperature_celsius, latitude, longitude,
            scene_attributes, scene_descriptors};
  }
};

// Line-delimited JSON manifest: a header object on the first line (format,
// version, optional scene normalization stats), then one record per line.
struct Manifest {
  std::vector<SampleRecord> records;
  SceneNormalization stats = SceneNormalization::identity();
  bool stats_from_file = false;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Dataset-wide per-dimension min/max over the scene vectors.
SceneNormalization compute_scene_stats(const std::vector<SampleRecord>& records);

}  // namespace wildfusion
