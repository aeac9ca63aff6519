#pragma once

#include <Eigen/Core>

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wildfusion/datetime.hpp"

namespace wildfusion {

// Fixed layout of the encoded metadata vector:
//   [0,67)    datetime one-hot (12 month + 31 day + 24 hour)
//   [67,69)   temperature (validity flag, normalized value)
//   [69,71)   position (normalized latitude, longitude)
//   [71,173)  scene attributes
//   [173,538) scene descriptors
inline constexpr int kDatetimeDim = 67;
inline constexpr int kTemperatureDim = 2;
inline constexpr int kPositionDim = 2;
inline constexpr int kSceneAttributeDim = 102;
inline constexpr int kSceneDescriptorDim = 365;
inline constexpr int kMetadataDim = kDatetimeDim + kTemperatureDim +
                                    kPositionDim + kSceneAttributeDim +
                                    kSceneDescriptorDim;

inline constexpr int kDatetimeOffset = 0;
inline constexpr int kTemperatureOffset = 67;
inline constexpr int kPositionOffset = 69;
inline constexpr int kSceneAttributeOffset = 71;
inline constexpr int kSceneDescriptorOffset = 173;

// Normalization ranges. Temperature covers Norwegian climate extremes
// symmetrically; position covers the Norwegian mainland.
inline constexpr double kTemperatureMinC = -40.0;
inline constexpr double kTemperatureMaxC = 40.0;
inline constexpr double kLatitudeMin = 58.0;
inline constexpr double kLatitudeMax = 71.0;
inline constexpr double kLongitudeMin = 4.0;
inline constexpr double kLongitudeMax = 30.0;

struct RawMetadata {
  DateTime timestamp;
  std::optional<double> temperature_celsius;
  double latitude = 0.0;
  double longitude = 0.0;
  Eigen::Matrix<double, kSceneAttributeDim, 1> scene_attributes;
  Eigen::Matrix<double, kSceneDescriptorDim, 1> scene_descriptors;
};

// Dataset-wide per-dimension min/max for the scene vectors, computed at
// ingestion and stored with the manifest.
struct SceneNormalization {
  Eigen::Matrix<double, kSceneAttributeDim, 1> attr_min, attr_max;
  Eigen::Matrix<double, kSceneDescriptorDim, 1> desc_min, desc_max;

  // Degenerate pass-through stats ([0,1] range assumed).
  static SceneNormalization identity();
};

struct MetadataVector {
  Eigen::Matrix<double, kMetadataDim, 1> values;

  auto datetime() const { return values.segment<kDatetimeDim>(kDatetimeOffset); }
  auto temperature() const {
    return values.segment<kTemperatureDim>(kTemperatureOffset);
  }
  auto position() const { return values.segment<kPositionDim>(kPositionOffset); }
  auto scene_attributes() const {
    return values.segment<kSceneAttributeDim>(kSceneAttributeOffset);
  }
  auto scene_descriptors() const {
    return values.segment<kSceneDescriptorDim>(kSceneDescriptorOffset);
  }
};

// Metadata feature groups for the ablation study. PositionTemperature is the
// merged "pos temp" group of the four-way split; the five-way split keeps
// Position and Temperature separate.
enum class FeatureGroup {
  kDatetime,
  kTemperature,
  kPosition,
  kPositionTemperature,
  kSceneAttributes,
  kSceneDescriptors,
};

using FeatureGroupSet = std::set<FeatureGroup>;

const char* feature_group_name(FeatureGroup g);
FeatureGroup feature_group_from_name(const std::string& name);
int feature_group_width(FeatureGroup g);

// Canonical group universes.
std::vector<FeatureGroup> four_way_groups();   // DT, PT, SA, PL
std::vector<FeatureGroup> five_way_groups();   // DT, T, P, SA, PL

// One-hot over 12 months + 31 days + 24 hours; always sums to 3.
Eigen::Matrix<double, kDatetimeDim, 1> encode_datetime(const DateTime& ts);

// (validity, min-max normalized value); (0,0) when the reading is absent.
Eigen::Vector2d encode_temperature(std::optional<double> celsius);

// Min-max normalization against the Norwegian coordinate ranges, clamped.
Eigen::Vector2d encode_position(double latitude, double longitude);

MetadataVector assemble_metadata(const RawMetadata& raw,
                                 const SceneNormalization& stats);

// Concatenation of the selected group slices in layout order.
Eigen::VectorXd select_feature_groups(const MetadataVector& vec,
                                      const FeatureGroupSet& groups);

}  // namespace wildfusion
