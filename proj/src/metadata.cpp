#include "wildfusion/metadata.hpp"

#include <algorithm>
#include <cmath>

#include "wildfusion/errors.hpp"

namespace wildfusion {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double minmax(double v, double lo, double hi) {
  return clamp01((v - lo) / (hi - lo));
}

}  // namespace

SceneNormalization SceneNormalization::identity() {
  SceneNormalization s;
  s.attr_min.setZero();
  s.attr_max.setOnes();
  s.desc_min.setZero();
  s.desc_max.setOnes();
  return s;
}

const char* feature_group_name(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::kDatetime: return "datetime";
    case FeatureGroup::kTemperature: return "temperature";
    case FeatureGroup::kPosition: return "position";
    case FeatureGroup::kPositionTemperature: return "pos_temp";
    case FeatureGroup::kSceneAttributes: return "scene_attributes";
    case FeatureGroup::kSceneDescriptors: return "places";
  }
  return "unknown";
}

FeatureGroup feature_group_from_name(const std::string& name) {
  if (name == "datetime") return FeatureGroup::kDatetime;
  if (name == "temperature") return FeatureGroup::kTemperature;
  if (name == "position") return FeatureGroup::kPosition;
  if (name == "pos_temp") return FeatureGroup::kPositionTemperature;
  if (name == "scene_attributes") return FeatureGroup::kSceneAttributes;
  if (name == "places" || name == "scene_descriptors")
    return FeatureGroup::kSceneDescriptors;
  throw DataError("unknown feature group '" + name + "'");
}

int feature_group_width(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::kDatetime: return kDatetimeDim;
    case FeatureGroup::kTemperature: return kTemperatureDim;
    case FeatureGroup::kPosition: return kPositionDim;
    case FeatureGroup::kPositionTemperature:
      return kTemperatureDim + kPositionDim;
    case FeatureGroup::kSceneAttributes: return kSceneAttributeDim;
    case FeatureGroup::kSceneDescriptors: return kSceneDescriptorDim;
  }
  return 0;
}

std::vector<FeatureGroup> four_way_groups() {
  return {FeatureGroup::kDatetime, FeatureGroup::kPositionTemperature,
          FeatureGroup::kSceneAttributes, FeatureGroup::kSceneDescriptors};
}

std::vector<FeatureGroup> five_way_groups() {
  return {FeatureGroup::kDatetime, FeatureGroup::kTemperature,
          FeatureGroup::kPosition, FeatureGroup::kSceneAttributes,
          FeatureGroup::kSceneDescriptors};
}

Eigen::Matrix<double, kDatetimeDim, 1> encode_datetime(const DateTime& ts) {
  if (ts.month < 1 || ts.month > 12) {
    throw DataError("encode_datetime: month " + std::to_string(ts.month) +
                    " out of [1,12]");
  }
  if (ts.day < 1 || ts.day > 31) {
    throw DataError("encode_datetime: day " + std::to_string(ts.day) +
                    " out of [1,31]");
  }
  if (ts.hour < 0 || ts.hour > 23) {
    throw DataError("encode_datetime: hour " + std::to_string(ts.hour) +
                    " out of [0,23]");
  }
  Eigen::Matrix<double, kDatetimeDim, 1> v;
  v.setZero();
  v[ts.month - 1] = 1.0;
  v[12 + ts.day - 1] = 1.0;
  v[43 + ts.hour] = 1.0;
  return v;
}

Eigen::Vector2d encode_temperature(std::optional<double> celsius) {
  if (!celsius.has_value()) return {0.0, 0.0};
  return {1.0, minmax(*celsius, kTemperatureMinC, kTemperatureMaxC)};
}

Eigen::Vector2d encode_position(double latitude, double longitude) {
  return {minmax(latitude, kLatitudeMin, kLatitudeMax),
          minmax(longitude, kLongitudeMin, kLongitudeMax)};
}

MetadataVector assemble_metadata(const RawMetadata& raw,
                                 const SceneNormalization& stats) {
  MetadataVector out;
  out.values.segment<kDatetimeDim>(kDatetimeOffset) =
      encode_datetime(raw.timestamp);
  out.values.segment<kTemperatureDim>(kTemperatureOffset) =
      encode_temperature(raw.temperature_celsius);
  out.values.segment<kPositionDim>(kPositionOffset) =
      encode_position(raw.latitude, raw.longitude);
  for (int i = 0; i < kSceneAttributeDim; ++i) {
    const double lo = stats.attr_min[i], hi = stats.attr_max[i];
    out.values[kSceneAttributeOffset + i] =
        hi > lo ? minmax(raw.scene_attributes[i], lo, hi)
                : clamp01(raw.scene_attributes[i]);
  }
  for (int i = 0; i < kSceneDescriptorDim; ++i) {
    const double lo = stats.desc_min[i], hi = stats.desc_max[i];
    out.values[kSceneDescriptorOffset + i] =
        hi > lo ? minmax(raw.scene_descriptors[i], lo, hi)
                : clamp01(raw.scene_descriptors[i]);
  }
  return out;
}

Eigen::VectorXd select_feature_groups(const MetadataVector& vec,
                                      const FeatureGroupSet& groups) {
  if (groups.empty()) {
    throw DataError("select_feature_groups: empty group set");
  }
  const bool merged = groups.count(FeatureGroup::kPositionTemperature) > 0;
  if (merged && (groups.count(FeatureGroup::kPosition) ||
                 groups.count(FeatureGroup::kTemperature))) {
    throw DataError(
        "select_feature_groups: pos_temp overlaps position/temperature");
  }

  // Slices in vector layout order.
  struct Slice {
    int offset, width;
  };
  std::vector<Slice> slices;
  if (groups.count(FeatureGroup::kDatetime))
    slices.push_back({kDatetimeOffset, kDatetimeDim});
  if (merged) {
    slices.push_back({kTemperatureOffset, kTemperatureDim + kPositionDim});
  } else {
    if (groups.count(FeatureGroup::kTemperature))
      slices.push_back({kTemperatureOffset, kTemperatureDim});
    if (groups.count(FeatureGroup::kPosition))
      slices.push_back({kPositionOffset, kPositionDim});
  }
  if (groups.count(FeatureGroup::kSceneAttributes))
    slices.push_back({kSceneAttributeOffset, kSceneAttributeDim});
  if (groups.count(FeatureGroup::kSceneDescriptors))
    slices.push_back({kSceneDescriptorOffset, kSceneDescriptorDim});

  int total = 0;
  for (const auto& s : slices) total += s.width;
  Eigen::VectorXd out(total);
  int at = 0;
  for (const auto& s : slices) {
    out.segment(at, s.width) = vec.values.segment(s.offset, s.width);
    at += s.width;
  }
  return out;
}

}  // namespace wildfusion
