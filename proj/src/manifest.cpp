#include "wildfusion/manifest.hpp"

#include <fstream>

#include "json.hpp"
#include "wildfusion/errors.hpp"

namespace wildfusion {

namespace {

using nlohmann::json;

json stats_to_json(const SceneNormalization& stats) {
  const auto vec = [](const auto& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  return json{{"attr_min", vec(stats.attr_min)},
              {"attr_max", vec(stats.attr_max)},
              {"desc_min", vec(stats.desc_min)},
              {"desc_max", vec(stats.desc_max)}};
}

SceneNormalization stats_from_json(const json& j) {
  SceneNormalization stats;
  const auto fill = [&](const char* key, auto& target, int expected) {
    const auto v = j.at(key).get<std::vector<double>>();
    if (static_cast<int>(v.size()) != expected) {
      throw DataError(std::string("manifest header: ") + key + " has " +
                      std::to_string(v.size()) + " entries, expected " +
                      std::to_string(expected));
    }
    for (int i = 0; i < expected; ++i) target[i] = v[static_cast<std::size_t>(i)];
  };
  fill("attr_min", stats.attr_min, kSceneAttributeDim);
  fill("attr_max", stats.attr_max, kSceneAttributeDim);
  fill("desc_min", stats.desc_min, kSceneDescriptorDim);
  fill("desc_max", stats.desc_max, kSceneDescriptorDim);
  return stats;
}

SampleRecord record_from_json(const json& j, std::size_t line_no) {
  const auto fail = [line_no](const std::string& what) -> DataError {
    return DataError("manifest line " + std::to_string(line_no) + ": " + what);
  };
  SampleRecord rec;
  try {
    rec.image_path = j.at("image").get<std::string>();
    rec.species_id = j.at("species_id").get<int>();
    rec.location_id = j.at("location_id").get<int>();
    rec.latitude = j.at("lat").get<double>();
    rec.longitude = j.at("lon").get<double>();
    rec.timestamp = parse_datetime(j.at("time").get<std::string>());
    if (j.contains("temperature_c") && !j.at("temperature_c").is_null()) {
      rec.temperature_celsius = j.at("temperature_c").get<double>();
    }
    const auto attrs = j.at("scene_attributes").get<std::vector<double>>();
    if (static_cast<int>(attrs.size()) != kSceneAttributeDim) {
      throw fail("scene_attributes has " + std::to_string(attrs.size()) +
                 " entries, expected " + std::to_string(kSceneAttributeDim));
    }
    const auto descs = j.at("scene_descriptors").get<std::vector<double>>();
    if (static_cast<int>(descs.size()) != kSceneDescriptorDim) {
      throw fail("scene_descriptors has " + std::to_string(descs.size()) +
                 " entries, expected " + std::to_string(kSceneDescriptorDim));
    }
    for (int i = 0; i < kSceneAttributeDim; ++i)
      rec.scene_attributes[i] = attrs[static_cast<std::size_t>(i)];
    for (int i = 0; i < kSceneDescriptorDim; ++i)
      rec.scene_descriptors[i] = descs[static_cast<std::size_t>(i)];
  } catch (const json::exception& e) {
    throw fail(e.what());
  } catch (const DataError& e) {
    throw fail(e.what());
  }
  if (rec.species_id < 0) throw fail("negative species_id");
  return rec;
}

json record_to_json(const SampleRecord& rec) {
  json j;
  j["image"] = rec.image_path;
  j["species_id"] = rec.species_id;
  j["location_id"] = rec.location_id;
  j["lat"] = rec.latitude;
  j["lon"] = rec.longitude;
  j["time"] = format_datetime(rec.timestamp);
  if (rec.temperature_celsius.has_value()) {
    j["temperature_c"] = *rec.temperature_celsius;
  } else {
    j["temperature_c"] = nullptr;
  }
  j["scene_attributes"] = std::vector<double>(
      rec.scene_attributes.data(),
      rec.scene_attributes.data() + kSceneAttributeDim);
  j["scene_descriptors"] = std::vector<double>(
      rec.scene_descriptors.data(),
      rec.scene_descriptors.data() + kSceneDescriptorDim);
  return j;
}

}  // namespace

SceneNormalization compute_scene_stats(
    const std::vector<SampleRecord>& records) {
  SceneNormalization stats = SceneNormalization::identity();
  if (records.empty()) return stats;
  stats.attr_min = records[0].scene_attributes;
  stats.attr_max = records[0].scene_attributes;
  stats.desc_min = records[0].scene_descriptors;
  stats.desc_max = records[0].scene_descriptors;
  for (const auto& rec : records) {
    stats.attr_min = stats.attr_min.cwiseMin(rec.scene_attributes);
    stats.attr_max = stats.attr_max.cwiseMax(rec.scene_attributes);
    stats.desc_min = stats.desc_min.cwiseMin(rec.scene_descriptors);
    stats.desc_max = stats.desc_max.cwiseMax(rec.scene_descriptors);
  }
  return stats;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");

  Manifest manifest;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("manifest line " + std::to_string(line_no) + ": " +
                      e.what());
    }
    if (!saw_header) {
      saw_header = true;
      if (!j.contains("format") || j.at("format") != "wildfusion-manifest") {
        throw DataError("manifest '" + path.string() +
                        "': first line must be the header object");
      }
      if (j.at("version").get<int>() != 1) {
        throw DataError("manifest '" + path.string() +
                        "': unsupported version");
      }
      if (j.contains("scene_stats")) {
        manifest.stats = stats_from_json(j.at("scene_stats"));
        manifest.stats_from_file = true;
      }
      continue;
    }
    manifest.records.push_back(record_from_json(j, line_no));
  }
  if (!saw_header) {
    throw DataError("manifest '" + path.string() + "': empty file");
  }
  if (!manifest.stats_from_file) {
    manifest.stats = compute_scene_stats(manifest.records);
    manifest.stats_from_file = !manifest.records.empty();
  }
  return manifest;
}

void save_manifest(const std::filesystem::path& path,
                   const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
  json header{{"format", "wildfusion-manifest"}, {"version", 1}};
  header["scene_stats"] = stats_to_json(manifest.stats);
  out << header.dump() << '\n';
  for (const auto& rec : manifest.records) {
    out << record_to_json(rec).dump() << '\n';
  }
}

}  // namespace wildfusion
