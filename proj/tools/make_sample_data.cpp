// Generates a small synthetic camera-trap dataset (manifest + PPM images +
// weather station table + ready-to-run config) for demos and smoke tests.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "wildfusion/image.hpp"
#include "wildfusion/manifest.hpp"
#include "wildfusion/rng.hpp"

namespace wf = wildfusion;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"generate a synthetic sample dataset"};
  std::string output = "sample_data";
  int per_class = 50;
  int image_side = 32;
  std::uint64_t seed = 7;
  app.add_option("--output", output, "output directory");
  app.add_option("--samples-per-class", per_class, "records per class");
  app.add_option("--image-side", image_side, "square image side in pixels");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(fs::path(output) / "images");
    wf::Rng rng(seed);

    // Species drawn from the shipped taxonomy presets; under aggressive-13
    // they map to Fox, Roe Deer, Mustelid, Bird. Bird is an imbalanced
    // minority whose scene signature overlaps Mustelid's, so SMOTE has
    // boundary points to work with.
    const int species[] = {0, 2, 7, 13};
    wf::Manifest manifest;
    for (int cls = 0; cls < 4; ++cls) {
      const int count = cls == 3 ? std::max(per_class / 3, 12) : per_class;
      for (int s = 0; s < count; ++s) {
        wf::SampleRecord rec;
        rec.species_id = species[cls];
        rec.location_id = cls * 10 + static_cast<int>(rng.uniform_int(0, 3));
        rec.latitude = 59.0 + 2.5 * cls + rng.uniform(-0.4, 0.4);
        rec.longitude = 6.0 + 4.0 * cls + rng.uniform(-0.8, 0.8);
        rec.timestamp = {2021, static_cast<int>(rng.uniform_int(1, 12)),
                         static_cast<int>(rng.uniform_int(1, 28)),
                         static_cast<int>(rng.uniform_int(0, 23)),
                         static_cast<int>(rng.uniform_int(0, 59)), 0};
        // A third of the records miss their temperature; backfill can fill
        // them from the station table below.
        if (rng.bernoulli(0.67)) {
          rec.temperature_celsius = rng.uniform(-15.0, 25.0);
        }
        for (int i = 0; i < wf::kSceneAttributeDim; ++i) {
          rec.scene_attributes[i] = rng.uniform(0.0, 0.25);
        }
        // Hot block per class; the minority's overlaps its neighbor's.
        const int hot = cls == 3 ? 25 : cls * 10;
        for (int i = hot; i < hot + 10; ++i) {
          rec.scene_attributes[i] = rng.uniform(0.55, 1.0);
        }
        for (int i = 0; i < wf::kSceneDescriptorDim; ++i) {
          rec.scene_descriptors[i] = rng.uniform(0.0, 0.25);
        }

        // Image: class-coded overall brightness plus noise, so image-only
        // models learn something and fusion models learn more.
        wf::Image img(image_side, image_side);
        const double base = 0.15 + 0.2 * cls;
        for (auto& ch : img.ch) {
          for (Eigen::Index r = 0; r < image_side; ++r) {
            for (Eigen::Index c = 0; c < image_side; ++c) {
              ch(r, c) = base + rng.uniform(0.0, 0.2);
            }
          }
        }
        const std::string file = "images/sample_" +
                                 std::to_string(cls * per_class + s) + ".ppm";
        wf::save_ppm(fs::path(output) / file, img);
        rec.image_path = file;
        manifest.records.push_back(std::move(rec));
      }
    }
    manifest.stats = wf::compute_scene_stats(manifest.records);
    wf::save_manifest(fs::path(output) / "manifest.jsonl", manifest);

    nlohmann::json weather;
    weather["stations"] = nlohmann::json::array();
    weather["readings"] = nlohmann::json::array();
    for (int st = 0; st < 4; ++st) {
      weather["stations"].push_back(
          {{"id", st + 1}, {"lat", 59.0 + 2.5 * st}, {"lon", 6.0 + 4.0 * st}});
      for (int month = 1; month <= 12; ++month) {
        for (int day = 1; day <= 28; day += 2) {
          char when[32];
          std::snprintf(when, sizeof(when), "2021-%02d-%02dT12:00:00", month,
                        day);
          weather["readings"].push_back({{"station_id", st + 1},
                                         {"time", when},
                                         {"temperature_c",
                                          -5.0 + st + 1.5 * month}});
        }
      }
    }
    std::ofstream(fs::path(output) / "weather.json") << weather.dump(2);

    nlohmann::json config;
    config["manifest"] = (fs::path(output) / "manifest.jsonl").string();
    config["taxonomy"] = "aggressive-13";
    config["output_dir"] = (fs::path(output) / "out").string();
    config["model"] = {{"fusion_mode", "early_fusion"},
                       {"input_image_side", image_side},
                       {"stage_channel_widths", {8, 16}},
                       {"blocks_per_stage", {1, 1}},
                       {"num_classes", 4}};
    config["train"] = {{"epochs", 25},
                       {"batch_size", 32},
                       {"base_lr", 0.05},
                       {"lr_decay_period_epochs", 10}};
    config["augmentation"] = {{"cutout_size", image_side / 4}};
    config["weather"] = {{"source", "file"},
                         {"path", (fs::path(output) / "weather.json").string()}};
    config["ablation"] = {{"groups",
                           {"datetime", "pos_temp", "scene_attributes",
                            "places"}},
                          {"epochs", 8}};
    std::ofstream(fs::path(output) / "config.json") << config.dump(2) << "\n";

    std::cout << "wrote " << manifest.records.size() << " records to "
              << output << "\n"
              << "try: wildfusion train --config " << output
              << "/config.json\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
