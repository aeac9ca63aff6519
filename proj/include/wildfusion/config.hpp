#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wildfusion/ablation.hpp"
#include "wildfusion/augment.hpp"
#include "wildfusion/model.hpp"
#include "wildfusion/smote.hpp"

namespace wildfusion {

enum class Precision { kF32, kF64 };

struct TrainConfig {
  int epochs = 25;
  int batch_size = 64;
  double base_lr = 1e-3;
  double lr_decay_factor = 0.1;
  int lr_decay_period_epochs = 7;
  Precision precision = Precision::kF64;
  bool augment = true;
  int workers = 0;  // <= 0 means all cores
};

struct SeedConfig {
  std::uint64_t split = 1;
  std::uint64_t init = 2;
  std::uint64_t augmentation = 3;
  std::uint64_t sampling = 4;
  std::uint64_t smote = 5;
};

struct PreprocessConfig {
  int band_top = 0;     // information-band heights in pixels
  int band_bottom = 0;
};

struct WeatherConfig {
  std::string source = "file";  // "file" or "http"
  std::string path;
  std::string endpoint;
  std::string credential_env = "FROST_CLIENT_ID";
};

struct AblationConfig {
  std::vector<int> classes;            // empty: all classes in the manifest
  std::vector<std::string> groups = {"datetime", "pos_temp",
                                     "scene_attributes", "places"};
  int min_subset = 2;
  int max_subset = 0;  // 0: no cap
  int epochs = 15;
  int batch_size = 32;
  double base_lr = 0.1;
  bool use_smote = true;
  bool full_sweep = false;  // gate for the 13-class x 5-group sweep
};

// Everything a command needs; file values can be overridden by flags.
struct RunConfig {
  std::string manifest;
  std::string taxonomy = "identity";  // preset name or mapping-file path
  std::string output_dir = "out";
  FusionModelConfig model;
  TrainConfig train;
  SeedConfig seeds;
  PreprocessConfig preprocess;
  SmoteConfig smote;
  AugmentationConfig augmentation;
  WeatherConfig weather;
  AblationConfig ablation;

  OptimizerState schedule() const {
    return {train.base_lr, train.lr_decay_period_epochs, train.lr_decay_factor,
            0};
  }
};

// Strict parse: unknown keys are rejected with a suggestion.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

}  // namespace wildfusion
