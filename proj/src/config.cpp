#include "wildfusion/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "wildfusion/errors.hpp"

namespace wildfusion {

namespace {

using nlohmann::json;

int levenshtein(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Known misspellings that deserve a pointed suggestion.
const std::map<std::string, std::string>& key_aliases() {
  static const std::map<std::string, std::string> aliases = {
      {"learningrate", "base_lr"}, {"learning_rate", "base_lr"},
      {"lr", "base_lr"},           {"batchsize", "batch_size"},
      {"epoch", "epochs"},         {"fusionmode", "fusion_mode"},
      {"outputdir", "output_dir"},
  };
  return aliases;
}

[[noreturn]] void unknown_key(const std::string& scope, const std::string& key,
                              const std::vector<std::string>& known) {
  std::string message = "config: unknown key \"" + key + "\"";
  if (!scope.empty()) message += " in \"" + scope + "\"";
  const auto alias = key_aliases().find(key);
  if (alias != key_aliases().end() &&
      std::find(known.begin(), known.end(), alias->second) != known.end()) {
    message += "; did you mean \"" + alias->second + "\"?";
  } else {
    int best = 1 << 30;
    std::string suggestion;
    for (const auto& k : known) {
      const int d = levenshtein(key, k);
      if (d < best) {
        best = d;
        suggestion = k;
      }
    }
    if (!suggestion.empty() &&
        best <= std::max<int>(2, static_cast<int>(key.size()) / 3)) {
      message += "; did you mean \"" + suggestion + "\"?";
    }
  }
  throw UsageError(message);
}

void check_keys(const json& obj, const std::string& scope,
                const std::vector<std::string>& known) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      unknown_key(scope, key, known);
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& target) {
  if (obj.contains(key)) {
    try {
      target = obj.at(key).get<T>();
    } catch (const json::exception& e) {
      throw UsageError("config: bad value for \"" + std::string(key) +
                       "\": " + e.what());
    }
  }
}

void parse_model(const json& j, FusionModelConfig& model) {
  check_keys(j, "model",
             {"fusion_mode", "input_image_side", "input_channels",
              "stage_channel_widths", "blocks_per_stage", "metadata_dim",
              "num_classes", "late_head_widths", "mlp_hidden",
              "cbam_reduction", "stem_pool", "early_fusion_stages"});
  if (j.contains("fusion_mode")) {
    model.fusion_mode = fusion_mode_from_name(j.at("fusion_mode"));
  }
  read(j, "input_image_side", model.input_image_side);
  read(j, "input_channels", model.input_channels);
  read(j, "stage_channel_widths", model.stage_channel_widths);
  read(j, "blocks_per_stage", model.blocks_per_stage);
  read(j, "metadata_dim", model.metadata_dim);
  read(j, "num_classes", model.num_classes);
  read(j, "late_head_widths", model.late_head_widths);
  read(j, "mlp_hidden", model.mlp_hidden);
  read(j, "cbam_reduction", model.cbam_reduction);
  read(j, "stem_pool", model.stem_pool);
  read(j, "early_fusion_stages", model.early_fusion_stages);
}

void parse_train(const json& j, TrainConfig& train) {
  check_keys(j, "train",
             {"epochs", "batch_size", "base_lr", "lr_decay_factor",
              "lr_decay_period_epochs", "precision", "augment", "workers"});
  read(j, "epochs", train.epochs);
  read(j, "batch_size", train.batch_size);
  read(j, "base_lr", train.base_lr);
  read(j, "lr_decay_factor", train.lr_decay_factor);
  read(j, "lr_decay_period_epochs", train.lr_decay_period_epochs);
  if (j.contains("precision")) {
    const std::string p = j.at("precision");
    if (p == "f32") {
      train.precision = Precision::kF32;
    } else if (p == "f64") {
      train.precision = Precision::kF64;
    } else {
      throw UsageError("config: precision must be \"f32\" or \"f64\"");
    }
  }
  read(j, "augment", train.augment);
  read(j, "workers", train.workers);
  if (train.epochs < 1 || train.batch_size < 1 || train.base_lr <= 0) {
    throw UsageError("config: epochs, batch_size, base_lr must be positive");
  }
}

void parse_seeds(const json& j, SeedConfig& seeds) {
  check_keys(j, "seeds", {"split", "init", "augmentation", "sampling", "smote"});
  read(j, "split", seeds.split);
  read(j, "init", seeds.init);
  read(j, "augmentation", seeds.augmentation);
  read(j, "sampling", seeds.sampling);
  read(j, "smote", seeds.smote);
}

void parse_preprocess(const json& j, PreprocessConfig& pre) {
  check_keys(j, "preprocess", {"band_top", "band_bottom"});
  read(j, "band_top", pre.band_top);
  read(j, "band_bottom", pre.band_bottom);
  if (pre.band_top < 0 || pre.band_bottom < 0) {
    throw UsageError("config: band heights must be non-negative");
  }
}

void parse_smote(const json& j, SmoteConfig& smote) {
  check_keys(j, "smote",
             {"m_neighbors", "k_interp_neighbors", "synthetic_per_danger"});
  read(j, "m_neighbors", smote.m_neighbors);
  read(j, "k_interp_neighbors", smote.k_interp_neighbors);
  read(j, "synthetic_per_danger", smote.synthetic_per_danger);
  if (smote.m_neighbors < 1 || smote.k_interp_neighbors < 1 ||
      smote.synthetic_per_danger < 1) {
    throw UsageError("config: smote parameters must be >= 1");
  }
}

void parse_augmentation(const json& j, AugmentationConfig& aug) {
  check_keys(j, "augmentation",
             {"hflip_prob", "rotation_range_degrees", "rotation_prob",
              "jitter_limit", "jitter_prob", "cutout_holes", "cutout_size",
              "cutout_prob"});
  read(j, "hflip_prob", aug.hflip_prob);
  read(j, "rotation_range_degrees", aug.rotation_range_degrees);
  read(j, "rotation_prob", aug.rotation_prob);
  read(j, "jitter_limit", aug.jitter_limit);
  read(j, "jitter_prob", aug.jitter_prob);
  read(j, "cutout_holes", aug.cutout_holes);
  Eigen::Index cutout_size = aug.cutout_size;
  if (j.contains("cutout_size")) cutout_size = j.at("cutout_size").get<int>();
  aug.cutout_size = cutout_size;
  read(j, "cutout_prob", aug.cutout_prob);
  for (double p : {aug.hflip_prob, aug.rotation_prob, aug.jitter_prob,
                   aug.cutout_prob}) {
    if (p < 0 || p > 1) {
      throw UsageError("config: augmentation probabilities must be in [0,1]");
    }
  }
}

void parse_weather(const json& j, WeatherConfig& weather) {
  check_keys(j, "weather", {"source", "path", "endpoint", "credential_env"});
  read(j, "source", weather.source);
  read(j, "path", weather.path);
  read(j, "endpoint", weather.endpoint);
  read(j, "credential_env", weather.credential_env);
  if (weather.source != "file" && weather.source != "http") {
    throw UsageError("config: weather.source must be \"file\" or \"http\"");
  }
}

void parse_ablation(const json& j, AblationConfig& ablation) {
  check_keys(j, "ablation",
             {"classes", "groups", "min_subset", "max_subset", "epochs",
              "batch_size", "base_lr", "use_smote", "full_sweep"});
  read(j, "classes", ablation.classes);
  read(j, "groups", ablation.groups);
  read(j, "min_subset", ablation.min_subset);
  read(j, "max_subset", ablation.max_subset);
  read(j, "epochs", ablation.epochs);
  read(j, "batch_size", ablation.batch_size);
  read(j, "base_lr", ablation.base_lr);
  read(j, "use_smote", ablation.use_smote);
  read(j, "full_sweep", ablation.full_sweep);
}

}  // namespace

RunConfig parse_config_text(const std::string& text,
                            const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError("config '" + origin + "': " + e.what());
  }
  check_keys(j, "",
             {"manifest", "taxonomy", "output_dir", "model", "train", "seeds",
              "preprocess", "smote", "augmentation", "weather", "ablation"});
  RunConfig config;
  read(j, "manifest", config.manifest);
  read(j, "taxonomy", config.taxonomy);
  read(j, "output_dir", config.output_dir);
  if (j.contains("model")) parse_model(j.at("model"), config.model);
  if (j.contains("train")) parse_train(j.at("train"), config.train);
  if (j.contains("seeds")) parse_seeds(j.at("seeds"), config.seeds);
  if (j.contains("preprocess"))
    parse_preprocess(j.at("preprocess"), config.preprocess);
  if (j.contains("smote")) parse_smote(j.at("smote"), config.smote);
  if (j.contains("augmentation"))
    parse_augmentation(j.at("augmentation"), config.augmentation);
  if (j.contains("weather")) parse_weather(j.at("weather"), config.weather);
  if (j.contains("ablation")) parse_ablation(j.at("ablation"), config.ablation);
  config.smote.seed = config.seeds.smote;
  config.augmentation.seed = config.seeds.augmentation;
  return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.string());
}

}  // namespace wildfusion
