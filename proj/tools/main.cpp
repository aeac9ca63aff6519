#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "wildfusion/ablation.hpp"
#include "wildfusion/checkpoint.hpp"
#include "wildfusion/config.hpp"
#include "wildfusion/image.hpp"
#include "wildfusion/manifest.hpp"
#include "wildfusion/metrics.hpp"
#include "wildfusion/report.hpp"
#include "wildfusion/split.hpp"
#include "wildfusion/taxonomy.hpp"
#include "wildfusion/trainer.hpp"
#include "wildfusion/weather.hpp"

namespace wf = wildfusion;
namespace fs = std::filesystem;

namespace {

struct FlagOverrides {
  std::optional<std::string> manifest, taxonomy, output_dir, fusion_mode,
      precision;
  std::optional<int> epochs, batch_size, workers, num_classes;
  std::optional<double> base_lr;
  std::optional<std::uint64_t> seed_split, seed_init, seed_augmentation;
};

wf::RunConfig load_config(const std::string& config_path,
                          const FlagOverrides& flags) {
  wf::RunConfig config;
  if (!config_path.empty()) config = wf::parse_config(config_path);
  if (flags.manifest) config.manifest = *flags.manifest;
  if (flags.taxonomy) config.taxonomy = *flags.taxonomy;
  if (flags.output_dir) config.output_dir = *flags.output_dir;
  if (flags.fusion_mode) {
    config.model.fusion_mode = wf::fusion_mode_from_name(*flags.fusion_mode);
  }
  if (flags.precision) {
    if (*flags.precision == "f32") {
      config.train.precision = wf::Precision::kF32;
    } else if (*flags.precision == "f64") {
      config.train.precision = wf::Precision::kF64;
    } else {
      throw wf::UsageError("--precision must be f32 or f64");
    }
  }
  if (flags.epochs) config.train.epochs = *flags.epochs;
  if (flags.batch_size) config.train.batch_size = *flags.batch_size;
  if (flags.workers) config.train.workers = *flags.workers;
  if (flags.num_classes) config.model.num_classes = *flags.num_classes;
  if (flags.base_lr) config.train.base_lr = *flags.base_lr;
  if (flags.seed_split) config.seeds.split = *flags.seed_split;
  if (flags.seed_init) config.seeds.init = *flags.seed_init;
  if (flags.seed_augmentation) {
    config.seeds.augmentation = *flags.seed_augmentation;
    config.augmentation.seed = *flags.seed_augmentation;
  }
  return config;
}

wf::TaxonomyMap load_taxonomy(const std::string& spec) {
  if (spec == "identity") return wf::TaxonomyMap::identity();
  if (spec == "aggressive-13" || spec == "mild-25") {
    // Preset files ship under data/; WILDFUSION_DATA_DIR points elsewhere
    // when installed.
    const char* data_dir = std::getenv("WILDFUSION_DATA_DIR");
    const fs::path base = data_dir ? fs::path(data_dir) : fs::path("data");
    const fs::path file =
        base / "taxonomy" /
        (spec == "aggressive-13" ? "aggressive_13.txt" : "mild_25.txt");
    return wf::TaxonomyMap::load(file);
  }
  return wf::TaxonomyMap::load(spec);
}

struct LoadedData {
  wf::Manifest manifest;
  wf::AggregatedLabels aggregated;
  wf::SplitAssignment split;
  Eigen::MatrixXd metadata;  // N x 538, encoded with the manifest stats
};

LoadedData load_dataset(const wf::RunConfig& config, bool need_split) {
  if (config.manifest.empty()) {
    throw wf::UsageError(
        "no manifest given (config \"manifest\" or --manifest)");
  }
  LoadedData data;
  data.manifest = wf::load_manifest(config.manifest);
  if (data.manifest.records.empty()) {
    throw wf::DataError("manifest '" + config.manifest + "' has no records");
  }
  const auto taxonomy = load_taxonomy(config.taxonomy);
  for (const auto& rec : data.manifest.records) {
    if (!taxonomy.contains(rec.species_id)) {
      throw wf::DataError("unknown species id " +
                          std::to_string(rec.species_id) + " in manifest");
    }
  }
  data.aggregated = wf::aggregate_classes(data.manifest.records, taxonomy);
  const auto n = static_cast<Eigen::Index>(data.manifest.records.size());
  data.metadata.resize(n, wf::kMetadataDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.metadata.row(i) =
        wf::assemble_metadata(
            data.manifest.records[static_cast<std::size_t>(i)].raw_metadata(),
            data.manifest.stats)
            .values.transpose();
  }
  if (need_split) {
    data.split =
        wf::split_dataset(data.aggregated.class_ids, config.seeds.split);
    for (const auto& warning : data.split.warnings) {
      std::cerr << "warning: " << warning << "\n";
    }
  }
  return data;
}

wf::Image load_sample_image(const wf::RunConfig& config,
                            const fs::path& manifest_dir,
                            const wf::SampleRecord& record) {
  fs::path path = record.image_path;
  if (path.is_relative()) path = manifest_dir / path;
  const wf::Image raw = wf::load_ppm(path);
  return wf::preprocess_image(raw, config.preprocess.band_top,
                              config.preprocess.band_bottom,
                              config.model.input_image_side);
}

wf::DataBundle make_bundle(const wf::RunConfig& config, const LoadedData& data,
                           const std::vector<std::size_t>& indices,
                           bool need_images) {
  wf::DataBundle bundle;
  const fs::path manifest_dir = fs::path(config.manifest).parent_path();
  if (need_images) {
    bundle.images.reserve(indices.size());
    for (auto i : indices) {
      bundle.images.push_back(
          load_sample_image(config, manifest_dir, data.manifest.records[i]));
    }
  }
  bundle.metadata.resize(static_cast<Eigen::Index>(indices.size()),
                         data.metadata.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    bundle.metadata.row(static_cast<Eigen::Index>(r)) =
        data.metadata.row(static_cast<Eigen::Index>(indices[r]));
  }
  bundle.labels.reserve(indices.size());
  for (auto i : indices) bundle.labels.push_back(data.aggregated.class_ids[i]);
  return bundle;
}

wf::FusionModelConfig resolve_model_config(const wf::RunConfig& config,
                                           int observed_classes) {
  wf::FusionModelConfig model = config.model;
  if (model.num_classes != observed_classes) {
    throw wf::DataError(
        "model config expects " + std::to_string(model.num_classes) +
        " classes but the manifest/taxonomy yields " +
        std::to_string(observed_classes) +
        " (set model.num_classes accordingly)");
  }
  return model;
}

template <typename S>
int run_train_typed(const wf::RunConfig& config) {
  LoadedData data = load_dataset(config, /*need_split=*/true);
  const int classes = static_cast<int>(data.aggregated.class_names.size());
  const wf::FusionModelConfig model_config =
      resolve_model_config(config, classes);
  const bool need_images = wf::mode_consumes_images(model_config.fusion_mode);

  const auto train_idx = data.split.indices_of(wf::Split::kTrain);
  const auto val_idx = data.split.indices_of(wf::Split::kValidation);
  const wf::DataBundle train =
      make_bundle(config, data, train_idx, need_images);
  const wf::DataBundle val = make_bundle(config, data, val_idx, need_images);

  auto model = wf::FusionModel<S>::build(model_config, config.seeds.init);

  wf::TrainOptions options;
  options.epochs = config.train.epochs;
  options.batch_size = config.train.batch_size;
  options.schedule = config.schedule();
  options.seed = config.seeds.sampling;
  options.weighted_sampling = true;
  options.augment = need_images && config.train.augment;
  options.augmentation = config.augmentation;

  const auto result = wf::train_classifier(model, train, val, options);

  fs::create_directories(config.output_dir);
  const fs::path out_dir = config.output_dir;
  wf::save_train_log(out_dir / "train_log.jsonl", result.epochs,
                     result.best_epoch);

  const auto write_checkpoint = [&](const fs::path& path,
                                    const wf::NamedTensors<S>& state) {
    wf::Checkpoint ckpt;
    ckpt.config_digest = model_config.digest();
    for (const auto& [name, tensor] : state) {
      ckpt.tensors.push_back(wf::to_entry(name, tensor));
    }
    wf::save_checkpoint(path, ckpt);
  };
  write_checkpoint(out_dir / "model_final.ckpt", model.named_state());
  if (result.best_epoch >= 0) {
    wf::NamedTensors<S> best(result.best_state.begin(),
                             result.best_state.end());
    write_checkpoint(out_dir / "model_best.ckpt", best);
  }

  for (const auto& epoch : result.epochs) {
    std::cout << "epoch " << epoch.epoch << " loss " << epoch.mean_loss
              << " lr " << epoch.lr << " val_accuracy " << epoch.val_accuracy
              << " val_kappa " << epoch.val_kappa << "\n";
  }
  std::cout << "best_epoch " << result.best_epoch << "\n";
  std::cout << "checkpoints written to " << out_dir.string() << "\n";
  return 0;
}

template <typename S>
int run_evaluate_typed(const wf::RunConfig& config,
                       const std::string& checkpoint_path,
                       const std::string& split_name) {
  LoadedData data = load_dataset(config, /*need_split=*/true);
  const int classes = static_cast<int>(data.aggregated.class_names.size());
  const wf::FusionModelConfig model_config =
      resolve_model_config(config, classes);

  const fs::path ckpt_path =
      checkpoint_path.empty()
          ? fs::path(config.output_dir) / "model_final.ckpt"
          : fs::path(checkpoint_path);
  const wf::Checkpoint ckpt = wf::load_checkpoint(ckpt_path);
  if (ckpt.config_digest != model_config.digest()) {
    std::cerr << "checkpoint/config digest mismatch:\n"
              << "  checkpoint: " << ckpt.config_digest << "\n"
              << "  config:     " << model_config.digest() << "\n";
    return 2;
  }

  auto model = wf::FusionModel<S>::build(model_config, config.seeds.init);
  model.load_state(ckpt.tensors);

  wf::Split split = wf::Split::kTest;
  if (split_name == "validation") {
    split = wf::Split::kValidation;
  } else if (split_name == "train") {
    split = wf::Split::kTrain;
  } else if (split_name != "test") {
    throw wf::UsageError("--split must be train, validation or test");
  }
  const auto indices = data.split.indices_of(split);
  if (indices.empty()) throw wf::DataError("selected split is empty");
  const wf::DataBundle bundle =
      make_bundle(config, data, indices,
                  wf::mode_consumes_images(model_config.fusion_mode));

  const wf::ConfusionMatrix cm =
      wf::evaluate_model(model, bundle, config.train.batch_size);
  const wf::MetricReport report = wf::evaluate_metrics(cm);
  const std::string text =
      wf::render_metric_report(report, data.aggregated.class_names);

  fs::create_directories(config.output_dir);
  const fs::path out_file =
      fs::path(config.output_dir) / ("metrics_" + split_name + ".txt");
  std::ofstream(out_file) << text;
  std::cout << text;
  std::cout << "overall_accuracy " << report.overall_accuracy << " kappa "
            << report.kappa << "\n";
  std::cout << "report written to " << out_file.string() << "\n";
  return 0;
}

int run_encode(const wf::RunConfig& config, const std::string& output) {
  LoadedData data = load_dataset(config, /*need_split=*/false);
  fs::create_directories(config.output_dir);
  const fs::path out_path = output.empty()
                                ? fs::path(config.output_dir) / "vectors.jsonl"
                                : fs::path(output);
  std::ofstream out(out_path);
  if (!out) throw wf::DataError("cannot write '" + out_path.string() + "'");
  nlohmann::json header{{"format", "wildfusion-vectors"},
                        {"version", 1},
                        {"dim", wf::kMetadataDim}};
  out << header.dump() << "\n";
  for (Eigen::Index i = 0; i < data.metadata.rows(); ++i) {
    nlohmann::json j;
    j["index"] = i;
    j["species_id"] =
        data.manifest.records[static_cast<std::size_t>(i)].species_id;
    j["label"] = data.aggregated.labels[static_cast<std::size_t>(i)];
    std::vector<double> values(static_cast<std::size_t>(data.metadata.cols()));
    for (Eigen::Index c = 0; c < data.metadata.cols(); ++c) {
      values[static_cast<std::size_t>(c)] = data.metadata(i, c);
    }
    j["values"] = values;
    out << j.dump() << "\n";
  }
  std::cout << "encoded " << data.metadata.rows() << " vectors of dim "
            << wf::kMetadataDim << " to " << out_path.string() << "\n";
  return 0;
}

int run_backfill(const wf::RunConfig& config, const std::string& output) {
  if (config.manifest.empty()) {
    throw wf::UsageError(
        "no manifest given (config \"manifest\" or --manifest)");
  }
  wf::Manifest manifest = wf::load_manifest(config.manifest);

  std::unique_ptr<wf::WeatherSource> source;
  if (config.weather.source == "file") {
    if (config.weather.path.empty()) {
      throw wf::UsageError("weather.path required for the file source");
    }
    source = std::make_unique<wf::FileWeatherSource>(config.weather.path);
  } else {
    if (config.weather.endpoint.empty()) {
      throw wf::UsageError("weather.endpoint required for the http source");
    }
    source = std::make_unique<wf::HttpWeatherSource>(
        config.weather.endpoint, config.weather.credential_env);
  }

  std::size_t filled = 0, already = 0, missing = 0, failures = 0;
  for (auto& rec : manifest.records) {
    if (rec.temperature_celsius.has_value()) {
      ++already;
      continue;
    }
    std::string failure;
    rec = wf::backfill_temperature(rec, *source, &failure);
    if (!failure.empty()) {
      ++failures;
      std::cerr << "warning: backfill failed: " << failure << "\n";
    }
    if (rec.temperature_celsius.has_value()) {
      ++filled;
    } else {
      ++missing;
    }
  }

  fs::create_directories(config.output_dir);
  const fs::path out_path =
      output.empty()
          ? fs::path(config.output_dir) / "manifest_backfilled.jsonl"
          : fs::path(output);
  wf::save_manifest(out_path, manifest);
  std::cout << "backfill: " << already << " already present, " << filled
            << " filled, " << missing << " still missing";
  if (failures > 0) std::cout << ", " << failures << " lookups failed";
  std::cout << "\nwritten to " << out_path.string() << "\n";
  return 0;
}

int run_ablate(const wf::RunConfig& config, bool full_sweep) {
  LoadedData data = load_dataset(config, /*need_split=*/false);

  wf::AblationDataset dataset;
  dataset.features = data.metadata;
  dataset.labels = data.aggregated.class_ids;

  std::vector<int> classes = config.ablation.classes;
  if (classes.empty()) {
    std::set<int> present(dataset.labels.begin(), dataset.labels.end());
    classes.assign(present.begin(), present.end());
  }
  std::vector<wf::FeatureGroup> groups;
  for (const auto& name : config.ablation.groups) {
    groups.push_back(wf::feature_group_from_name(name));
  }

  const auto trials =
      wf::enumerate_trials(classes, groups, config.ablation.min_subset,
                           config.ablation.max_subset, config.seeds.init);
  const std::uint64_t closed_form = wf::trial_count_closed_form(
      static_cast<int>(classes.size()), static_cast<int>(groups.size()));

  std::vector<std::string> notes;
  notes.push_back("enumerated " + std::to_string(trials.size()) + " trials (" +
                  std::to_string(classes.size()) + " classes x " +
                  std::to_string(groups.size()) + " feature groups)");
  if (classes.size() == 9 && groups.size() == 4 &&
      config.ablation.min_subset == 2 && config.ablation.max_subset == 0) {
    notes.push_back(
        "note: the closed form gives 7530 trials for this setting; the "
        "figure 7529 sometimes quoted for it is one short");
  }
  for (const auto& note : notes) std::cout << note << "\n";

  if (!full_sweep && trials.size() > 50000) {
    throw wf::UsageError(
        "sweep of " + std::to_string(trials.size()) + " trials (closed form " +
        std::to_string(closed_form) +
        ") exceeds the default cap; rerun with --full to confirm");
  }

  wf::TrialOptions options;
  options.smote = config.smote;
  options.use_smote = config.ablation.use_smote;
  options.epochs = config.ablation.epochs;
  options.batch_size = config.ablation.batch_size;
  options.schedule = {config.ablation.base_lr, 7, 0.1, 0};

  const auto results =
      wf::run_trials(trials, dataset, options, config.train.workers);
  const auto board = wf::counting_scores(results);

  fs::create_directories(config.output_dir);
  const fs::path out_dir = config.output_dir;
  wf::save_trial_results(out_dir / "trials.jsonl", results, notes);
  std::ofstream(out_dir / "counting_board.txt")
      << wf::render_score_board(board);
  std::ofstream(out_dir / "score_vs_classes.txt")
      << wf::render_score_vs_class_count(results);

  std::cout << wf::render_score_board(board);
  std::cout << wf::render_score_vs_class_count(results);
  std::cout << "results written to " << out_dir.string() << "\n";
  return 0;
}

int run_smote_preview(const wf::RunConfig& config, int minority_class) {
  LoadedData data = load_dataset(config, /*need_split=*/false);
  std::map<int, std::size_t> counts;
  for (int label : data.aggregated.class_ids) counts[label] += 1;
  if (counts.size() < 2) {
    throw wf::DataError("smote-preview needs at least two classes");
  }
  if (minority_class < 0) {
    minority_class = counts.begin()->first;
    for (const auto& [cls, n] : counts) {
      if (n < counts.at(minority_class)) minority_class = cls;
    }
  }
  if (!counts.count(minority_class)) {
    throw wf::DataError("class " + std::to_string(minority_class) +
                        " not present");
  }

  const Eigen::Index n = data.metadata.rows();
  std::vector<Eigen::Index> min_rows, maj_rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.aggregated.class_ids[static_cast<std::size_t>(i)] ==
        minority_class) {
      min_rows.push_back(i);
    } else {
      maj_rows.push_back(i);
    }
  }
  Eigen::MatrixXd minority(static_cast<Eigen::Index>(min_rows.size()),
                           data.metadata.cols());
  Eigen::MatrixXd majority(static_cast<Eigen::Index>(maj_rows.size()),
                           data.metadata.cols());
  for (std::size_t i = 0; i < min_rows.size(); ++i) {
    minority.row(static_cast<Eigen::Index>(i)) =
        data.metadata.row(min_rows[i]);
  }
  for (std::size_t i = 0; i < maj_rows.size(); ++i) {
    majority.row(static_cast<Eigen::Index>(i)) =
        data.metadata.row(maj_rows[i]);
  }

  const auto labels = wf::classify_boundary_points(minority, majority,
                                                   config.smote.m_neighbors);
  std::size_t safe = 0, danger = 0, noise = 0;
  for (auto l : labels) {
    safe += l == wf::BoundaryLabel::kSafe;
    danger += l == wf::BoundaryLabel::kDanger;
    noise += l == wf::BoundaryLabel::kNoise;
  }
  const Eigen::MatrixXd synth =
      wf::borderline_smote(minority, majority, config.smote);

  fs::create_directories(config.output_dir);
  const fs::path out_path =
      fs::path(config.output_dir) / "smote_preview.jsonl";
  std::ofstream out(out_path);
  nlohmann::json header{{"format", "wildfusion-smote-preview"},
                        {"version", 1},
                        {"minority_class", minority_class},
                        {"safe", safe},
                        {"danger", danger},
                        {"noise", noise},
                        {"synthetic", synth.rows()}};
  out << header.dump() << "\n";
  for (Eigen::Index i = 0; i < synth.rows(); ++i) {
    std::vector<double> values(static_cast<std::size_t>(synth.cols()));
    for (Eigen::Index c = 0; c < synth.cols(); ++c) {
      values[static_cast<std::size_t>(c)] = synth(i, c);
    }
    out << nlohmann::json{{"values", values}}.dump() << "\n";
  }
  std::cout << "minority class " << minority_class << ": " << safe
            << " safe, " << danger << " danger, " << noise << " noise; "
            << synth.rows() << " synthetic points -> " << out_path.string()
            << "\n";
  return 0;
}

int run_report(const std::string& trials_path, const std::string& metrics_path,
               const std::string& output_dir) {
  if (trials_path.empty() && metrics_path.empty()) {
    throw wf::UsageError("report needs --trials and/or --metrics");
  }
  if (!metrics_path.empty()) {
    // Per-class metric table from evaluate; validate and summarize.
    std::ifstream in(metrics_path);
    if (!in) throw wf::DataError("cannot open '" + metrics_path + "'");
    std::string line;
    std::getline(in, line);
    if (line.rfind("class\tprecision\trecall\tf1", 0) != 0) {
      throw wf::DataError("'" + metrics_path +
                          "' is not a metric report (missing field header)");
    }
    std::cout << line << "\n";
    std::string overall, kappa;
    while (std::getline(in, line)) {
      std::cout << line << "\n";
      if (line.rfind("overall_accuracy\t", 0) == 0) overall = line;
      if (line.rfind("cohen_kappa\t", 0) == 0) kappa = line;
    }
    if (overall.empty() || kappa.empty()) {
      throw wf::DataError("'" + metrics_path + "' is missing the aggregates");
    }
  }
  if (!trials_path.empty()) {
    const auto results = wf::load_trial_results(trials_path);
    if (results.empty()) throw wf::DataError("no trial results in file");
    const auto board = wf::counting_scores(results);
    const std::string board_text = wf::render_score_board(board);
    const std::string curve_text = wf::render_score_vs_class_count(results);
    std::cout << board_text << curve_text;
    if (!output_dir.empty()) {
      fs::create_directories(output_dir);
      std::ofstream(fs::path(output_dir) / "counting_board.txt") << board_text;
      std::ofstream(fs::path(output_dir) / "score_vs_classes.txt")
          << curve_text;
      std::cout << "tables written to " << output_dir << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"camera-trap species classification with metadata fusion"};
  app.require_subcommand(1);

  std::string config_path;
  FlagOverrides flags;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--manifest", flags.manifest, "dataset manifest path");
    cmd->add_option("--taxonomy", flags.taxonomy,
                    "identity, aggressive-13, mild-25 or a mapping file");
    cmd->add_option("--output-dir", flags.output_dir, "artifact directory");
    cmd->add_option("--seed-split", flags.seed_split, "split seed");
    cmd->add_option("--seed-init", flags.seed_init, "weight init seed");
    cmd->add_option("--seed-augmentation", flags.seed_augmentation,
                    "augmentation seed");
  };

  auto* encode = app.add_subcommand("encode", "emit metadata vectors");
  add_common(encode);
  std::string encode_output;
  encode->add_option("--output", encode_output, "vectors output path");

  auto* backfill = app.add_subcommand("backfill", "fill missing temperatures");
  add_common(backfill);
  std::string backfill_output;
  backfill->add_option("--output", backfill_output, "rewritten manifest path");
  std::string weather_file, weather_url;
  backfill->add_option("--weather-file", weather_file,
                       "local station table (JSON)");
  backfill->add_option("--weather-url", weather_url,
                       "observations endpoint URL");

  auto* train = app.add_subcommand("train", "train a model");
  add_common(train);
  train->add_option(
      "--fusion-mode", flags.fusion_mode,
      "image_only|metadata_only|late_fusion|early_fusion|cbam|mcbam");
  train->add_option("--epochs", flags.epochs, "training epochs");
  train->add_option("--batch-size", flags.batch_size, "mini-batch size");
  train->add_option("--base-lr", flags.base_lr, "initial learning rate");
  train->add_option("--precision", flags.precision, "f32 or f64");
  train->add_option("--num-classes", flags.num_classes,
                    "expected class count");

  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint");
  add_common(evaluate);
  std::string checkpoint_path, split_name = "test";
  evaluate->add_option("--fusion-mode", flags.fusion_mode,
                       "model fusion mode");
  evaluate->add_option(
      "--checkpoint", checkpoint_path,
      "checkpoint path (default <output_dir>/model_final.ckpt)");
  evaluate->add_option("--split", split_name, "train, validation or test");
  evaluate->add_option("--precision", flags.precision, "f32 or f64");
  evaluate->add_option("--num-classes", flags.num_classes,
                       "expected class count");

  auto* ablate = app.add_subcommand("ablate", "run the counting-method sweep");
  add_common(ablate);
  bool full_sweep = false;
  ablate->add_flag("--full", full_sweep, "allow very large sweeps");
  ablate->add_option("--workers", flags.workers, "parallel trial workers");

  auto* smote_preview = app.add_subcommand(
      "smote-preview", "inspect synthetic minority points");
  add_common(smote_preview);
  int minority_class = -1;
  smote_preview->add_option("--minority-class", minority_class,
                            "class id (default: smallest class)");

  auto* report = app.add_subcommand("report", "render plot-ready tables");
  std::string trials_path, metrics_path, report_output;
  report->add_option("--trials", trials_path, "trials.jsonl from ablate");
  report->add_option("--metrics", metrics_path,
                     "metric table from evaluate");
  report->add_option("--output-dir", report_output, "directory for tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const wf::RunConfig config = load_config(config_path, flags);
    if (encode->parsed()) return run_encode(config, encode_output);
    if (backfill->parsed()) {
      wf::RunConfig patched = config;
      if (!weather_file.empty()) {
        patched.weather.source = "file";
        patched.weather.path = weather_file;
      }
      if (!weather_url.empty()) {
        patched.weather.source = "http";
        patched.weather.endpoint = weather_url;
      }
      return run_backfill(patched, backfill_output);
    }
    if (train->parsed()) {
      return config.train.precision == wf::Precision::kF32
                 ? run_train_typed<float>(config)
                 : run_train_typed<double>(config);
    }
    if (evaluate->parsed()) {
      return config.train.precision == wf::Precision::kF32
                 ? run_evaluate_typed<float>(config, checkpoint_path,
                                             split_name)
                 : run_evaluate_typed<double>(config, checkpoint_path,
                                              split_name);
    }
    if (ablate->parsed()) {
      return run_ablate(config, full_sweep || config.ablation.full_sweep);
    }
    if (smote_preview->parsed()) {
      return run_smote_preview(config, minority_class);
    }
    if (report->parsed()) {
      return run_report(trials_path, metrics_path, report_output);
    }
    throw wf::UsageError("no command selected");
  } catch (const wf::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const wf::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
