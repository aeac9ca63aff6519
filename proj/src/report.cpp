#include "wildfusion/report.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"
#include "wildfusion/errors.hpp"

namespace wildfusion {

namespace {
using nlohmann::json;
}

void save_trial_results(const std::filesystem::path& path,
                        const std::vector<TrialResult>& results,
                        const std::vector<std::string>& header_notes) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  json header{{"format", "wildfusion-trials"},
              {"version", 1},
              {"count", results.size()}};
  if (!header_notes.empty()) header["notes"] = header_notes;
  out << header.dump() << '\n';
  for (const auto& r : results) {
    json j{{"classes", r.trial.class_subset},
           {"features", feature_subset_name(r.trial.feature_subset)},
           {"seed", r.trial.seed},
           {"accuracy", r.accuracy},
           {"kappa", r.kappa}};
    out << j.dump() << '\n';
  }
}

std::vector<TrialResult> load_trial_results(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<TrialResult> results;
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
      throw DataError("trials file line " + std::to_string(line_no) + ": " +
                      e.what());
    }
    if (!saw_header) {
      saw_header = true;
      if (!j.contains("format") || j.at("format") != "wildfusion-trials") {
        throw DataError("trials file '" + path.string() +
                        "': missing header line");
      }
      continue;
    }
    TrialResult r;
    r.trial.class_subset = j.at("classes").get<std::vector<int>>();
    r.trial.feature_subset =
        feature_subset_from_name(j.at("features").get<std::string>());
    r.trial.seed = j.at("seed").get<std::uint64_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.kappa = j.at("kappa").get<double>();
    results.push_back(std::move(r));
  }
  return results;
}

std::string render_score_board(const ScoreBoard& board) {
  std::ostringstream os;
  os << "cardinality\tfeature_subset\twins\tclass_subsets\n";
  for (const auto& [card, wins] : board.wins) {
    const int scored = board.class_subsets_scored.count(card)
                           ? board.class_subsets_scored.at(card)
                           : 0;
    for (const auto& [subset, count] : wins) {
      os << card << '\t' << feature_subset_name(subset) << '\t' << count
         << '\t' << scored << '\n';
    }
  }
  for (const auto& tie : board.tie_log) {
    os << "# " << tie << '\n';
  }
  return os.str();
}

std::string render_score_vs_class_count(
    const std::vector<TrialResult>& results) {
  std::map<std::size_t, std::pair<double, double>> sums;  // size -> (acc, kappa)
  std::map<std::size_t, int> counts;
  for (const auto& r : results) {
    const std::size_t k = r.trial.class_subset.size();
    sums[k].first += r.accuracy;
    sums[k].second += r.kappa;
    counts[k] += 1;
  }
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "num_classes\tmean_accuracy\tmean_kappa\ttrials\n";
  for (const auto& [k, sum] : sums) {
    const int n = counts[k];
    os << k << '\t' << sum.first / n << '\t' << sum.second / n << '\t' << n
       << '\n';
  }
  return os.str();
}

void save_train_log(const std::filesystem::path& path,
                    const std::vector<EpochLog>& epochs, int best_epoch) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  json header{{"format", "wildfusion-trainlog"},
              {"version", 1},
              {"best_epoch", best_epoch}};
  out << header.dump() << '\n';
  for (const auto& e : epochs) {
    json j{{"epoch", e.epoch},
           {"mean_loss", e.mean_loss},
           {"lr", e.lr},
           {"val_accuracy", e.val_accuracy},
           {"val_kappa", e.val_kappa}};
    out << j.dump() << '\n';
  }
}

std::vector<EpochLog> load_train_log(const std::filesystem::path& path,
                                     int* best_epoch) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<EpochLog> epochs;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (!saw_header) {
      saw_header = true;
      if (!j.contains("format") || j.at("format") != "wildfusion-trainlog") {
        throw DataError("train log '" + path.string() + "': missing header");
      }
      if (best_epoch) *best_epoch = j.at("best_epoch").get<int>();
      continue;
    }
    EpochLog e;
    e.epoch = j.at("epoch").get<int>();
    e.mean_loss = j.at("mean_loss").get<double>();
    e.lr = j.at("lr").get<double>();
    e.val_accuracy = j.at("val_accuracy").get<double>();
    e.val_kappa = j.at("val_kappa").get<double>();
    epochs.push_back(e);
  }
  return epochs;
}

}  // namespace wildfusion
