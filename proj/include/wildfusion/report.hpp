#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wildfusion/ablation.hpp"
#include "wildfusion/trainer.hpp"

namespace wildfusion {

// Trial results as line-delimited JSON.
void save_trial_results(const std::filesystem::path& path,
                        const std::vector<TrialResult>& results,
                        const std::vector<std::string>& header_notes = {});
std::vector<TrialResult> load_trial_results(const std::filesystem::path& path);

// Plot-ready tables: win counts per feature subset, partitioned by subset
// cardinality.
std::string render_score_board(const ScoreBoard& board);

// Mean accuracy and kappa per class-subset size.
std::string render_score_vs_class_count(const std::vector<TrialResult>& results);

// Training log as line-delimited JSON (one epoch per line).
void save_train_log(const std::filesystem::path& path,
                    const std::vector<EpochLog>& epochs, int best_epoch);
std::vector<EpochLog> load_train_log(const std::filesystem::path& path,
                                     int* best_epoch = nullptr);

}  // namespace wildfusion
