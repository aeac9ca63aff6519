#include <set>

#include "doctest.h"
#include "support/synthetic.hpp"
#include "wildfusion/ablation.hpp"
#include "wildfusion/report.hpp"

using namespace wildfusion;

TEST_CASE("enumeration counts match the closed form") {
  SUBCASE("13 classes x 5 groups") {
    std::vector<int> classes(13);
    std::iota(classes.begin(), classes.end(), 0);
    const auto trials = enumerate_trials(classes, five_way_groups());
    CHECK(trials.size() == 253518);
    CHECK(trial_count_closed_form(13, 5) == 253518);
  }
  SUBCASE("9 classes x 4 groups") {
    std::vector<int> classes(9);
    std::iota(classes.begin(), classes.end(), 0);
    const auto trials = enumerate_trials(classes, four_way_groups());
    CHECK(trials.size() == 7530);
    CHECK(trial_count_closed_form(9, 4) == 7530);
  }
  SUBCASE("2 classes x 1 group is a single trial") {
    const auto trials =
        enumerate_trials({0, 1}, {FeatureGroup::kSceneAttributes});
    CHECK(trials.size() == 1);
  }
  SUBCASE("exhaustive oracle: independent mask enumeration") {
    // Count subsets by brute force over bitmasks rather than combinations.
    const int n = 9;
    std::size_t class_subsets = 0;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      if (__builtin_popcount(mask) >= 2) ++class_subsets;
    }
    const int g = 4;
    std::size_t feature_subsets = (1u << g) - 1;
    std::vector<int> classes(n);
    std::iota(classes.begin(), classes.end(), 0);
    const auto trials = enumerate_trials(classes, four_way_groups());
    CHECK(trials.size() == class_subsets * feature_subsets);
  }
  SUBCASE("trials are unique and honor subset bounds") {
    std::vector<int> classes = {3, 1, 4, 1 + 4, 9};
    const auto trials =
        enumerate_trials(classes, four_way_groups(), 2, 3);
    std::set<std::pair<std::vector<int>, std::string>> seen;
    for (const auto& t : trials) {
      CHECK(t.class_subset.size() >= 2);
      CHECK(t.class_subset.size() <= 3);
      CHECK(std::is_sorted(t.class_subset.begin(), t.class_subset.end()));
      seen.insert({t.class_subset, feature_subset_name(t.feature_subset)});
    }
    CHECK(seen.size() == trials.size());
  }
  SUBCASE("fewer than two classes is an error") {
    CHECK_THROWS_AS(enumerate_trials({0}, four_way_groups()), DataError);
  }
}

TEST_CASE("counting method awards one point per class subset") {
  const auto make_result = [](std::vector<int> classes, const char* features,
                              double acc) {
    TrialResult r;
    r.trial.class_subset = std::move(classes);
    r.trial.feature_subset = feature_subset_from_name(features);
    r.accuracy = acc;
    r.kappa = acc;
    return r;
  };

  SUBCASE("single winner") {
    const std::vector<TrialResult> results = {
        make_result({0, 1}, "scene_attributes", 0.9),
        make_result({0, 1}, "datetime", 0.8),
    };
    const auto board = counting_scores(results);
    CHECK(board.wins.at(1).at(feature_subset_from_name("scene_attributes")) ==
          1);
    CHECK(board.wins.at(1).at(feature_subset_from_name("datetime")) == 0);
    CHECK(board.class_subsets_scored.at(1) == 1);
  }
  SUBCASE("wins add across class subsets") {
    const std::vector<TrialResult> results = {
        make_result({0, 1}, "scene_attributes", 0.9),
        make_result({0, 1}, "datetime", 0.8),
        make_result({0, 2}, "scene_attributes", 0.7),
        make_result({0, 2}, "datetime", 0.6),
    };
    const auto board = counting_scores(results);
    CHECK(board.wins.at(1).at(feature_subset_from_name("scene_attributes")) ==
          2);
    CHECK(board.class_subsets_scored.at(1) == 2);
  }
  SUBCASE("ties break canonically and are logged") {
    const std::vector<TrialResult> results = {
        make_result({0, 1}, "scene_attributes", 0.8),
        make_result({0, 1}, "datetime", 0.8),
    };
    const auto board = counting_scores(results);
    // datetime precedes scene_attributes in canonical group order.
    CHECK(board.wins.at(1).at(feature_subset_from_name("datetime")) == 1);
    CHECK(board.tie_log.size() == 1);
  }
  SUBCASE("cardinalities are scored independently") {
    const std::vector<TrialResult> results = {
        make_result({0, 1}, "scene_attributes", 0.5),
        make_result({0, 1}, "datetime", 0.4),
        make_result({0, 1}, "datetime+scene_attributes", 0.9),
        make_result({0, 1}, "datetime+pos_temp", 0.3),
    };
    const auto board = counting_scores(results);
    CHECK(board.wins.at(1).at(feature_subset_from_name("scene_attributes")) ==
          1);
    CHECK(board.wins.at(2).at(
              feature_subset_from_name("datetime+scene_attributes")) == 1);
  }
  SUBCASE("incomplete coverage is an error naming missing pairs") {
    const std::vector<TrialResult> results = {
        make_result({0, 1}, "scene_attributes", 0.9),
        make_result({0, 1}, "datetime", 0.8),
        make_result({0, 2}, "scene_attributes", 0.7),
        // ({0,2}, datetime) missing
    };
    CHECK_THROWS_WITH_AS(counting_scores(results),
                         doctest::Contains("datetime"), DataError);
  }
}

TEST_CASE("sum of wins equals the number of class subsets per cardinality") {
  // Synthetic accuracies over a full 3-class x 2-group product.
  Rng rng(5);
  std::vector<TrialResult> results;
  const std::vector<FeatureGroup> groups = {FeatureGroup::kDatetime,
                                            FeatureGroup::kSceneAttributes};
  const auto trials = enumerate_trials({0, 1, 2}, groups);
  for (const auto& t : trials) {
    TrialResult r;
    r.trial = t;
    r.accuracy = rng.uniform();
    results.push_back(r);
  }
  const auto board = counting_scores(results);
  for (const auto& [card, wins] : board.wins) {
    int total = 0;
    for (const auto& [subset, count] : wins) total += count;
    CHECK(total == board.class_subsets_scored.at(card));
    CHECK(total == 4);  // C(3,2) + C(3,3) = 4 class subsets
  }
}

TEST_CASE("run_trial learns a separable dataset and respects splits") {
  const auto data = testsupport::make_separable_dataset(3, 80, 11, false);

  Trial trial;
  trial.class_subset = {0, 1, 2};
  trial.feature_subset = {FeatureGroup::kSceneAttributes};
  trial.seed = 5;

  TrialOptions options;
  options.epochs = 12;

  const auto result = run_trial(trial, data.ablation, options);
  CHECK(result.accuracy >= 0.95);
  CHECK(result.kappa >= 0.9);
}

TEST_CASE("run_trial on label-independent features hovers at chance") {
  // Labels are independent of every feature: expect ~0.5 accuracy on a
  // 2-class problem, within 3 standard errors over 20 seeds.
  Rng rng(23);
  AblationDataset data;
  const int n = 240;
  data.features.resize(n, kMetadataDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RawMetadata raw = testsupport::random_raw_metadata(rng);
    data.features.row(i) =
        assemble_metadata(raw, SceneNormalization::identity())
            .values.transpose();
    data.labels.push_back(static_cast<int>(rng.uniform_int(0, 1)));
  }

  double accuracy_sum = 0.0;
  const int seeds = 20;
  int test_n = 0;
  for (int s = 0; s < seeds; ++s) {
    Trial trial;
    trial.class_subset = {0, 1};
    trial.feature_subset = {FeatureGroup::kSceneAttributes};
    trial.seed = static_cast<std::uint64_t>(s + 100);
    TrialOptions options;
    options.epochs = 6;
    const auto result = run_trial(trial, data, options);
    accuracy_sum += result.accuracy;
    test_n = 24;  // 10% of 240
  }
  const double mean_accuracy = accuracy_sum / seeds;
  // Mean of `seeds` trial accuracies, each over ~test_n samples.
  const double se = 0.5 / std::sqrt(static_cast<double>(test_n * seeds));
  CHECK(mean_accuracy > 0.5 - 3 * se);
  CHECK(mean_accuracy < 0.5 + 3 * se);
}

TEST_CASE("run_trial errors when a class has no samples") {
  const auto data = testsupport::make_separable_dataset(2, 40, 3, false);
  Trial trial;
  trial.class_subset = {0, 5};
  trial.feature_subset = {FeatureGroup::kSceneAttributes};
  TrialOptions options;
  CHECK_THROWS_WITH_AS(run_trial(trial, data.ablation, options),
                       doctest::Contains("5"), DataError);
}

TEST_CASE("parallel trial sweep matches serial results") {
  const auto data = testsupport::make_separable_dataset(3, 50, 7, false);
  const auto trials = enumerate_trials(
      {0, 1, 2}, {FeatureGroup::kSceneAttributes, FeatureGroup::kDatetime}, 2,
      0, 99);
  TrialOptions options;
  options.epochs = 4;
  const auto serial = run_trials(trials, data.ablation, options, 1);
  const auto parallel = run_trials(trials, data.ablation, options, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].accuracy == parallel[i].accuracy);
    CHECK(serial[i].kappa == parallel[i].kappa);
  }
}

TEST_CASE("trial results round trip through the report format") {
  testsupport::TempDir dir("trials");
  std::vector<TrialResult> results;
  TrialResult r;
  r.trial.class_subset = {1, 3, 5};
  r.trial.feature_subset = feature_subset_from_name("datetime+places");
  r.trial.seed = 42;
  r.accuracy = 0.875;
  r.kappa = 0.75;
  results.push_back(r);
  const auto path = dir.path() / "trials.jsonl";
  save_trial_results(path, results, {"note one"});
  const auto back = load_trial_results(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].trial.class_subset == r.trial.class_subset);
  CHECK(back[0].trial.feature_subset == r.trial.feature_subset);
  CHECK(back[0].accuracy == r.accuracy);
  CHECK(back[0].kappa == r.kappa);

  const auto board_text = render_score_vs_class_count(back);
  CHECK(board_text.find("num_classes") != std::string::npos);
}
