#include "wildfusion/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "wildfusion/errors.hpp"
#include "wildfusion/rng.hpp"

namespace wildfusion {

std::vector<std::size_t> SplitAssignment::indices_of(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == split) out.push_back(i);
  }
  return out;
}

SplitAssignment split_dataset(const std::vector<int>& class_ids,
                              std::uint64_t seed) {
  if (class_ids.size() < 10) {
    throw DataError("split_dataset: need at least 10 records, have " +
                    std::to_string(class_ids.size()));
  }
  SplitAssignment assignment;
  assignment.seed = seed;
  assignment.tags.assign(class_ids.size(), Split::kTrain);

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < class_ids.size(); ++i) {
    by_class[class_ids[i]].push_back(i);
  }

  Rng rng(seed);
  for (auto& [cls, indices] : by_class) {
    // Fisher-Yates with the shared stream; iteration order over the map is
    // sorted, so the assignment is deterministic.
    for (std::size_t i = indices.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(indices[i - 1], indices[j]);
    }
    const auto n = indices.size();
    if (n < 3) {
      assignment.warnings.push_back(
          "class " + std::to_string(cls) + " has only " + std::to_string(n) +
          " samples; assigned best-effort to train");
      continue;
    }
    auto n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * 0.10));
    n_test = std::min(n_test, n - 2);
    const std::size_t rem = n - n_test;
    auto n_val = static_cast<std::size_t>(
        std::llround(static_cast<double>(rem) * 0.10));
    n_val = std::min(n_val, rem - 1);
    for (std::size_t i = 0; i < n_test; ++i) {
      assignment.tags[indices[i]] = Split::kTest;
    }
    for (std::size_t i = n_test; i < n_test + n_val; ++i) {
      assignment.tags[indices[i]] = Split::kValidation;
    }
  }
  return assignment;
}

}  // namespace wildfusion
