#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wildfusion {

enum class Split { kTrain, kValidation, kTest };

// Stratified nested 90/10 carve-outs: 10% of each class to test, then 10% of
// the remainder to validation, so proportions land at 81/9/10. Deterministic
// for a given seed.
struct SplitAssignment {
  std::vector<Split> tags;  // one per record
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  std::vector<std::size_t> indices_of(Split split) const;
};

SplitAssignment split_dataset(const std::vector<int>& class_ids,
                              std::uint64_t seed);

}  // namespace wildfusion
