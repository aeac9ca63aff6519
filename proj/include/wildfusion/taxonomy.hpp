#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wildfusion/manifest.hpp"

namespace wildfusion {

// Species id -> supergroup label. Presets live under data/taxonomy/ as plain
// "id -> label" text files; identity() maps every id to its own label.
class TaxonomyMap {
 public:
  static TaxonomyMap load(const std::filesystem::path& path);
  static TaxonomyMap identity();

  bool is_identity() const { return identity_; }
  bool contains(int species_id) const;
  const std::string& label(int species_id) const;

  const std::map<int, std::string>& mapping() const { return mapping_; }

 private:
  std::map<int, std::string> mapping_;
  bool identity_ = false;
  mutable std::map<int, std::string> identity_cache_;
};

// Replaces species ids with supergroup labels; sample count is unchanged.
// Returns one label per record plus the sorted distinct label list.
struct AggregatedLabels {
  std::vector<std::string> labels;        // per record
  std::vector<std::string> class_names;   // sorted distinct labels
  std::vector<int> class_ids;             // per record, index into class_names
};
AggregatedLabels aggregate_classes(const std::vector<SampleRecord>& records,
                                   const TaxonomyMap& taxonomy);

}  // namespace wildfusion
