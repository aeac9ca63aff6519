#include "wildfusion/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "wildfusion/errors.hpp"

namespace wildfusion {

TaxonomyMap TaxonomyMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open taxonomy '" + path.string() + "'");
  TaxonomyMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    int id = 0;
    std::string arrow, label;
    if (!(ls >> id)) continue;  // blank line
    ls >> arrow;
    std::getline(ls, label);
    const auto start = label.find_first_not_of(" \t");
    label = start == std::string::npos ? "" : label.substr(start);
    const auto end = label.find_last_not_of(" \t\r");
    if (end != std::string::npos) label = label.substr(0, end + 1);
    if (arrow != "->" || label.empty()) {
      throw DataError("taxonomy '" + path.string() + "' line " +
                      std::to_string(line_no) +
                      ": expected 'species_id -> label'");
    }
    map.mapping_[id] = label;
  }
  if (map.mapping_.empty()) {
    throw DataError("taxonomy '" + path.string() + "' is empty");
  }
  return map;
}

TaxonomyMap TaxonomyMap::identity() {
  TaxonomyMap map;
  map.identity_ = true;
  return map;
}

bool TaxonomyMap::contains(int species_id) const {
  return identity_ || mapping_.count(species_id) > 0;
}

const std::string& TaxonomyMap::label(int species_id) const {
  if (identity_) {
    auto it = identity_cache_.find(species_id);
    if (it == identity_cache_.end()) {
      it = identity_cache_
               .emplace(species_id, "species_" + std::to_string(species_id))
               .first;
    }
    return it->second;
  }
  auto it = mapping_.find(species_id);
  if (it == mapping_.end()) {
    throw DataError("unknown species id " + std::to_string(species_id) +
                    " (not in taxonomy)");
  }
  return it->second;
}

AggregatedLabels aggregate_classes(const std::vector<SampleRecord>& records,
                                   const TaxonomyMap& taxonomy) {
  AggregatedLabels out;
  out.labels.reserve(records.size());
  for (const auto& rec : records) {
    out.labels.push_back(taxonomy.label(rec.species_id));
  }
  out.class_names = out.labels;
  std::sort(out.class_names.begin(), out.class_names.end());
  out.class_names.erase(
      std::unique(out.class_names.begin(), out.class_names.end()),
      out.class_names.end());
  out.class_ids.reserve(records.size());
  for (const auto& label : out.labels) {
    const auto it = std::lower_bound(out.class_names.begin(),
                                     out.class_names.end(), label);
    out.class_ids.push_back(
        static_cast<int>(it - out.class_names.begin()));
  }
  return out;
}

}  // namespace wildfusion
