#pragma once

#include <map>
#include <string>
#include <vector>

#include "ddi/chemgraph/featurize.hpp"
#include "ddi/chemgraph/molgraph.hpp"

namespace ddi::chemgraph {

// Build-once, read-many store of parsed + featurized molecules, keyed by the
// exact SMILES string. The binary file format round-trips bit-exactly.
class GraphCache {
 public:
  struct Entry {
    MolGraph graph;
    FeaturizedGraph features;
  };

  // Parses and featurizes every unique SMILES. Parser errors are re-thrown
  // with the offending SMILES attached.
  static GraphCache build(const std::vector<std::string> &smiles_set,
                          const FeatureSchema &schema = {});

  const Entry *find(const std::string &smiles) const;
  const Entry &at(const std::string &smiles) const;
  std::size_t size() const { return entries_.size(); }
  int total_other_elements() const { return total_other_elements_; }

  void save(const std::string &path) const;
  static GraphCache load(const std::string &path);

  const std::map<std::string, Entry> &entries() const { return entries_; }

 private:
  std::map<std::string, Entry> entries_;
  int total_other_elements_ = 0;
};

}  // namespace ddi::chemgraph
