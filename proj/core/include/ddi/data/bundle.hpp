#pragma once

#include <optional>
#include <string>

#include "ddi/chemgraph/cache.hpp"
#include "ddi/data/dataset.hpp"
#include "ddi/data/records.hpp"

namespace ddi::data {

struct PrepareOptions {
  std::uint64_t seed = 42;
  double train_fraction = 0.8;
  std::optional<std::string> reference_path;  // curated reference pair file
};

struct PrepareCounts {
  long positives = 0;
  long negatives = 0;
  long combined = 0;
  long train = 0;
  long test = 0;
  long asa_pairs = 0;
  int asa_types = 0;
  long unique_graphs = 0;
  int other_element_atoms = 0;
  NegativeSamplingStats sampling;
};

// Runs the full preparation protocol and writes a bundle directory:
// train.csv, test.csv, asa.csv, [reference.csv], graphs.cache, manifest.json.
// If the input already contains negative rows (type -1) sampling is skipped.
PrepareCounts prepare_bundle(const std::string &pairs_path,
                             const std::string &out_dir,
                             const PrepareOptions &opts);

// Same protocol from in-memory records (used by the synthetic benchmark).
PrepareCounts prepare_bundle_records(const std::vector<PairRecord> &records,
                                     const std::string &out_dir,
                                     const PrepareOptions &opts,
                                     const std::string &input_checksum = "");

struct LoadedBundle {
  DatasetBundle data;
  chemgraph::GraphCache cache;
  std::string manifest_json;
};

LoadedBundle load_bundle(const std::string &dir);

}  // namespace ddi::data
