#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddi/errors.hpp"

namespace ddi::data {

inline constexpr int kNumTypeCodes = 86;
inline constexpr const char *kAsaDrugId = "DB00945";

struct PairRecord {
  std::string drug1_id;
  std::string drug2_id;
  std::string smiles1;
  std::string smiles2;
  int binary_label = 0;  // 0 or 1
  int type_code = -1;    // -1 for negatives, 0..85 for positives

  void validate() const {
    if (binary_label == 0 && type_code != -1)
      throw InvalidTypeCode("negative pair with type code " +
                            std::to_string(type_code));
    if (binary_label == 1 && (type_code < 0 || type_code >= kNumTypeCodes))
      throw InvalidTypeCode("positive pair with type code " +
                            std::to_string(type_code));
  }
};

struct SplitSpec {
  std::uint64_t seed = 42;
  double train_fraction = 0.8;
  double negative_ratio = 1.0;
};

struct ReferencePair {
  std::string partner_name;
  std::string drugbank_id;
  std::string smiles;
  int expected_label = 0;
  std::string mechanism;
};

struct DatasetBundle {
  std::vector<PairRecord> train;
  std::vector<PairRecord> test;
  std::vector<PairRecord> asa_holdout;
  std::vector<ReferencePair> reference_pairs;
};

// ASA SMILES, used when rendering reference reports (the ASA side of every
// reference pair is fixed).
inline constexpr const char *kAsaSmiles = "CC(=O)Oc1ccccc1C(=O)O";

// DrugBank IDs and expected binary labels of the seven curated reference
// partners.
struct ReferenceExpectation {
  const char *drugbank_id;
  const char *name;
  int label;
};

inline constexpr ReferenceExpectation kReferenceExpectations[] = {
    {"DB00682", "Warfarin", 1},   {"DB01050", "Ibuprofen", 1},
    {"DB00563", "Methotrexate", 1}, {"DB01104", "Sertraline", 1},
    {"DB01032", "Probenecid", 1},  {"DB00316", "Paracetamol", 0},
    {"DB00126", "Vitamin C", 0},
};

}  // namespace ddi::data
