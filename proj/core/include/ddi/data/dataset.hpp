#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ddi/data/records.hpp"

namespace ddi::data {

// Pair table: UTF-8 comma-delimited with mandatory header
// drug1_id,drug2_id,smiles1,smiles2,type_code (type -1 for negatives).
std::vector<PairRecord> load_pairs(const std::string &path);
std::vector<PairRecord> parse_pairs(const std::string &text);
std::string render_pairs(const std::vector<PairRecord> &pairs);

struct NegativeSamplingStats {
  int self_pair_rejections = 0;
  int positive_collision_rejections = 0;
};

// 1:1 synthetic negatives drawn uniformly from the unique-drug universe of
// the positives. Self-pairs and pairs colliding with a known positive are
// rejected and redrawn; rejection counts are reported.
std::vector<PairRecord> sample_negatives(const std::vector<PairRecord> &positives,
                                         std::uint64_t seed,
                                         NegativeSamplingStats *stats = nullptr);

// Removes every pair touching asa_id. Returns (asa_pairs, remainder).
std::pair<std::vector<PairRecord>, std::vector<PairRecord>> extract_asa_holdout(
    const std::vector<PairRecord> &pairs, const std::string &asa_id = kAsaDrugId);

// Deterministic Fisher-Yates shuffle over mt19937_64(seed), first 80% train.
std::pair<std::vector<PairRecord>, std::vector<PairRecord>> split(
    const std::vector<PairRecord> &pairs, const SplitSpec &spec);

// Curated reference file: partner_name,drugbank_id,smiles,label,mechanism.
// Validates the seven expected records and their Table-layout labels.
std::vector<ReferencePair> load_reference_pairs(const std::string &path);

int distinct_type_count(const std::vector<PairRecord> &pairs);

}  // namespace ddi::data
