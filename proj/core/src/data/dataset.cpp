#include "ddi/data/dataset.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "ddi/num/rng.hpp"
#include "ddi/util/hash.hpp"

namespace ddi::data {
namespace {

std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::string trim(const std::string &s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<PairRecord> parse_pairs(const std::string &text) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<PairRecord> out;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    auto fields = split_csv_line(t);
    if (!header_seen) {
      if (fields.size() != 5 || trim(fields[0]) != "drug1_id")
        throw ParseError("expected header drug1_id,drug2_id,smiles1,smiles2,type_code",
                         lineno);
      header_seen = true;
      continue;
    }
    if (fields.size() != 5)
      throw ParseError("expected 5 fields, got " + std::to_string(fields.size()),
                       lineno);
    PairRecord r;
    r.drug1_id = trim(fields[0]);
    r.drug2_id = trim(fields[1]);
    r.smiles1 = trim(fields[2]);
    r.smiles2 = trim(fields[3]);
    if (r.smiles1.empty() || r.smiles2.empty())
      throw ParseError("empty SMILES field", lineno);
    std::string tc = trim(fields[4]);
    try {
      r.type_code = std::stoi(tc);
    } catch (const std::exception &) {
      throw ParseError("type code not an integer: '" + tc + "'", lineno);
    }
    if (r.type_code < -1 || r.type_code >= kNumTypeCodes)
      throw InvalidTypeCode(tc + " at line " + std::to_string(lineno));
    r.binary_label = r.type_code == -1 ? 0 : 1;
    r.validate();
    out.push_back(std::move(r));
  }
  if (!header_seen && lineno > 0)
    throw ParseError("missing header", 1);
  return out;
}

std::vector<PairRecord> load_pairs(const std::string &path) {
  return parse_pairs(util::read_file(path));
}

std::string render_pairs(const std::vector<PairRecord> &pairs) {
  std::ostringstream os;
  os << "drug1_id,drug2_id,smiles1,smiles2,type_code\n";
  for (const auto &p : pairs)
    os << p.drug1_id << ',' << p.drug2_id << ',' << p.smiles1 << ','
       << p.smiles2 << ',' << p.type_code << '\n';
  return os.str();
}

std::vector<PairRecord> sample_negatives(const std::vector<PairRecord> &positives,
                                         std::uint64_t seed,
                                         NegativeSamplingStats *stats) {
  // unique drug universe, ordered by first appearance for determinism
  std::vector<std::pair<std::string, std::string>> drugs;  // (id, smiles)
  std::set<std::string> seen;
  std::set<std::pair<std::string, std::string>> known_positive;
  for (const auto &p : positives) {
    if (seen.insert(p.drug1_id).second) drugs.emplace_back(p.drug1_id, p.smiles1);
    if (seen.insert(p.drug2_id).second) drugs.emplace_back(p.drug2_id, p.smiles2);
    known_positive.insert(std::minmax(p.drug1_id, p.drug2_id));
  }
  if (drugs.size() < 2)
    throw EmptyInput("negative sampling needs at least 2 unique drugs");
  NegativeSamplingStats local;
  num::Prng rng = num::make_prng(seed);
  std::vector<PairRecord> out;
  out.reserve(positives.size());
  while (out.size() < positives.size()) {
    const auto &d1 = drugs[num::uniform_index(rng, drugs.size())];
    const auto &d2 = drugs[num::uniform_index(rng, drugs.size())];
    if (d1.first == d2.first) {
      ++local.self_pair_rejections;
      continue;
    }
    if (known_positive.count(std::minmax(d1.first, d2.first))) {
      ++local.positive_collision_rejections;
      continue;
    }
    PairRecord r;
    r.drug1_id = d1.first;
    r.smiles1 = d1.second;
    r.drug2_id = d2.first;
    r.smiles2 = d2.second;
    r.binary_label = 0;
    r.type_code = -1;
    out.push_back(std::move(r));
  }
  if (stats) *stats = local;
  return out;
}

std::pair<std::vector<PairRecord>, std::vector<PairRecord>> extract_asa_holdout(
    const std::vector<PairRecord> &pairs, const std::string &asa_id) {
  std::vector<PairRecord> asa, rest;
  for (const auto &p : pairs) {
    if (p.drug1_id == asa_id || p.drug2_id == asa_id)
      asa.push_back(p);
    else
      rest.push_back(p);
  }
  return {std::move(asa), std::move(rest)};
}

std::pair<std::vector<PairRecord>, std::vector<PairRecord>> split(
    const std::vector<PairRecord> &pairs, const SplitSpec &spec) {
  std::vector<PairRecord> shuffled = pairs;
  num::Prng rng = num::make_prng(spec.seed);
  num::fisher_yates(shuffled, rng);
  std::size_t n_train = static_cast<std::size_t>(
      spec.train_fraction * static_cast<double>(shuffled.size()));
  std::vector<PairRecord> train(shuffled.begin(),
                                shuffled.begin() + static_cast<long>(n_train));
  std::vector<PairRecord> test(shuffled.begin() + static_cast<long>(n_train),
                               shuffled.end());
  return {std::move(train), std::move(test)};
}

std::vector<ReferencePair> load_reference_pairs(const std::string &path) {
  std::string text = util::read_file(path);
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  std::vector<ReferencePair> out;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    auto fields = split_csv_line(t);
    if (!header_seen) {
      if (fields.size() < 5 || trim(fields[0]) != "partner_name")
        throw ParseError(
            "expected header partner_name,drugbank_id,smiles,label,mechanism",
            lineno);
      header_seen = true;
      continue;
    }
    if (fields.size() < 5)
      throw ParseError("expected 5 fields", lineno);
    ReferencePair r;
    r.partner_name = trim(fields[0]);
    r.drugbank_id = trim(fields[1]);
    r.smiles = trim(fields[2]);
    if (r.smiles.empty())
      throw MissingSmiles("reference pair " + r.drugbank_id + " at line " +
                          std::to_string(lineno));
    try {
      r.expected_label = std::stoi(trim(fields[3]));
    } catch (const std::exception &) {
      throw ParseError("label not an integer", lineno);
    }
    // mechanism may itself contain commas; rejoin the tail
    r.mechanism = trim(fields[4]);
    for (std::size_t i = 5; i < fields.size(); ++i)
      r.mechanism += "," + fields[i];
    out.push_back(std::move(r));
  }
  // validate against the expected seven-record table
  for (const auto &exp : kReferenceExpectations) {
    bool found = false;
    for (const auto &r : out)
      if (r.drugbank_id == exp.drugbank_id) {
        found = true;
        if (r.expected_label != exp.label)
          throw ParseError("label for " + std::string(exp.drugbank_id) +
                               " must be " + std::to_string(exp.label),
                           0);
      }
    if (!found)
      throw MissingReferenceData(std::string("reference pair for ") +
                                 exp.name + " (" + exp.drugbank_id + ")");
  }
  return out;
}

int distinct_type_count(const std::vector<PairRecord> &pairs) {
  std::set<int> types;
  for (const auto &p : pairs)
    if (p.type_code >= 0) types.insert(p.type_code);
  return static_cast<int>(types.size());
}

}  // namespace ddi::data
