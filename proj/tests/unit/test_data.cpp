#include <doctest.h>

#include <filesystem>
#include <set>
#include <string>

#include "ddi/data/bundle.hpp"
#include "ddi/data/dataset.hpp"
#include "ddi/errors.hpp"
#include "ddi/pipeline/synthetic.hpp"
#include "ddi/util/hash.hpp"

using namespace ddi;
using namespace ddi::data;

namespace {

std::vector<PairRecord> make_positives(int n) {
  std::vector<PairRecord> out;
  for (int i = 0; i < n; ++i) {
    PairRecord p;
    p.drug1_id = "D" + std::to_string(2 * i);
    p.drug2_id = "D" + std::to_string(2 * i + 1);
    p.smiles1 = "CC";
    p.smiles2 = "CCO";
    p.binary_label = 1;
    p.type_code = i % kNumTypeCodes;
    out.push_back(std::move(p));
  }
  return out;
}

std::string temp_dir(const char *name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  return p.string();
}

const char kReferenceCsv[] =
    "partner_name,drugbank_id,smiles,label,mechanism\n"
    "Warfarin,DB00682,CC(=O)CC(c1ccccc1)c1c(O)c2ccccc2oc1=O,1,anticoagulant "
    "displacement\n"
    "Ibuprofen,DB01050,CC(C)Cc1ccc(cc1)C(C)C(=O)O,1,shared COX pathway\n"
    "Methotrexate,DB00563,CN(Cc1cnc2nc(N)nc(N)c2n1)c1ccc(cc1)C(=O)NC(CCC(=O)O)C(=O)O,1,clearance competition\n"
    "Sertraline,DB01104,CNC1CCC(c2ccc(Cl)c(Cl)c2)c2ccccc21,1,protein binding\n"
    "Probenecid,DB01032,CCCN(CCC)S(=O)(=O)c1ccc(cc1)C(=O)O,1,renal secretion\n"
    "Paracetamol,DB00316,CC(=O)Nc1ccc(O)cc1,0,no flagged interaction\n"
    "Vitamin C,DB00126,OCC(O)C1OC(=O)C(=C1O)O,0,no flagged interaction\n";

}  // namespace

TEST_CASE("pair CSV parsing and rendering round-trip") {
  std::string text =
      "drug1_id,drug2_id,smiles1,smiles2,type_code\n"
      "DB1,DB2,CC,CCO,4\n"
      "DB3,DB4,CCC,CCN,-1\n";
  auto pairs = parse_pairs(text);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].binary_label == 1);
  CHECK(pairs[0].type_code == 4);
  CHECK(pairs[1].binary_label == 0);
  CHECK(pairs[1].type_code == -1);
  CHECK(render_pairs(pairs) == text);
}

TEST_CASE("pair CSV errors carry line numbers") {
  CHECK_THROWS_AS(parse_pairs("wrong,header\n"), ParseError);
  std::string bad_cols =
      "drug1_id,drug2_id,smiles1,smiles2,type_code\nDB1,DB2,CC\n";
  try {
    parse_pairs(bad_cols);
    FAIL("expected ParseError");
  } catch (const ParseError &e) {
    CHECK(e.line == 2);
  }
  std::string bad_type =
      "drug1_id,drug2_id,smiles1,smiles2,type_code\nDB1,DB2,CC,CC,86\n";
  CHECK_THROWS_AS(parse_pairs(bad_type), InvalidTypeCode);
  std::string bad_num =
      "drug1_id,drug2_id,smiles1,smiles2,type_code\nDB1,DB2,CC,CC,x\n";
  CHECK_THROWS_AS(parse_pairs(bad_num), ParseError);
}

TEST_CASE("negative sampling: 1:1 ratio, no self pairs, no known positives") {
  auto positives = make_positives(40);
  // add shared drugs so collisions are possible
  positives[1].drug1_id = positives[0].drug1_id;
  NegativeSamplingStats stats;
  auto negatives = sample_negatives(positives, 42, &stats);
  CHECK(negatives.size() == positives.size());

  std::set<std::pair<std::string, std::string>> known;
  for (const auto &p : positives)
    known.insert(std::minmax(p.drug1_id, p.drug2_id));
  for (const auto &n : negatives) {
    CHECK(n.binary_label == 0);
    CHECK(n.type_code == -1);
    CHECK(n.drug1_id != n.drug2_id);
    CHECK(known.count(std::minmax(n.drug1_id, n.drug2_id)) == 0);
    CHECK_FALSE(n.smiles1.empty());
    CHECK_FALSE(n.smiles2.empty());
  }
  // determinism
  auto again = sample_negatives(positives, 42);
  REQUIRE(again.size() == negatives.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].drug1_id == negatives[i].drug1_id);
    CHECK(again[i].drug2_id == negatives[i].drug2_id);
  }
  auto other_seed = sample_negatives(positives, 43);
  bool identical = true;
  for (std::size_t i = 0; i < other_seed.size(); ++i)
    identical &= (other_seed[i].drug1_id == negatives[i].drug1_id &&
                  other_seed[i].drug2_id == negatives[i].drug2_id);
  CHECK_FALSE(identical);
}

TEST_CASE("ASA holdout extraction keeps every touching pair") {
  auto positives = make_positives(10);
  positives[3].drug1_id = kAsaDrugId;
  positives[7].drug2_id = kAsaDrugId;
  auto [asa, rest] = extract_asa_holdout(positives);
  CHECK(asa.size() == 2);
  CHECK(rest.size() == 8);
  for (const auto &p : rest) {
    CHECK(p.drug1_id != kAsaDrugId);
    CHECK(p.drug2_id != kAsaDrugId);
  }
}

TEST_CASE("split is deterministic, disjoint and 80/20") {
  auto pairs = make_positives(50);
  SplitSpec spec;
  auto [train, test] = split(pairs, spec);
  CHECK(train.size() == 40);
  CHECK(test.size() == 10);
  std::set<std::string> seen;
  for (const auto &p : train) seen.insert(p.drug1_id + "|" + p.drug2_id);
  for (const auto &p : test)
    CHECK(seen.count(p.drug1_id + "|" + p.drug2_id) == 0);
  auto [train2, test2] = split(pairs, spec);
  CHECK(train2.size() == train.size());
  bool same = true;
  for (std::size_t i = 0; i < train.size(); ++i)
    same &= (train[i].drug1_id == train2[i].drug1_id);
  CHECK(same);
  SplitSpec other;
  other.seed = 7;
  auto [train3, test3] = split(pairs, other);
  bool all_same = train3.size() == train.size();
  for (std::size_t i = 0; all_same && i < train.size(); ++i)
    all_same = (train[i].drug1_id == train3[i].drug1_id);
  CHECK_FALSE(all_same);
}

TEST_CASE("reference file validation") {
  auto dir = temp_dir("ddi_ref_test");
  std::filesystem::create_directories(dir);
  util::write_file(dir + "/reference.csv", kReferenceCsv);
  auto refs = load_reference_pairs(dir + "/reference.csv");
  REQUIRE(refs.size() == 7);
  CHECK(refs[0].partner_name == "Warfarin");
  CHECK(refs[0].expected_label == 1);
  CHECK(refs[5].expected_label == 0);
  // mechanism column may contain commas (tail is rejoined)
  std::string with_comma = kReferenceCsv;
  util::write_file(dir + "/ref2.csv", with_comma);
  CHECK(load_reference_pairs(dir + "/ref2.csv").size() == 7);

  // dropping a required drug is an error naming it
  std::string missing = kReferenceCsv;
  missing = missing.substr(0, missing.find("Probenecid"));
  missing += "Paracetamol,DB00316,CC(=O)Nc1ccc(O)cc1,0,none\n"
             "Vitamin C,DB00126,OCC(O)C1OC(=O)C(=C1O)O,0,none\n";
  util::write_file(dir + "/ref3.csv", missing);
  try {
    load_reference_pairs(dir + "/ref3.csv");
    FAIL("expected MissingReferenceData");
  } catch (const MissingReferenceData &e) {
    CHECK(std::string(e.what()).find("DB01032") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("prepare_bundle writes a loadable, consistent bundle") {
  pipeline::SyntheticSpec spec;
  spec.n_pairs = 40;
  auto records = pipeline::make_synthetic_pairs(spec);
  auto dir = temp_dir("ddi_bundle_test");
  PrepareOptions opts;
  auto counts = prepare_bundle_records(records, dir, opts);
  CHECK(counts.positives == 20);
  CHECK(counts.negatives == 20);
  CHECK(counts.combined == 40);
  CHECK(counts.train == 32);
  CHECK(counts.test == 8);
  CHECK(counts.train + counts.test == counts.combined);

  auto loaded = load_bundle(dir);
  CHECK(loaded.data.train.size() == 32);
  CHECK(loaded.data.test.size() == 8);
  CHECK(loaded.cache.size() == static_cast<std::size_t>(counts.unique_graphs));
  for (const auto &p : loaded.data.train) {
    CHECK(loaded.cache.find(p.smiles1) != nullptr);
    CHECK(loaded.cache.find(p.smiles2) != nullptr);
  }
  CHECK(loaded.manifest_json.find("ddi-bundle-v1") != std::string::npos);

  // preparing twice is byte-identical
  auto dir2 = temp_dir("ddi_bundle_test2");
  prepare_bundle_records(records, dir2, opts);
  CHECK(util::file_checksum(dir + "/train.csv") ==
        util::file_checksum(dir2 + "/train.csv"));
  CHECK(util::file_checksum(dir + "/test.csv") ==
        util::file_checksum(dir2 + "/test.csv"));
  CHECK(util::file_checksum(dir + "/graphs.cache") ==
        util::file_checksum(dir2 + "/graphs.cache"));
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("prepare_bundle with positives only samples 1:1 negatives") {
  auto positives = make_positives(20);
  // give them parseable, distinct SMILES
  for (std::size_t i = 0; i < positives.size(); ++i) {
    positives[i].smiles1 = "C" + std::string(i % 4 + 1, 'C');
    positives[i].smiles2 = "CCO";
  }
  auto dir = temp_dir("ddi_bundle_neg");
  PrepareOptions opts;
  auto counts = prepare_bundle_records(positives, dir, opts);
  CHECK(counts.positives == 20);
  CHECK(counts.negatives == 20);
  CHECK(counts.combined == 40);
  std::filesystem::remove_all(dir);
}

TEST_CASE("unreadable input leaves no partial outputs") {
  auto dir = temp_dir("ddi_bundle_fail");
  PrepareOptions opts;
  CHECK_THROWS_AS(prepare_bundle("/no/such/pairs.csv", dir, opts), IoError);
  CHECK_FALSE(std::filesystem::exists(dir));
}

TEST_CASE("synthetic generator invariants") {
  pipeline::SyntheticSpec spec;
  auto records = pipeline::make_synthetic_pairs(spec);
  REQUIRE(records.size() == 2000);
  int positives = 0;
  std::set<int> types;
  for (const auto &r : records) {
    r.validate();
    positives += r.binary_label;
    if (r.type_code >= 0) types.insert(r.type_code);
  }
  CHECK(positives == 1000);
  CHECK(types.size() == pipeline::kSyntheticTypeCount);
  auto again = pipeline::make_synthetic_pairs(spec);
  CHECK(render_pairs(again) == render_pairs(records));
}
