#include "ddi/data/bundle.hpp"

#include <filesystem>
#include <set>

#include <json.hpp>

#include "ddi/util/hash.hpp"

namespace ddi::data {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> collect_smiles(const DatasetBundle &b) {
  std::set<std::string> uniq;
  for (const auto *list : {&b.train, &b.test, &b.asa_holdout})
    for (const auto &p : *list) {
      uniq.insert(p.smiles1);
      uniq.insert(p.smiles2);
    }
  for (const auto &r : b.reference_pairs) uniq.insert(r.smiles);
  if (!b.reference_pairs.empty() || !b.asa_holdout.empty())
    uniq.insert(kAsaSmiles);
  return {uniq.begin(), uniq.end()};
}

PrepareCounts prepare_impl(const std::vector<PairRecord> &records,
                           const std::string &out_dir,
                           const PrepareOptions &opts,
                           const std::string &input_checksum) {
  PrepareCounts counts;
  std::vector<PairRecord> positives, negatives;
  for (const auto &r : records) {
    r.validate();
    (r.binary_label == 1 ? positives : negatives).push_back(r);
  }
  counts.positives = static_cast<long>(positives.size());

  DatasetBundle bundle;
  auto [asa, rest_pos] = extract_asa_holdout(positives);
  bundle.asa_holdout = std::move(asa);
  counts.asa_pairs = static_cast<long>(bundle.asa_holdout.size());
  counts.asa_types = distinct_type_count(bundle.asa_holdout);

  std::vector<PairRecord> rest_neg;
  if (negatives.empty()) {
    rest_neg = sample_negatives(rest_pos, opts.seed, &counts.sampling);
  } else {
    auto [asa_neg, kept] = extract_asa_holdout(negatives);
    (void)asa_neg;  // negatives touching ASA are dropped, not held out
    rest_neg = std::move(kept);
  }
  counts.negatives = static_cast<long>(rest_neg.size());

  std::vector<PairRecord> combined = rest_pos;
  combined.insert(combined.end(), rest_neg.begin(), rest_neg.end());
  counts.combined = static_cast<long>(combined.size());

  SplitSpec spec;
  spec.seed = opts.seed;
  spec.train_fraction = opts.train_fraction;
  auto [train, test] = split(combined, spec);
  bundle.train = std::move(train);
  bundle.test = std::move(test);
  counts.train = static_cast<long>(bundle.train.size());
  counts.test = static_cast<long>(bundle.test.size());

  std::string reference_checksum;
  if (opts.reference_path) {
    bundle.reference_pairs = load_reference_pairs(*opts.reference_path);
    reference_checksum = util::file_checksum(*opts.reference_path);
  }

  auto cache = chemgraph::GraphCache::build(collect_smiles(bundle));
  counts.unique_graphs = static_cast<long>(cache.size());
  counts.other_element_atoms = cache.total_other_elements();

  // everything parsed and featurized; only now touch the filesystem
  fs::create_directories(out_dir);
  util::write_file(out_dir + "/train.csv", render_pairs(bundle.train));
  util::write_file(out_dir + "/test.csv", render_pairs(bundle.test));
  util::write_file(out_dir + "/asa.csv", render_pairs(bundle.asa_holdout));
  if (opts.reference_path)
    util::write_file(out_dir + "/reference.csv",
                     util::read_file(*opts.reference_path));
  cache.save(out_dir + "/graphs.cache");

  json manifest;
  manifest["schema"] = "ddi-bundle-v1";
  manifest["seed"] = opts.seed;
  manifest["train_fraction"] = opts.train_fraction;
  manifest["counts"] = {
      {"positives", counts.positives},
      {"negatives", counts.negatives},
      {"combined", counts.combined},
      {"train", counts.train},
      {"test", counts.test},
      {"asa_pairs", counts.asa_pairs},
      {"asa_types", counts.asa_types},
      {"unique_graphs", counts.unique_graphs},
      {"other_element_atoms", counts.other_element_atoms},
  };
  manifest["negative_sampling"] = {
      {"self_pair_rejections", counts.sampling.self_pair_rejections},
      {"positive_collision_rejections",
       counts.sampling.positive_collision_rejections},
  };
  manifest["checksums"] = {
      {"input_pairs", input_checksum},
      {"reference_pairs", reference_checksum},
      {"train_csv", util::checksum_hex(render_pairs(bundle.train))},
      {"test_csv", util::checksum_hex(render_pairs(bundle.test))},
  };
  util::write_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
  return counts;
}

}  // namespace

PrepareCounts prepare_bundle(const std::string &pairs_path,
                             const std::string &out_dir,
                             const PrepareOptions &opts) {
  std::string text = util::read_file(pairs_path);
  return prepare_impl(parse_pairs(text), out_dir, opts,
                      util::checksum_hex(text));
}

PrepareCounts prepare_bundle_records(const std::vector<PairRecord> &records,
                                     const std::string &out_dir,
                                     const PrepareOptions &opts,
                                     const std::string &input_checksum) {
  return prepare_impl(records, out_dir, opts, input_checksum);
}

LoadedBundle load_bundle(const std::string &dir) {
  LoadedBundle out;
  out.data.train = load_pairs(dir + "/train.csv");
  out.data.test = load_pairs(dir + "/test.csv");
  out.data.asa_holdout = load_pairs(dir + "/asa.csv");
  if (fs::exists(dir + "/reference.csv"))
    out.data.reference_pairs = load_reference_pairs(dir + "/reference.csv");
  out.cache = chemgraph::GraphCache::load(dir + "/graphs.cache");
  out.manifest_json = util::read_file(dir + "/manifest.json");
  return out;
}

}  // namespace ddi::data
