#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddi/chemgraph/featurize.hpp"
#include "ddi/chemgraph/smiles.hpp"
#include "ddi/data/bundle.hpp"
#include "ddi/data/dataset.hpp"
#include "ddi/errors.hpp"
#include "ddi/pipeline/pipeline.hpp"
#include "ddi/pipeline/synthetic.hpp"
#include "ddi/util/hash.hpp"

namespace {

using namespace ddi;
using nlohmann::json;

constexpr const char *kUsageNotes = R"(
Pair files are comma-separated with header
  drug1_id,drug2_id,smiles1,smiles2,type_code
where type_code is 0..85 for an interaction pair and -1 for a negative.

The SMILES subset covers the organic-set atoms B C N O P S F Cl Br I, their
aromatic lowercase forms, bracket atoms with charge and explicit H counts,
ring closures (including %nn), branches, and the bonds - = # :. Isotopes,
stereo markers (/ \ @), wildcards and multi-fragment dots are rejected with
the offending position.
)";

// Train-config flags shared by train/ablate: a config file provides the
// baseline and explicitly passed flags override it.
struct TrainFlags {
  std::string config_path;
  pipeline::TrainConfig value;  // flag storage before merge
  CLI::Option *epochs, *batch, *seed, *lr, *gamma, *period, *hidden, *heads,
      *dropout, *topk, *freeze;

  void add_to(CLI::App *cmd) {
    cmd->add_option("--config", config_path, "JSON config file (flags win)");
    epochs = cmd->add_option("--epochs", value.epochs, "Training epochs per phase");
    batch = cmd->add_option("--batch-size", value.batch_size, "Pairs per batch");
    seed = cmd->add_option("--seed", value.seed, "Run seed");
    lr = cmd->add_option("--lr", value.schedule.base_lr, "Base learning rate");
    gamma = cmd->add_option("--lr-gamma", value.schedule.gamma, "LR decay factor");
    period = cmd->add_option("--lr-period", value.schedule.period,
                             "Epochs between LR decays");
    hidden = cmd->add_option("--hidden-dim", value.model.hidden_dim,
                             "Encoder hidden width");
    heads = cmd->add_option("--heads", value.model.n_heads, "Attention heads");
    dropout = cmd->add_option("--dropout", value.model.dropout_p, "Dropout rate");
    topk = cmd->add_option("--topk", value.model.topk,
                           "Interaction-graph neighbours per atom");
    freeze = cmd->add_flag("--freeze-trunk", value.freeze_trunk_phase2,
                           "Freeze the shared trunk in the type-prediction phase");
    cmd->add_flag("--no-determinism",
                  "Accepted for interface stability; all current code paths "
                  "are single-threaded and deterministic either way");
  }

  pipeline::TrainConfig merged() const {
    pipeline::TrainConfig cfg;
    if (!config_path.empty())
      cfg = pipeline::config_from_json(util::read_file(config_path));
    if (epochs->count()) cfg.epochs = value.epochs;
    if (batch->count()) cfg.batch_size = value.batch_size;
    if (seed->count()) cfg.seed = value.seed;
    if (lr->count()) cfg.schedule.base_lr = value.schedule.base_lr;
    if (gamma->count()) cfg.schedule.gamma = value.schedule.gamma;
    if (period->count()) cfg.schedule.period = value.schedule.period;
    if (hidden->count()) cfg.model.hidden_dim = value.model.hidden_dim;
    if (heads->count()) cfg.model.n_heads = value.model.n_heads;
    if (dropout->count()) cfg.model.dropout_p = value.model.dropout_p;
    if (topk->count()) cfg.model.topk = value.model.topk;
    if (freeze->count()) cfg.freeze_trunk_phase2 = value.freeze_trunk_phase2;
    cfg.validate();
    return cfg;
  }
};

std::string bundle_checksums(const std::string &dir) {
  json j;
  j["manifest"] = util::file_checksum(dir + "/manifest.json");
  j["train_csv"] = util::file_checksum(dir + "/train.csv");
  j["test_csv"] = util::file_checksum(dir + "/test.csv");
  return j.dump();
}

void echo_provenance(const pipeline::TrainConfig &cfg,
                     const std::string &bundle_dir) {
  std::cout << "config=" << pipeline::config_to_json(cfg) << "\n";
  if (!bundle_dir.empty())
    std::cout << "inputs=" << bundle_checksums(bundle_dir) << "\n";
}

int cmd_prepare(const std::string &pairs, const std::string &out,
                std::uint64_t seed, double train_fraction,
                const std::string &reference) {
  data::PrepareOptions opts;
  opts.seed = seed;
  opts.train_fraction = train_fraction;
  if (!reference.empty()) opts.reference_path = reference;
  data::PrepareCounts c = data::prepare_bundle(pairs, out, opts);
  std::cout << "prepared bundle at " << out << "\n"
            << "positives=" << c.positives << " negatives=" << c.negatives
            << " combined=" << c.combined << "\n"
            << "train=" << c.train << " test=" << c.test << "\n"
            << "asa_pairs=" << c.asa_pairs << " asa_types=" << c.asa_types
            << "\n"
            << "unique_graphs=" << c.unique_graphs
            << " other_element_atoms=" << c.other_element_atoms << "\n";
  return 0;
}

int cmd_synth(const std::string &out, std::uint64_t seed, int n_pairs) {
  pipeline::SyntheticSpec spec;
  spec.seed = seed;
  spec.n_pairs = n_pairs;
  util::write_file(out, data::render_pairs(pipeline::make_synthetic_pairs(spec)));
  std::cout << "wrote " << n_pairs << " generated pairs to " << out << "\n";
  return 0;
}

int cmd_train(const std::string &bundle_dir, const std::string &variant,
              const std::string &out, const TrainFlags &flags) {
  pipeline::TrainConfig cfg = flags.merged();
  cfg.model.variant = model::variant_from_string(variant);
  data::LoadedBundle b = data::load_bundle(bundle_dir);
  echo_provenance(cfg, bundle_dir);
  pipeline::TrainResult tr =
      pipeline::train(cfg.model.variant, b.data, b.cache, cfg);
  pipeline::save_model(out, tr.model, cfg);
  std::string log = "config=" + pipeline::config_to_json(cfg) + "\ninputs=" +
                    bundle_checksums(bundle_dir) + "\n" + tr.log_text;
  util::write_file(out + ".log", log);
  std::cout << "checkpoint " << out << " (" << tr.model.count_params()
            << " parameters), log " << out << ".log\n";
  return 0;
}

int load_for_report(const std::string &bundle_dir, const std::string &checkpoint,
                    data::LoadedBundle &b, pipeline::ModelF &m,
                    pipeline::TrainConfig &cfg) {
  b = data::load_bundle(bundle_dir);
  m = pipeline::load_model(checkpoint, &cfg);
  echo_provenance(cfg, bundle_dir);
  return 0;
}

void emit(const std::string &json_text, const std::string &table,
          const std::string &out, const std::string &format) {
  if (!out.empty()) util::write_file(out, json_text);
  std::cout << (format == "json" ? json_text : table);
}

int cmd_evaluate(const std::string &bundle_dir, const std::string &checkpoint,
                 const std::string &out, const std::string &format) {
  data::LoadedBundle b;
  pipeline::ModelF m;
  pipeline::TrainConfig cfg;
  load_for_report(bundle_dir, checkpoint, b, m, cfg);
  pipeline::MetricsReport rep = pipeline::evaluate(m, b.data, b.cache, cfg);
  emit(rep.to_json(), rep.render_table(), out, format);
  return 0;
}

int cmd_asa_report(const std::string &bundle_dir, const std::string &checkpoint,
                   const std::string &out, const std::string &format) {
  data::LoadedBundle b;
  pipeline::ModelF m;
  pipeline::TrainConfig cfg;
  load_for_report(bundle_dir, checkpoint, b, m, cfg);
  pipeline::AsaReport rep = pipeline::asa_report(m, b.data, b.cache, cfg);
  emit(rep.to_json(), rep.render_table(), out, format);
  return 0;
}

int cmd_ablate(const std::string &bundle_dir, const std::string &out_dir,
               const TrainFlags &flags) {
  pipeline::TrainConfig cfg = flags.merged();
  data::LoadedBundle b = data::load_bundle(bundle_dir);
  echo_provenance(cfg, bundle_dir);
  pipeline::AblateResult res = pipeline::ablate(b.data, b.cache, cfg, out_dir);
  util::write_file(out_dir + "/ablate.json", res.to_json());
  std::cout << res.render_table();
  return 0;
}

int cmd_predict(const std::string &checkpoint, const std::string &smiles_a,
                const std::string &smiles_b) {
  pipeline::TrainConfig cfg;
  pipeline::ModelF m = pipeline::load_model(checkpoint, &cfg);
  chemgraph::FeatureSchema schema;
  chemgraph::FeaturizedGraph a =
      chemgraph::featurize(chemgraph::parse_smiles(smiles_a), schema);
  chemgraph::FeaturizedGraph bg =
      chemgraph::featurize(chemgraph::parse_smiles(smiles_b), schema);
  num::Tape<float> tape;
  auto fo = m.forward_batch(tape, {&a, &bg}, false, {});
  double p = num::sigmoid(static_cast<double>(tape.value(fo.binary_logits).v[0]));
  const auto &cl = tape.value(fo.class_logits);
  std::vector<float> logits(cl.v.begin(), cl.v.end());
  auto probs = num::softmax(logits);
  std::vector<int> order(probs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return probs[x] > probs[y]; });

  std::cout << "config=" << pipeline::config_to_json(cfg) << "\n";
  std::printf("interaction probability: %.6f\n", p);
  std::cout << "top-5 type codes:\n";
  for (int k = 0; k < 5 && k < static_cast<int>(order.size()); ++k)
    std::printf("  type %2d  confidence %.6f\n", order[k],
                static_cast<double>(probs[order[k]]));
  if (m.cfg.variant != model::Variant::Concat) {
    auto s = m.attention_summary(a, bg);
    std::cout << "most attended atom of molecule B: index " << s.most_attended
              << " (" << bg.atom_features.n_rows << " atoms)\n";
  }
  return 0;
}

int exit_code_for(const Error &e) {
  if (dynamic_cast<const NonFiniteLoss *>(&e) ||
      dynamic_cast<const ShapeMismatch *>(&e) ||
      dynamic_cast<const NotScalarLoss *>(&e) ||
      dynamic_cast<const SingleClassInput *>(&e))
    return 3;
  if (dynamic_cast<const ConfigMismatch *>(&e) ||
      dynamic_cast<const UnknownVariant *>(&e) ||
      dynamic_cast<const VariantHasNoAttention *>(&e))
    return 4;
  return 2;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{std::string("Drug-drug interaction GNN ablation driver.\n") +
               kUsageNotes};
  app.require_subcommand(1);

  std::string pairs, out, bundle_dir, checkpoint, reference, variant;
  std::string smiles_a, smiles_b, format = "table";
  std::uint64_t seed = 42;
  double train_fraction = 0.8;
  int n_pairs = 2000;

  auto *prepare = app.add_subcommand(
      "prepare", "Split a pair file, sample negatives, build the graph cache");
  prepare->add_option("--pairs", pairs, "Input pair CSV")->required();
  prepare->add_option("--out", out, "Output bundle directory")->required();
  prepare->add_option("--seed", seed, "Sampling/split seed");
  prepare->add_option("--train-fraction", train_fraction, "Train split share");
  prepare->add_option("--reference", reference,
                      "Reference partner SMILES CSV (for asa-report)");

  auto *synth = app.add_subcommand(
      "synth", "Write a generated pair benchmark with a planted mechanism");
  synth->add_option("--out", out, "Output pair CSV")->required();
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("--pairs", n_pairs, "Number of pairs");

  TrainFlags train_flags, ablate_flags;
  auto *train = app.add_subcommand("train", "Train one model variant");
  train->add_option("--bundle", bundle_dir, "Prepared bundle directory")->required();
  train->add_option("--variant", variant, "concat | crossatt | ternary")->required();
  train->add_option("--out", out, "Checkpoint output path")->required();
  train_flags.add_to(train);

  auto *evaluate = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
  evaluate->add_option("--bundle", bundle_dir, "Prepared bundle directory")->required();
  evaluate->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  evaluate->add_option("--out", out, "Also write the JSON report here");
  evaluate->add_option("--format", format, "table | json")
      ->check(CLI::IsMember({"table", "json"}));

  auto *asa = app.add_subcommand(
      "asa-report", "Reference-pair and cold-drug holdout report for ASA");
  asa->add_option("--bundle", bundle_dir, "Prepared bundle directory")->required();
  asa->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  asa->add_option("--out", out, "Also write the JSON report here");
  asa->add_option("--format", format, "table | json")
      ->check(CLI::IsMember({"table", "json"}));

  auto *ablate = app.add_subcommand(
      "ablate", "Train and compare all three variants under one config");
  ablate->add_option("--bundle", bundle_dir, "Prepared bundle directory")->required();
  ablate->add_option("--out", out, "Output directory")->required();
  ablate_flags.add_to(ablate);

  auto *predict = app.add_subcommand("predict", "Score one SMILES pair");
  predict->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  predict->add_option("--smiles-a", smiles_a, "First molecule")->required();
  predict->add_option("--smiles-b", smiles_b, "Second molecule")->required();

  try {
    app.parse(argc, argv);
    if (prepare->parsed())
      return cmd_prepare(pairs, out, seed, train_fraction, reference);
    if (synth->parsed()) return cmd_synth(out, seed, n_pairs);
    if (train->parsed()) return cmd_train(bundle_dir, variant, out, train_flags);
    if (evaluate->parsed()) return cmd_evaluate(bundle_dir, checkpoint, out, format);
    if (asa->parsed()) return cmd_asa_report(bundle_dir, checkpoint, out, format);
    if (ablate->parsed()) return cmd_ablate(bundle_dir, out, ablate_flags);
    if (predict->parsed()) return cmd_predict(checkpoint, smiles_a, smiles_b);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 64;
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
