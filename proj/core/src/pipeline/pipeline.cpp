#include "ddi/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ddi/data/dataset.hpp"
#include "ddi/num/params.hpp"
#include "ddi/pipeline/metrics.hpp"
#include "ddi/util/hash.hpp"

namespace ddi::pipeline {
using nlohmann::json;
using Graph = chemgraph::FeaturizedGraph;

namespace {

std::string fmt(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  return buf;
}

std::vector<const Graph *> batch_mols(const std::vector<const data::PairRecord *> &pairs,
                                      const chemgraph::GraphCache &cache) {
  std::vector<const Graph *> mols;
  mols.reserve(pairs.size() * 2);
  for (const auto *p : pairs) {
    mols.push_back(&cache.at(p->smiles1).features);
    mols.push_back(&cache.at(p->smiles2).features);
  }
  return mols;
}

enum class Phase { Binary = 1, Multiclass = 2 };

const char *phase_name(Phase p) {
  return p == Phase::Binary ? "binary" : "multiclass";
}

bool trains_in_phase(const std::string &name, Phase phase,
                     bool freeze_trunk_phase2) {
  bool is_multi_head = name.rfind("heads/multi/", 0) == 0;
  bool is_binary_head = name.rfind("heads/binary/", 0) == 0;
  if (phase == Phase::Binary) return !is_multi_head;
  if (is_binary_head) return false;
  if (freeze_trunk_phase2) return is_multi_head;
  return true;
}

void run_phase(ModelF &m, Phase phase, const std::vector<data::PairRecord> &train_set,
               const chemgraph::GraphCache &cache, const TrainConfig &config,
               std::ostringstream &log, std::vector<double> &epoch_losses) {
  std::map<std::string, num::AdamState<float>> opt;  // fresh per phase
  std::uint64_t phase_seed =
      num::hash_combine(config.seed, static_cast<std::uint64_t>(phase));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    num::Prng shuffle_rng =
        num::make_prng(num::hash_combine(phase_seed, static_cast<std::uint64_t>(epoch)));
    num::fisher_yates(order, shuffle_rng);
    double loss_sum = 0;
    long pair_count = 0;
    int n_batches =
        static_cast<int>((order.size() + config.batch_size - 1) / config.batch_size);
    for (int b = 0; b < n_batches; ++b) {
      std::vector<const data::PairRecord *> batch;
      std::vector<int> bin_labels, type_labels;
      for (std::size_t i = static_cast<std::size_t>(b) * config.batch_size;
           i < std::min(order.size(),
                        static_cast<std::size_t>(b + 1) * config.batch_size);
           ++i) {
        const auto &p = train_set[order[i]];
        batch.push_back(&p);
        bin_labels.push_back(p.binary_label);
        type_labels.push_back(p.type_code);
      }
      num::Tape<float> tape;
      num::DropoutKey key{phase_seed, static_cast<std::uint64_t>(epoch),
                          static_cast<std::uint64_t>(b), 0};
      auto out = m.forward_batch(tape, batch_mols(batch, cache), true, key);
      typename num::Tape<float>::Id loss =
          phase == Phase::Binary
              ? tape.bce_with_logits(out.binary_logits, bin_labels)
              : tape.masked_cross_entropy(out.class_logits, type_labels);
      double loss_val = tape.value(loss).v[0];
      if (!std::isfinite(loss_val))
        throw NonFiniteLoss(std::string(phase_name(phase)) + " phase, epoch " +
                            std::to_string(epoch) + ", batch " +
                            std::to_string(b));
      tape.backward(loss);
      m.apply_gradients(tape, [&](const std::string &name,
                                  num::Tensor<float> &param,
                                  const num::Tensor<float> &grad) {
        if (!trains_in_phase(name, phase, config.freeze_trunk_phase2)) return;
        auto it = opt.find(name);
        if (it == opt.end())
          it = opt.emplace(name, num::AdamState<float>(param.n_rows, param.n_cols))
                   .first;
        num::adam_step(param, grad, it->second, config.schedule, epoch);
      });
      loss_sum += loss_val * static_cast<double>(batch.size());
      pair_count += static_cast<long>(batch.size());
    }
    double mean_loss = pair_count > 0 ? loss_sum / pair_count : 0.0;
    epoch_losses.push_back(mean_loss);
    log << "phase=" << phase_name(phase) << " epoch=" << epoch
        << " loss=" << fmt(mean_loss) << " lr=" << fmt(config.schedule.lr(epoch))
        << "\n";
  }
}

}  // namespace

TrainResult train(model::Variant variant, const data::DatasetBundle &bundle,
                  const chemgraph::GraphCache &cache, const TrainConfig &config) {
  TrainConfig cfg = config;
  cfg.model.variant = variant;
  cfg.validate();
  if (bundle.train.empty()) throw EmptyInput("train set is empty");
  TrainResult result{ModelF::init(cfg.model, cfg.seed), "", {}, {}};
  std::ostringstream log;
  run_phase(result.model, Phase::Binary, bundle.train, cache, cfg, log,
            result.binary_epoch_losses);
  run_phase(result.model, Phase::Multiclass, bundle.train, cache, cfg, log,
            result.multiclass_epoch_losses);
  result.log_text = log.str();
  return result;
}

void save_model(const std::string &path, const ModelF &m,
                const TrainConfig &config) {
  std::map<std::string, std::string> meta;
  meta["config"] = config_to_json(config);
  meta["variant"] = model::to_string(m.cfg.variant);
  num::save_checkpoint(path, m.params, meta);
}

ModelF load_model(const std::string &path, TrainConfig *config) {
  std::map<std::string, std::string> meta;
  num::ParamSet<float> params = num::load_checkpoint<float>(path, &meta);
  if (!meta.count("config"))
    throw ConfigMismatch("checkpoint has no embedded config: " + path);
  TrainConfig cfg = config_from_json(meta.at("config"));
  cfg.model.variant = model::variant_from_string(meta.at("variant"));
  ModelF fresh = ModelF::init(cfg.model, cfg.seed);
  // shape-check against a freshly constructed parameter set
  if (fresh.params.entries.size() != params.entries.size())
    throw ConfigMismatch("checkpoint parameter count does not match config");
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    const auto &got = params.entries[i];
    const auto &want = fresh.params.entries[i];
    if (got.name != want.name || !got.tensor.same_shape(want.tensor))
      throw ConfigMismatch("checkpoint parameter " + got.name +
                           " does not match config");
  }
  fresh.params = std::move(params);
  if (config) *config = cfg;
  return fresh;
}

namespace {

struct EvalOutputs {
  std::vector<double> probabilities;
  std::vector<int> predicted_types;
  std::vector<double> confidences;
  std::vector<int> most_attended;  // -1 when no attention
};

EvalOutputs eval_pairs(ModelF &m, const std::vector<const data::PairRecord *> &pairs,
                       const chemgraph::GraphCache &cache, int batch_size) {
  EvalOutputs out;
  bool has_attention = m.cfg.variant != model::Variant::Concat;
  for (std::size_t start = 0; start < pairs.size();
       start += static_cast<std::size_t>(batch_size)) {
    std::vector<const data::PairRecord *> batch(
        pairs.begin() + static_cast<long>(start),
        pairs.begin() + static_cast<long>(
                            std::min(pairs.size(),
                                     start + static_cast<std::size_t>(batch_size))));
    num::Tape<float> tape;
    auto fo = m.forward_batch(tape, batch_mols(batch, cache), false, {});
    const auto &bl = tape.value(fo.binary_logits);
    const auto &cl = tape.value(fo.class_logits);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      out.probabilities.push_back(
          static_cast<double>(num::sigmoid(bl.v[i])));
      std::vector<float> logits(cl.n_cols);
      for (int c = 0; c < cl.n_cols; ++c) logits[c] = cl.at(static_cast<int>(i), c);
      auto probs = num::softmax(logits);
      int arg = 0;
      for (int c = 1; c < cl.n_cols; ++c)
        if (probs[c] > probs[arg]) arg = c;
      out.predicted_types.push_back(arg);
      out.confidences.push_back(static_cast<double>(probs[arg]));
      if (has_attention) {
        auto s = ModelF::summarize_attention(fo.attn_ab[i]);
        out.most_attended.push_back(s.most_attended);
      } else {
        out.most_attended.push_back(-1);
      }
    }
  }
  return out;
}

}  // namespace

MetricsReport evaluate(ModelF &m, const data::DatasetBundle &bundle,
                       const chemgraph::GraphCache &cache,
                       const TrainConfig &config) {
  if (bundle.test.empty()) throw EmptyInput("test set is empty");
  std::vector<const data::PairRecord *> pairs;
  for (const auto &p : bundle.test) pairs.push_back(&p);
  EvalOutputs out = eval_pairs(m, pairs, cache, config.batch_size);

  MetricsReport rep;
  rep.variant = model::to_string(m.cfg.variant);
  std::vector<int> bin_truth, bin_pred;
  std::vector<int> type_truth, type_pred;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    bin_truth.push_back(pairs[i]->binary_label);
    bin_pred.push_back(out.probabilities[i] >= 0.5 ? 1 : 0);
    if (pairs[i]->binary_label == 1) {
      // multi-class metrics are computed over positive pairs only
      type_truth.push_back(pairs[i]->type_code);
      type_pred.push_back(out.predicted_types[i]);
    }
    PairPrediction pp;
    pp.drug1_id = pairs[i]->drug1_id;
    pp.drug2_id = pairs[i]->drug2_id;
    pp.probability = out.probabilities[i];
    pp.predicted_type = out.predicted_types[i];
    pp.confidence = out.confidences[i];
    pp.true_type = pairs[i]->type_code;
    pp.binary_label = pairs[i]->binary_label;
    pp.most_attended = out.most_attended[i];
    rep.predictions.push_back(std::move(pp));
  }
  rep.binary_auc = roc_auc(out.probabilities, bin_truth);
  rep.binary_accuracy = accuracy(bin_pred, bin_truth);
  rep.binary_f1 = f1_binary(bin_pred, bin_truth);
  if (!type_truth.empty()) {
    rep.multi_accuracy = accuracy(type_pred, type_truth);
    rep.multi_f1_macro = f1_macro(type_pred, type_truth, m.cfg.n_classes);
    rep.multi_f1_weighted = f1_weighted(type_pred, type_truth, m.cfg.n_classes);
  }
  rep.parameter_count = m.count_params();
  rep.parameter_breakdown = m.param_breakdown();
  rep.config_echo = config_to_json(config);
  json sums;
  sums["test_pairs"] = util::checksum_hex(data::render_pairs(bundle.test));
  sums["train_pairs"] = util::checksum_hex(data::render_pairs(bundle.train));
  rep.input_checksums = sums.dump();
  return rep;
}

std::string MetricsReport::to_json() const {
  json j;
  j["schema"] = "ddi-metrics-v1";
  j["variant"] = variant;
  j["binary"] = {{"auc", binary_auc},
                 {"accuracy", binary_accuracy},
                 {"f1", binary_f1}};
  j["multiclass"] = {{"accuracy", multi_accuracy},
                     {"f1_macro", multi_f1_macro},
                     {"f1_weighted", multi_f1_weighted}};
  j["parameters"] = {{"total", parameter_count},
                     {"breakdown", parameter_breakdown}};
  j["config"] = json::parse(config_echo.empty() ? "{}" : config_echo);
  j["input_checksums"] =
      json::parse(input_checksums.empty() ? "{}" : input_checksums);
  json preds = json::array();
  for (const auto &p : predictions) {
    preds.push_back({{"drug1", p.drug1_id},
                     {"drug2", p.drug2_id},
                     {"probability", p.probability},
                     {"predicted_type", p.predicted_type},
                     {"confidence", p.confidence},
                     {"true_type", p.true_type},
                     {"binary_label", p.binary_label},
                     {"most_attended", p.most_attended}});
  }
  j["predictions"] = std::move(preds);
  return j.dump(2) + "\n";
}

std::string MetricsReport::render_table() const {
  std::ostringstream os;
  os << "variant: " << variant << "\n"
     << "parameters: " << parameter_count << "\n"
     << "binary    AUC=" << fmt(binary_auc, 4)
     << " accuracy=" << fmt(binary_accuracy, 4) << " F1=" << fmt(binary_f1, 4)
     << "\n"
     << "multiclass accuracy=" << fmt(multi_accuracy, 4)
     << " F1-macro=" << fmt(multi_f1_macro, 4)
     << " F1-weighted=" << fmt(multi_f1_weighted, 4) << "\n";
  return os.str();
}

AsaReport asa_report(ModelF &m, const data::DatasetBundle &bundle,
                     const chemgraph::GraphCache &cache,
                     const TrainConfig &config) {
  if (bundle.reference_pairs.empty()) {
    std::string ids;
    for (const auto &e : data::kReferenceExpectations)
      ids += std::string(ids.empty() ? "" : ", ") + e.drugbank_id;
    throw MissingReferenceData(
        "reference SMILES file required; provide SMILES for: " + ids);
  }
  AsaReport rep;
  rep.variant = model::to_string(m.cfg.variant);
  bool has_attention = m.cfg.variant != model::Variant::Concat;
  const Graph &asa = cache.at(data::kAsaSmiles).features;

  for (const auto &exp : data::kReferenceExpectations) {
    const data::ReferencePair *ref = nullptr;
    for (const auto &r : bundle.reference_pairs)
      if (r.drugbank_id == exp.drugbank_id) ref = &r;
    if (!ref)
      throw MissingReferenceData(std::string("no SMILES for ") + exp.drugbank_id);
    const Graph &partner = cache.at(ref->smiles).features;
    num::Tape<float> tape;
    auto fo = m.forward_batch(tape, {&asa, &partner}, false, {});
    AsaReportRow row;
    row.partner_name = exp.name;
    row.drugbank_id = exp.drugbank_id;
    row.expected_label = exp.label;
    row.probability =
        static_cast<double>(num::sigmoid(tape.value(fo.binary_logits).v[0]));
    row.correct = (row.probability >= 0.5 ? 1 : 0) == exp.label;
    if (has_attention) {
      auto s = ModelF::summarize_attention(fo.attn_ab[0]);
      row.most_attended = s.most_attended;
      row.most_attended_weight = s.weights[s.most_attended];
    }
    if (row.correct) ++rep.reference_correct;
    rep.reference_rows.push_back(std::move(row));
  }

  std::vector<const data::PairRecord *> holdout;
  for (const auto &p : bundle.asa_holdout) holdout.push_back(&p);
  EvalOutputs out = eval_pairs(m, holdout, cache, config.batch_size);
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    AsaTypeRow row;
    row.partner_id = holdout[i]->drug1_id == data::kAsaDrugId
                         ? holdout[i]->drug2_id
                         : holdout[i]->drug1_id;
    row.true_type = holdout[i]->type_code;
    row.predicted_type = out.predicted_types[i];
    row.confidence = out.confidences[i];
    row.correct = row.predicted_type == row.true_type;
    if (i < 10 && row.correct) ++rep.first10_correct;
    rep.holdout_rows.push_back(std::move(row));
  }
  return rep;
}

std::string AsaReport::to_json() const {
  json j;
  j["schema"] = "ddi-asa-report-v1";
  j["variant"] = variant;
  json refs = json::array();
  for (const auto &r : reference_rows)
    refs.push_back({{"partner", r.partner_name},
                    {"drugbank_id", r.drugbank_id},
                    {"label", r.expected_label},
                    {"probability", r.probability},
                    {"correct", r.correct},
                    {"most_attended", r.most_attended},
                    {"most_attended_weight", r.most_attended_weight}});
  j["reference"] = std::move(refs);
  j["reference_correct"] = reference_correct;
  json rows = json::array();
  for (const auto &r : holdout_rows)
    rows.push_back({{"partner_id", r.partner_id},
                    {"true_type", r.true_type},
                    {"predicted_type", r.predicted_type},
                    {"confidence", r.confidence},
                    {"correct", r.correct}});
  j["holdout"] = std::move(rows);
  j["first10_correct"] = first10_correct;
  return j.dump(2) + "\n";
}

std::string AsaReport::render_table() const {
  std::ostringstream os;
  os << "variant: " << variant << "\n";
  os << "reference pairs (" << reference_correct << "/"
     << reference_rows.size() << " correct)\n";
  for (const auto &r : reference_rows) {
    os << "  " << r.partner_name << " (" << r.drugbank_id
       << ") label=" << r.expected_label << " P=" << fmt(r.probability, 3)
       << (r.correct ? " ok" : " x");
    if (r.most_attended >= 0)
      os << " most_attended=" << r.most_attended << " ("
         << fmt(r.most_attended_weight, 3) << ")";
    os << "\n";
  }
  os << "ASA holdout type predictions (first 10: " << first10_correct
     << "/" << std::min<std::size_t>(10, holdout_rows.size()) << " correct)\n";
  std::size_t shown = 0;
  for (const auto &r : holdout_rows) {
    if (shown++ >= 10) break;
    os << "  " << r.partner_id << " true=" << r.true_type << " pred="
       << r.predicted_type << " / " << fmt(r.confidence, 3)
       << (r.correct ? " ok" : " x") << "\n";
  }
  return os.str();
}

AblateResult ablate(const data::DatasetBundle &bundle,
                    const chemgraph::GraphCache &cache,
                    const TrainConfig &config, const std::string &out_dir) {
  AblateResult result;
  for (model::Variant v : {model::Variant::Concat, model::Variant::CrossAtt,
                           model::Variant::Ternary}) {
    TrainResult tr = train(v, bundle, cache, config);
    if (!out_dir.empty()) {
      TrainConfig cfg = config;
      cfg.model.variant = v;
      save_model(out_dir + "/checkpoint_" + model::to_string(v) + ".bin",
                 tr.model, cfg);
      util::write_file(out_dir + "/train_" + model::to_string(v) + ".log",
                       tr.log_text);
    }
    result.reports.push_back(evaluate(tr.model, bundle, cache, config));
  }
  result.param_delta_crossatt_concat =
      result.reports[1].parameter_count - result.reports[0].parameter_count;
  result.delta_auc = result.reports[1].binary_auc - result.reports[0].binary_auc;
  result.delta_f1_macro =
      result.reports[1].multi_f1_macro - result.reports[0].multi_f1_macro;
  return result;
}

std::string AblateResult::to_json() const {
  json j;
  j["schema"] = "ddi-ablate-v1";
  for (const auto &r : reports)
    j["variants"][r.variant] = json::parse(r.to_json());
  j["deltas"] = {{"parameters_crossatt_minus_concat", param_delta_crossatt_concat},
                 {"auc_crossatt_minus_concat", delta_auc},
                 {"f1_macro_crossatt_minus_concat", delta_f1_macro}};
  return j.dump(2) + "\n";
}

std::string AblateResult::render_table() const {
  std::ostringstream os;
  os << "metric          ";
  for (const auto &r : reports) os << "  " << r.variant;
  os << "\n";
  auto row = [&](const std::string &name, auto get) {
    os << name;
    for (std::size_t i = name.size(); i < 16; ++i) os << ' ';
    for (const auto &r : reports) os << "  " << get(r);
    os << "\n";
  };
  row("parameters", [](const MetricsReport &r) { return std::to_string(r.parameter_count); });
  row("AUC", [](const MetricsReport &r) { return fmt(r.binary_auc, 4); });
  row("accuracy", [](const MetricsReport &r) { return fmt(r.binary_accuracy, 4); });
  row("F1", [](const MetricsReport &r) { return fmt(r.binary_f1, 4); });
  row("mc accuracy", [](const MetricsReport &r) { return fmt(r.multi_accuracy, 4); });
  row("F1-macro", [](const MetricsReport &r) { return fmt(r.multi_f1_macro, 4); });
  row("F1-weighted", [](const MetricsReport &r) { return fmt(r.multi_f1_weighted, 4); });
  os << "delta(AUC) crossatt-concat: " << fmt(delta_auc, 4) << "\n";
  os << "delta(F1-macro) crossatt-concat: " << fmt(delta_f1_macro, 4) << "\n";
  os << "delta(parameters) crossatt-concat: " << param_delta_crossatt_concat
     << "\n";
  return os.str();
}

std::string config_to_json(const TrainConfig &config) {
  json j;
  j["epochs"] = config.epochs;
  j["batch_size"] = config.batch_size;
  j["seed"] = config.seed;
  j["base_lr"] = config.schedule.base_lr;
  j["lr_gamma"] = config.schedule.gamma;
  j["lr_period"] = config.schedule.period;
  j["freeze_trunk_phase2"] = config.freeze_trunk_phase2;
  j["hidden_dim"] = config.model.hidden_dim;
  j["n_mp_layers"] = config.model.n_mp_layers;
  j["n_heads"] = config.model.n_heads;
  j["dropout_p"] = config.model.dropout_p;
  j["n_classes"] = config.model.n_classes;
  j["atom_dim"] = config.model.atom_dim;
  j["bond_dim"] = config.model.bond_dim;
  j["variant"] = model::to_string(config.model.variant);
  j["topk"] = config.model.topk;
  j["head_hidden"] = config.model.head_hidden;
  return j.dump();
}

TrainConfig config_from_json(const std::string &text) {
  json j = json::parse(text);
  TrainConfig c;
  static const std::set<std::string> known = {
      "epochs", "batch_size", "seed", "base_lr", "lr_gamma", "lr_period",
      "freeze_trunk_phase2", "hidden_dim", "n_mp_layers", "n_heads",
      "dropout_p", "n_classes", "atom_dim", "bond_dim", "variant", "topk",
      "head_hidden"};
  for (const auto &[key, value] : j.items()) {
    (void)value;
    if (!known.count(key))
      throw ConfigMismatch("unknown config key '" + key + "'");
  }
  if (j.count("epochs")) c.epochs = j["epochs"];
  if (j.count("batch_size")) c.batch_size = j["batch_size"];
  if (j.count("seed")) c.seed = j["seed"];
  if (j.count("base_lr")) c.schedule.base_lr = j["base_lr"];
  if (j.count("lr_gamma")) c.schedule.gamma = j["lr_gamma"];
  if (j.count("lr_period")) c.schedule.period = j["lr_period"];
  if (j.count("freeze_trunk_phase2"))
    c.freeze_trunk_phase2 = j["freeze_trunk_phase2"];
  if (j.count("hidden_dim")) c.model.hidden_dim = j["hidden_dim"];
  if (j.count("n_mp_layers")) c.model.n_mp_layers = j["n_mp_layers"];
  if (j.count("n_heads")) c.model.n_heads = j["n_heads"];
  if (j.count("dropout_p")) c.model.dropout_p = j["dropout_p"];
  if (j.count("n_classes")) c.model.n_classes = j["n_classes"];
  if (j.count("atom_dim")) c.model.atom_dim = j["atom_dim"];
  if (j.count("bond_dim")) c.model.bond_dim = j["bond_dim"];
  if (j.count("variant"))
    c.model.variant = model::variant_from_string(j["variant"]);
  if (j.count("topk")) c.model.topk = j["topk"];
  if (j.count("head_hidden")) c.model.head_hidden = j["head_hidden"];
  c.validate();
  return c;
}

}  // namespace ddi::pipeline
