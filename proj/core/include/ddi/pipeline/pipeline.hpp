#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ddi/chemgraph/cache.hpp"
#include "ddi/data/records.hpp"
#include "ddi/model/model.hpp"
#include "ddi/num/adam.hpp"

namespace ddi::pipeline {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 64;
  std::uint64_t seed = 42;
  num::StepSchedule schedule{0.001, 0.5, 20};
  bool freeze_trunk_phase2 = false;  // phase 2 fine-tunes the shared trunk
  model::ModelConfig model;

  void validate() const {
    if (epochs < 1 || batch_size < 1)
      throw ConfigMismatch("epochs and batch_size must be positive");
    model.validate();
  }
};

using ModelF = model::Model<float>;

struct TrainResult {
  ModelF model;
  std::string log_text;  // one record per epoch: phase, epoch, loss, lr
  std::vector<double> binary_epoch_losses;
  std::vector<double> multiclass_epoch_losses;
};

// Sequential two-phase training: binary head (BCE over all pairs), then the
// multi-class head (masked cross-entropy) with the binary head frozen.
TrainResult train(model::Variant variant, const data::DatasetBundle &bundle,
                  const chemgraph::GraphCache &cache, const TrainConfig &config);

void save_model(const std::string &path, const ModelF &m,
                const TrainConfig &config);
ModelF load_model(const std::string &path, TrainConfig *config = nullptr);

struct PairPrediction {
  std::string drug1_id;
  std::string drug2_id;
  double probability = 0.0;  // sigmoid of binary logit
  int predicted_type = -1;
  double confidence = 0.0;  // max softmax of the multi-class head
  int true_type = -1;
  int binary_label = 0;
  int most_attended = -1;  // partner-atom index; -1 when variant lacks attention
};

struct MetricsReport {
  std::string variant;
  double binary_auc = 0, binary_accuracy = 0, binary_f1 = 0;
  double multi_accuracy = 0, multi_f1_macro = 0, multi_f1_weighted = 0;
  long parameter_count = 0;
  std::map<std::string, long> parameter_breakdown;
  std::vector<PairPrediction> predictions;
  std::string config_echo;      // serialized effective config
  std::string input_checksums;  // bundle provenance

  std::string to_json() const;
  std::string render_table() const;
};

MetricsReport evaluate(ModelF &m, const data::DatasetBundle &bundle,
                       const chemgraph::GraphCache &cache,
                       const TrainConfig &config);

struct AsaReportRow {
  std::string partner_name;
  std::string drugbank_id;
  int expected_label = 0;
  double probability = 0.0;
  bool correct = false;
  int most_attended = -1;
  double most_attended_weight = 0.0;
};

struct AsaTypeRow {
  std::string partner_id;
  int true_type = -1;
  int predicted_type = -1;
  double confidence = 0.0;
  bool correct = false;
};

struct AsaReport {
  std::string variant;
  std::vector<AsaReportRow> reference_rows;  // 7 curated pairs
  int reference_correct = 0;
  std::vector<AsaTypeRow> holdout_rows;  // all ASA holdout pairs
  int first10_correct = 0;               // correctness over the first 10 rows

  std::string to_json() const;
  std::string render_table() const;
};

AsaReport asa_report(ModelF &m, const data::DatasetBundle &bundle,
                     const chemgraph::GraphCache &cache,
                     const TrainConfig &config);

struct AblateResult {
  std::vector<MetricsReport> reports;  // concat, crossatt, ternary order
  long param_delta_crossatt_concat = 0;
  double delta_auc = 0;       // CrossAtt - Concat
  double delta_f1_macro = 0;  // CrossAtt - Concat

  std::string to_json() const;
  std::string render_table() const;
};

// Trains and evaluates all three variants under one config; checkpoints are
// written to out_dir (checkpoint_<variant>.bin) when out_dir is non-empty.
AblateResult ablate(const data::DatasetBundle &bundle,
                    const chemgraph::GraphCache &cache,
                    const TrainConfig &config, const std::string &out_dir = "");

std::string config_to_json(const TrainConfig &config);
TrainConfig config_from_json(const std::string &text);

}  // namespace ddi::pipeline
