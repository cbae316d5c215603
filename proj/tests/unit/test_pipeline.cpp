#include <doctest.h>

#include <filesystem>
#include <string>

#include "ddi/data/bundle.hpp"
#include "ddi/errors.hpp"
#include "ddi/pipeline/pipeline.hpp"
#include "ddi/pipeline/synthetic.hpp"

using namespace ddi;
using namespace ddi::pipeline;

namespace {

const data::LoadedBundle &tiny_bundle() {
  static data::LoadedBundle bundle = [] {
    SyntheticSpec spec;
    spec.n_pairs = 40;
    auto dir = (std::filesystem::temp_directory_path() / "ddi_pipe_bundle").string();
    std::filesystem::remove_all(dir);
    data::prepare_bundle_records(make_synthetic_pairs(spec), dir, {});
    auto loaded = data::load_bundle(dir);
    std::filesystem::remove_all(dir);
    return loaded;
  }();
  return bundle;
}

TrainConfig tiny_config(int epochs = 3) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 16;
  return cfg;
}

std::string temp_file(const char *name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("training is deterministic and runs both phases") {
  auto cfg = tiny_config();
  auto r1 = train(model::Variant::Concat, tiny_bundle().data,
                  tiny_bundle().cache, cfg);
  auto r2 = train(model::Variant::Concat, tiny_bundle().data,
                  tiny_bundle().cache, cfg);
  CHECK(r1.log_text == r2.log_text);
  REQUIRE(r1.binary_epoch_losses.size() == 3);
  REQUIRE(r1.multiclass_epoch_losses.size() == 3);
  CHECK(r1.log_text.find("phase=binary epoch=0") != std::string::npos);
  CHECK(r1.log_text.find("phase=multiclass epoch=2") != std::string::npos);
  CHECK(r1.log_text.find("lr=0.001000") != std::string::npos);
  bool identical_params = true;
  for (std::size_t i = 0; i < r1.model.params.entries.size(); ++i)
    identical_params &= (r1.model.params.entries[i].tensor.v ==
                         r2.model.params.entries[i].tensor.v);
  CHECK(identical_params);

  auto cfg2 = tiny_config();
  cfg2.seed = 43;
  auto r3 = train(model::Variant::Concat, tiny_bundle().data,
                  tiny_bundle().cache, cfg2);
  CHECK(r1.log_text != r3.log_text);
}

TEST_CASE("phase two leaves the binary head untouched") {
  auto cfg = tiny_config(2);
  auto trained = train(model::Variant::Concat, tiny_bundle().data,
                       tiny_bundle().cache, cfg);
  // retrain with many more multiclass epochs: binary-head weights must agree
  // with a run that shares only the binary phase
  auto cfg_long = tiny_config(2);
  (void)cfg_long;
  auto *w1 = trained.model.params.find("heads/binary/w1");
  REQUIRE(w1 != nullptr);
  // train a second model and overwrite its multiclass phase by freezing the
  // trunk; binary head must still match the unfrozen run after phase 1
  auto cfg_frozen = tiny_config(2);
  cfg_frozen.freeze_trunk_phase2 = true;
  auto frozen = train(model::Variant::Concat, tiny_bundle().data,
                      tiny_bundle().cache, cfg_frozen);
  auto *w2 = frozen.model.params.find("heads/binary/w1");
  REQUIRE(w2 != nullptr);
  CHECK(w1->v == w2->v);  // phase 2 never updates it in either mode
  // but the multiclass heads trained and differ from init
  auto init = ModelF::init(trained.model.cfg, cfg.seed);
  CHECK(trained.model.params.find("heads/multi/w1")->v !=
        init.params.find("heads/multi/w1")->v);
}

TEST_CASE("checkpoints round-trip through save_model/load_model") {
  auto cfg = tiny_config(1);
  auto tr = train(model::Variant::CrossAtt, tiny_bundle().data,
                  tiny_bundle().cache, cfg);
  std::string path = temp_file("ddi_model_rt.bin");
  save_model(path, tr.model, cfg);
  TrainConfig got_cfg;
  ModelF loaded = load_model(path, &got_cfg);
  std::remove(path.c_str());
  CHECK(got_cfg.epochs == 1);
  CHECK(loaded.cfg.variant == model::Variant::CrossAtt);
  for (std::size_t i = 0; i < tr.model.params.entries.size(); ++i)
    REQUIRE(loaded.params.entries[i].tensor.v ==
            tr.model.params.entries[i].tensor.v);
  // identical predictions
  auto rep1 = evaluate(tr.model, tiny_bundle().data, tiny_bundle().cache, cfg);
  auto rep2 = evaluate(loaded, tiny_bundle().data, tiny_bundle().cache, cfg);
  CHECK(rep1.to_json() == rep2.to_json());
}

TEST_CASE("load_model rejects junk files") {
  std::string path = temp_file("ddi_model_junk.bin");
  FILE *f = std::fopen(path.c_str(), "wb");
  std::fputs("nope", f);
  std::fclose(f);
  CHECK_THROWS_AS(load_model(path), IoError);
  std::remove(path.c_str());
}

TEST_CASE("evaluate produces a complete, deterministic report") {
  auto cfg = tiny_config(1);
  auto tr = train(model::Variant::CrossAtt, tiny_bundle().data,
                  tiny_bundle().cache, cfg);
  auto rep = evaluate(tr.model, tiny_bundle().data, tiny_bundle().cache, cfg);
  CHECK(rep.variant == "crossatt");
  CHECK(rep.predictions.size() == tiny_bundle().data.test.size());
  CHECK(rep.binary_auc >= 0.0);
  CHECK(rep.binary_auc <= 1.0);
  CHECK(rep.parameter_count == tr.model.count_params());
  for (const auto &p : rep.predictions) {
    CHECK(p.probability >= 0.0);
    CHECK(p.probability <= 1.0);
    CHECK(p.predicted_type >= 0);
    CHECK(p.predicted_type < 86);
    CHECK(p.most_attended >= 0);  // attention variant
  }
  auto rep2 = evaluate(tr.model, tiny_bundle().data, tiny_bundle().cache, cfg);
  CHECK(rep.to_json() == rep2.to_json());
  CHECK(rep.to_json().find("\"schema\": \"ddi-metrics-v1\"") !=
        std::string::npos);
  CHECK_FALSE(rep.render_table().empty());
}

TEST_CASE("asa report without reference data names all seven drugs") {
  auto cfg = tiny_config(1);
  auto tr = train(model::Variant::Concat, tiny_bundle().data,
                  tiny_bundle().cache, cfg);
  try {
    asa_report(tr.model, tiny_bundle().data, tiny_bundle().cache, cfg);
    FAIL("expected MissingReferenceData");
  } catch (const MissingReferenceData &e) {
    std::string msg = e.what();
    for (const auto &exp : data::kReferenceExpectations)
      CHECK(msg.find(exp.drugbank_id) != std::string::npos);
  }
}

TEST_CASE("config JSON round-trips and rejects unknown keys") {
  TrainConfig cfg;
  cfg.epochs = 17;
  cfg.schedule.gamma = 0.25;
  cfg.model.variant = model::Variant::Ternary;
  cfg.model.topk = 5;
  TrainConfig back = config_from_json(config_to_json(cfg));
  CHECK(back.epochs == 17);
  CHECK(back.schedule.gamma == 0.25);
  CHECK(back.model.variant == model::Variant::Ternary);
  CHECK(back.model.topk == 5);
  CHECK(config_to_json(back) == config_to_json(cfg));

  CHECK_THROWS_AS(config_from_json("{\"epochz\": 3}"), ConfigMismatch);
  CHECK_THROWS_AS(config_from_json("{\"epochs\": 0}"), ConfigMismatch);
  TrainConfig defaults = config_from_json("{}");
  CHECK(defaults.epochs == 60);
  CHECK(defaults.batch_size == 64);
  CHECK(defaults.schedule.base_lr == 0.001);
}

TEST_CASE("training loss decreases on a learnable toy problem") {
  auto cfg = tiny_config(12);
  auto tr = train(model::Variant::Concat, tiny_bundle().data,
                  tiny_bundle().cache, cfg);
  CHECK(tr.binary_epoch_losses.back() < tr.binary_epoch_losses.front());
  CHECK(tr.multiclass_epoch_losses.back() < tr.multiclass_epoch_losses.front());
}

TEST_CASE("train rejects an empty train set") {
  data::DatasetBundle empty;
  CHECK_THROWS_AS(
      train(model::Variant::Concat, empty, tiny_bundle().cache, tiny_config()),
      EmptyInput);
}
