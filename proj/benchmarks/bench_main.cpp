#include <benchmark/benchmark.h>

#include "ddi/chemgraph/cache.hpp"
#include "ddi/model/model.hpp"
#include "ddi/num/tape.hpp"

namespace {

using namespace ddi;

num::Tensor<float> random_matrix(int r, int c, std::uint64_t seed) {
  num::Prng rng = num::make_prng(seed);
  num::Tensor<float> t(r, c);
  for (auto &x : t.v) x = static_cast<float>(num::uniform_real(rng, -1.0, 1.0));
  return t;
}

void BM_Matmul(benchmark::State &state) {
  int n = static_cast<int>(state.range(0));
  auto a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) {
    num::Tape<float> tape;
    auto c = tape.matmul(tape.leaf(a), tape.leaf(b));
    benchmark::DoNotOptimize(tape.value(c).v.data());
  }
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128);

const std::vector<std::string> kMols = {
    "CC(=O)Oc1ccccc1C(=O)O", "CCN(CC)CCOC(=O)c1ccc(N)cc1",
    "c1ccc2c(c1)cccc2", "CC(C)Cc1ccc(cc1)C(C)C(=O)O"};

void BM_ForwardPair(benchmark::State &state) {
  auto variant = static_cast<model::Variant>(state.range(0));
  auto cache = chemgraph::GraphCache::build(kMols);
  model::ModelConfig cfg;
  cfg.variant = variant;
  auto m = model::Model<float>::init(cfg, 42);
  std::vector<const chemgraph::FeaturizedGraph *> mols = {
      &cache.at(kMols[0]).features, &cache.at(kMols[1]).features,
      &cache.at(kMols[2]).features, &cache.at(kMols[3]).features};
  for (auto _ : state) {
    num::Tape<float> tape;
    auto out = m.forward_batch(tape, mols, false, {});
    benchmark::DoNotOptimize(tape.value(out.binary_logits).v.data());
  }
}
BENCHMARK(BM_ForwardPair)
    ->Arg(static_cast<int>(model::Variant::Concat))
    ->Arg(static_cast<int>(model::Variant::CrossAtt))
    ->Arg(static_cast<int>(model::Variant::Ternary));

void BM_TrainStep(benchmark::State &state) {
  auto cache = chemgraph::GraphCache::build(kMols);
  model::ModelConfig cfg;
  cfg.variant = model::Variant::CrossAtt;
  auto m = model::Model<float>::init(cfg, 42);
  std::vector<const chemgraph::FeaturizedGraph *> mols = {
      &cache.at(kMols[0]).features, &cache.at(kMols[1]).features,
      &cache.at(kMols[2]).features, &cache.at(kMols[3]).features};
  std::vector<int> labels = {1, 0};
  for (auto _ : state) {
    num::Tape<float> tape;
    auto out = m.forward_batch(tape, mols, true, {42, 0, 0, 0});
    auto loss = tape.bce_with_logits(out.binary_logits, labels);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(out.binary_logits).v.data());
  }
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
