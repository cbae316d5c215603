#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "ddi/errors.hpp"
#include "ddi/num/rng.hpp"
#include "ddi/num/tape.hpp"

using namespace ddi;
using num::Tape;
using num::Tensor;
using Id = Tape<double>::Id;

namespace {

Tensor<double> random_tensor(int r, int c, std::uint64_t seed,
                             double lo = -1.0, double hi = 1.0) {
  num::Prng rng = num::make_prng(seed);
  Tensor<double> t(r, c);
  for (auto &x : t.v) x = num::uniform_real(rng, lo, hi);
  return t;
}

// Central-difference check of d(loss)/d(inputs) for a scalar-valued graph.
// `build` must construct the same graph from fresh leaves on every call.
void check_gradients(
    std::vector<Tensor<double>> inputs,
    const std::function<Id(Tape<double> &, const std::vector<Id> &)> &build,
    double h = 1e-5, double tol = 1e-4) {
  std::vector<Id> ids;
  Tape<double> tape;
  ids.reserve(inputs.size());
  for (const auto &t : inputs) ids.push_back(tape.leaf(t));
  Id loss = build(tape, ids);
  REQUIRE(tape.value(loss).v.size() == 1);
  tape.backward(loss);
  std::vector<Tensor<double>> analytic;
  for (Id id : ids) analytic.push_back(tape.grad(id));

  auto eval = [&](const std::vector<Tensor<double>> &xs) {
    Tape<double> t2;
    std::vector<Id> ids2;
    for (const auto &x : xs) ids2.push_back(t2.leaf(x));
    return t2.value(build(t2, ids2)).v[0];
  };
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (std::size_t i = 0; i < inputs[t].v.size(); ++i) {
      auto plus = inputs, minus = inputs;
      plus[t].v[i] += h;
      minus[t].v[i] -= h;
      double numeric = (eval(plus) - eval(minus)) / (2 * h);
      double a = analytic[t].v[i];
      double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      INFO("input ", t, " coord ", i, " analytic ", a, " numeric ", numeric);
      CHECK(std::abs(a - numeric) / denom <= tol);
    }
  }
}

// Scalarize an arbitrary output with fixed random weights so every output
// coordinate influences the loss differently.
Id weighted_sum(Tape<double> &tape, Id out, std::uint64_t seed) {
  const auto &v = tape.value(out);
  Id w = tape.leaf(random_tensor(v.n_rows, v.n_cols, seed));
  return tape.mean_all(tape.mul(out, w));
}

}  // namespace

TEST_CASE("gradients: elementwise and shape ops") {
  auto a = random_tensor(3, 4, 1);
  auto b = random_tensor(3, 4, 2);
  auto bias = random_tensor(1, 4, 3);
  check_gradients({a, b}, [](Tape<double> &t, const std::vector<Id> &in) {
    return weighted_sum(t, t.add(in[0], in[1]), 90);
  });
  check_gradients({a, bias}, [](Tape<double> &t, const std::vector<Id> &in) {
    return weighted_sum(t, t.add_rowvec(in[0], in[1]), 91);
  });
  check_gradients({a, b}, [](Tape<double> &t, const std::vector<Id> &in) {
    return weighted_sum(t, t.mul(in[0], in[1]), 92);
  });
  check_gradients({a}, [](Tape<double> &t, const std::vector<Id> &in) {
    return weighted_sum(t, t.scale(in[0], -2.5), 93);
  });
  // keep values away from the relu kink
  auto pos = random_tensor(3, 4, 4);
  for (auto &x : pos.v) x += (x >= 0 ? 0.5 : -0.5);
  check_gradients({pos}, [](Tape<double> &t, const std::vector<Id> &in) {
    return weighted_sum(t, t.relu(in[0]), 94);
  });
  check_gradients({a}, [](Tape<double> &t, const std::vector<Id> &in) {
    return weighted_sum(t, t.slice_rows(in[0], 1, 2), 95);
  });
  check_gradients({a, b}, [](Tape<double> &t, const std::vector<Id> &in) {
    return weighted_sum(t, t.concat_rows({in[0], in[1], in[0]}), 96);
  });
  check_gradients({random_tensor(4, 3, 5)},
                  [](Tape<double> &t, const std::vector<Id> &in) {
                    return weighted_sum(t, t.pair_concat(in[0]), 97);
                  });
  check_gradients({a}, [](Tape<double> &t, const std::vector<Id> &in) {
    return t.mean_all(in[0]);
  });
}

TEST_CASE("gradients: matmul with and without transpose") {
  auto a = random_tensor(3, 5, 6);
  auto b = random_tensor(5, 2, 7);
  check_gradients({a, b}, [](Tape<double> &t, const std::vector<Id> &in) {
    return weighted_sum(t, t.matmul(in[0], in[1]), 98);
  });
  auto bt = random_tensor(2, 5, 8);
  check_gradients({a, bt}, [](Tape<double> &t, const std::vector<Id> &in) {
    return weighted_sum(t, t.matmul(in[0], in[1], true), 99);
  });
}

TEST_CASE("gradients: softmax, segment mean, gather") {
  check_gradients({random_tensor(4, 6, 9)},
                  [](Tape<double> &t, const std::vector<Id> &in) {
                    return weighted_sum(t, t.softmax_rows(in[0]), 100);
                  });
  std::vector<int> seg = {0, 0, 1, 2, 2, 2};
  check_gradients({random_tensor(6, 3, 10)},
                  [seg](Tape<double> &t, const std::vector<Id> &in) {
                    return weighted_sum(t, t.segment_mean(in[0], seg, 3), 101);
                  });
  std::vector<int> idx = {2, 0, 1, 0};
  std::vector<double> gates = {0.5, 1.0, -0.25, 2.0};
  check_gradients({random_tensor(3, 4, 11)},
                  [idx, gates](Tape<double> &t, const std::vector<Id> &in) {
                    return weighted_sum(
                        t, t.gather_rows_scaled(in[0], idx, gates), 102);
                  });
}

TEST_CASE("gradients: cosine pair gates and row scaling") {
  std::vector<int> ia = {0, 0, 2, 3};
  std::vector<int> ib = {1, 3, 4, 4};
  check_gradients({random_tensor(5, 4, 30)},
                  [ia, ib](Tape<double> &t, const std::vector<Id> &in) {
                    return weighted_sum(t, t.cosine_pairs(in[0], ia, ib), 103);
                  });
  check_gradients({random_tensor(4, 3, 31), random_tensor(4, 1, 32)},
                  [](Tape<double> &t, const std::vector<Id> &in) {
                    return weighted_sum(t, t.scale_rows(in[0], in[1]), 104);
                  });
}

TEST_CASE("cosine pairs: values and zero-norm rows") {
  Tape<double> t;
  Tensor<double> x(3, 2);
  x.at(0, 0) = 3.0;  // row 0: (3, 0)
  x.at(1, 1) = 2.0;  // row 1: (0, 2), orthogonal to row 0
  // row 2 stays all-zero
  Id a = t.leaf(x);
  Id s = t.cosine_pairs(a, {0, 0, 0}, {0, 1, 2});
  CHECK(t.value(s).at(0, 0) == doctest::Approx(1.0));
  CHECK(t.value(s).at(1, 0) == doctest::Approx(0.0));
  CHECK(t.value(s).at(2, 0) == 0.0);
  t.backward(t.mean_all(s));
  for (int c = 0; c < 2; ++c) CHECK(t.grad(a).at(2, c) == 0.0);
}

TEST_CASE("gradients: edge message") {
  int in_dim = 3, out_dim = 2;
  auto h = random_tensor(3, in_dim, 12);
  auto mats = random_tensor(4, in_dim * out_dim, 13);
  std::vector<int> src = {0, 2, 1, 2};
  check_gradients({h, mats},
                  [src, in_dim, out_dim](Tape<double> &t,
                                         const std::vector<Id> &in) {
                    return weighted_sum(
                        t, t.edge_message(in[0], in[1], src, in_dim, out_dim),
                        103);
                  });
}

TEST_CASE("gradients: layer norm and batch norm") {
  auto a = random_tensor(4, 6, 14);
  auto gamma = random_tensor(1, 6, 15, 0.5, 1.5);
  auto beta = random_tensor(1, 6, 16);
  check_gradients({a, gamma, beta},
                  [](Tape<double> &t, const std::vector<Id> &in) {
                    return weighted_sum(t, t.layer_norm(in[0], in[1], in[2]),
                                        104);
                  });
  check_gradients({a, gamma, beta},
                  [](Tape<double> &t, const std::vector<Id> &in) {
                    num::BnStats<double> stats(6);
                    return weighted_sum(
                        t, t.batch_norm(in[0], in[1], in[2], stats, true), 105);
                  });
  // eval mode normalizes with fixed running stats
  check_gradients({a, gamma, beta},
                  [](Tape<double> &t, const std::vector<Id> &in) {
                    num::BnStats<double> stats(6);
                    for (int c = 0; c < 6; ++c) {
                      stats.running_mean.v[c] = 0.1 * c;
                      stats.running_var.v[c] = 1.0 + 0.05 * c;
                    }
                    return weighted_sum(
                        t, t.batch_norm(in[0], in[1], in[2], stats, false), 106);
                  });
}

TEST_CASE("gradients: dropout with a fixed key") {
  num::DropoutKey key{7, 1, 2, 3};
  check_gradients({random_tensor(5, 4, 17)},
                  [key](Tape<double> &t, const std::vector<Id> &in) {
                    return weighted_sum(t, t.dropout(in[0], 0.3, key, true),
                                        107);
                  });
  // eval mode is the identity
  Tape<double> t;
  auto x = random_tensor(3, 3, 18);
  Id d = t.dropout(t.leaf(x), 0.5, key, false);
  CHECK(t.value(d).v == x.v);
}

TEST_CASE("gradients: multihead attention") {
  int D = 8, heads = 2;
  auto q = random_tensor(3, D, 19);
  auto k = random_tensor(4, D, 20);
  auto v = random_tensor(4, D, 21);
  check_gradients({q, k, v},
                  [heads](Tape<double> &t, const std::vector<Id> &in) {
                    return weighted_sum(
                        t, t.multihead_attention(in[0], in[1], in[2], heads),
                        108);
                  });
}

TEST_CASE("gradients: losses") {
  std::vector<int> bin_labels = {1, 0, 1, 1};
  check_gradients({random_tensor(4, 1, 22)},
                  [bin_labels](Tape<double> &t, const std::vector<Id> &in) {
                    return t.bce_with_logits(in[0], bin_labels);
                  });
  std::vector<int> mc_labels = {2, -1, 0, 4};
  check_gradients({random_tensor(4, 5, 23)},
                  [mc_labels](Tape<double> &t, const std::vector<Id> &in) {
                    return t.masked_cross_entropy(in[0], mc_labels);
                  });
}

TEST_CASE("attention weights rows sum to one") {
  Tape<double> t;
  Tensor<double> attn;
  auto q = t.leaf(random_tensor(3, 8, 24));
  auto k = t.leaf(random_tensor(5, 8, 25));
  auto v = t.leaf(random_tensor(5, 8, 26));
  t.multihead_attention(q, k, v, 2, &attn);
  REQUIRE(attn.n_rows == 2 * 3);
  REQUIRE(attn.n_cols == 5);
  for (int r = 0; r < attn.n_rows; ++r) {
    double s = 0;
    for (int c = 0; c < attn.n_cols; ++c) {
      s += attn.at(r, c);
      CHECK(attn.at(r, c) >= 0.0);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("tape rejects non-scalar losses and mismatched shapes") {
  Tape<double> t;
  Id a = t.leaf(random_tensor(2, 3, 27));
  CHECK_THROWS_AS(t.backward(a), NotScalarLoss);
  Id b = t.leaf(random_tensor(3, 2, 28));
  CHECK_THROWS_AS(t.add(a, b), ShapeMismatch);
  CHECK_THROWS_AS(t.matmul(a, a), ShapeMismatch);
}

TEST_CASE("softmax rows sum to one and mean_all matches arithmetic") {
  Tape<double> t;
  Id s = t.softmax_rows(t.leaf(random_tensor(5, 7, 29)));
  const auto &sv = t.value(s);
  for (int r = 0; r < 5; ++r) {
    double sum = 0;
    for (int c = 0; c < 7; ++c) sum += sv.at(r, c);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  Tensor<double> m(2, 2);
  m.v = {1.0, 2.0, 3.0, 6.0};
  CHECK(t.value(t.mean_all(t.leaf(m))).v[0] == doctest::Approx(3.0));
}
