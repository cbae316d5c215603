#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ddi/chemgraph/featurize.hpp"
#include "ddi/errors.hpp"
#include "ddi/model/config.hpp"
#include "ddi/num/params.hpp"
#include "ddi/num/rng.hpp"
#include "ddi/num/tape.hpp"

namespace ddi::model {

// One inter-molecular edge proposed by the top-k cosine criterion.
struct InteractionEdge {
  int atom_a = 0;  // index within molecule A
  int atom_b = 0;  // index within molecule B
  double similarity = 0.0;
};

// Per-atom top-k cosine partners in both directions, duplicates merged,
// deterministic tie-break by lower partner index. Zero-norm rows have
// similarity 0 by definition. Result sorted by (atom_a, atom_b).
template <class T>
std::vector<InteractionEdge> build_interaction_graph(const num::Tensor<T> &ha,
                                                     const num::Tensor<T> &hb,
                                                     int topk = 3) {
  int na = ha.n_rows, nb = hb.n_rows, d = ha.n_cols;
  std::vector<double> norm_a(na), norm_b(nb);
  for (int i = 0; i < na; ++i) {
    double s = 0;
    for (int c = 0; c < d; ++c) s += double(ha.at(i, c)) * double(ha.at(i, c));
    norm_a[i] = std::sqrt(s);
  }
  for (int j = 0; j < nb; ++j) {
    double s = 0;
    for (int c = 0; c < d; ++c) s += double(hb.at(j, c)) * double(hb.at(j, c));
    norm_b[j] = std::sqrt(s);
  }
  std::vector<std::vector<double>> cos(na, std::vector<double>(nb));
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      if (norm_a[i] == 0.0 || norm_b[j] == 0.0) {
        cos[i][j] = 0.0;
        continue;
      }
      double dot = 0;
      for (int c = 0; c < d; ++c) dot += double(ha.at(i, c)) * double(hb.at(j, c));
      cos[i][j] = dot / (norm_a[i] * norm_b[j]);
    }
  std::map<std::pair<int, int>, double> chosen;
  auto pick = [&](int n_from, int n_to, bool from_a) {
    for (int i = 0; i < n_from; ++i) {
      std::vector<int> order(n_to);
      for (int j = 0; j < n_to; ++j) order[j] = j;
      std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        double cx = from_a ? cos[i][x] : cos[x][i];
        double cy = from_a ? cos[i][y] : cos[y][i];
        if (cx != cy) return cx > cy;
        return x < y;  // tie-break: lower partner index
      });
      int k = std::min(topk, n_to);
      for (int r = 0; r < k; ++r) {
        int j = order[r];
        auto key = from_a ? std::make_pair(i, j) : std::make_pair(j, i);
        chosen.emplace(key, from_a ? cos[i][j] : cos[j][i]);
      }
    }
  };
  pick(na, nb, true);
  pick(nb, na, false);
  std::vector<InteractionEdge> edges;
  edges.reserve(chosen.size());
  for (const auto &[key, sim] : chosen)
    edges.push_back(InteractionEdge{key.first, key.second, sim});
  return edges;
}

// Weight-shared siamese encoder + one of three combination architectures.
template <class T>
class Model {
 public:
  using Tape = num::Tape<T>;
  using Id = typename Tape::Id;
  using Graph = chemgraph::FeaturizedGraph;

  ModelConfig cfg;
  num::ParamSet<T> params;

  static Model init(const ModelConfig &cfg, std::uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    num::Prng rng = num::make_prng(seed);
    int H = cfg.hidden_dim;
    auto glorot = [&](int rows, int cols) {
      num::Tensor<T> t(rows, cols);
      double limit = std::sqrt(6.0 / (rows + cols));
      for (auto &x : t.v) x = T(num::uniform_real(rng, -limit, limit));
      return t;
    };
    auto zeros = [&](int rows, int cols) { return num::Tensor<T>(rows, cols); };
    auto ones = [&](int cols) {
      num::Tensor<T> t(1, cols);
      t.fill(T(1));
      return t;
    };
    for (int l = 0; l < cfg.n_mp_layers; ++l) {
      int in = l == 0 ? cfg.atom_dim : H;
      std::string p = "encoder/l" + std::to_string(l + 1) + "/";
      m.params.add(p + "edge_w", glorot(cfg.bond_dim, in * H));
      m.params.add(p + "edge_b", zeros(1, in * H));
      m.params.add(p + "root_w", glorot(in, H));
      m.params.add(p + "root_b", zeros(1, H));
      m.params.add(p + "bn_gamma", ones(H));
      m.params.add(p + "bn_beta", zeros(1, H));
      m.params.add(p + "bn_mean", zeros(1, H), /*trainable=*/false);
      m.params.add(p + "bn_var", ones(H), /*trainable=*/false);
    }
    if (cfg.variant == Variant::CrossAtt || cfg.variant == Variant::Ternary) {
      for (const char *dir : {"ab", "ba"}) {
        std::string p = std::string("attn/") + dir + "/";
        for (const char *w : {"wq", "wk", "wv", "wo"}) {
          m.params.add(p + w, glorot(H, H));
          m.params.add(p + std::string("b") + (w + 1), zeros(1, H));
        }
        m.params.add(p + "ln_gamma", ones(H));
        m.params.add(p + "ln_beta", zeros(1, H));
      }
    }
    if (cfg.variant == Variant::Ternary) {
      m.params.add("interaction/w_self", glorot(H, H));
      m.params.add("interaction/b_self", zeros(1, H));
      m.params.add("interaction/w_nbr", glorot(H, H));
      m.params.add("interaction/b_nbr", zeros(1, H));
      m.params.add("interaction/bn_gamma", ones(H));
      m.params.add("interaction/bn_beta", zeros(1, H));
      m.params.add("interaction/bn_mean", zeros(1, H), false);
      m.params.add("interaction/bn_var", ones(H), false);
    }
    m.params.add("heads/binary/w1", glorot(2 * H, cfg.head_hidden));
    m.params.add("heads/binary/b1", zeros(1, cfg.head_hidden));
    m.params.add("heads/binary/w2", glorot(cfg.head_hidden, 1));
    m.params.add("heads/binary/b2", zeros(1, 1));
    m.params.add("heads/multi/w1", glorot(2 * H, cfg.head_hidden));
    m.params.add("heads/multi/b1", zeros(1, cfg.head_hidden));
    m.params.add("heads/multi/w2", glorot(cfg.head_hidden, cfg.n_classes));
    m.params.add("heads/multi/b2", zeros(1, cfg.n_classes));
    return m;
  }

  long count_params() const { return params.count_trainable(); }

  std::map<std::string, long> param_breakdown() const {
    std::map<std::string, long> out;
    for (const char *p : {"encoder/", "attn/", "interaction/", "heads/"}) {
      long n = params.count_trainable(p);
      if (n > 0) out[std::string(p).substr(0, std::string(p).size() - 1)] = n;
    }
    return out;
  }

  // Output of one batched forward pass. Tensors of retained attention weights
  // are stored per pair as (heads*nQ) x nK blocks.
  struct BatchOutput {
    Id binary_logits = -1;  // B x 1
    Id class_logits = -1;   // B x n_classes
    std::vector<num::Tensor<T>> attn_ab;  // empty for Concat
    std::vector<num::Tensor<T>> attn_ba;
  };

  // Batched forward. mols must be ordered A0,B0,A1,B1,...
  BatchOutput forward_batch(Tape &tape, const std::vector<const Graph *> &mols,
                            bool train, num::DropoutKey key) {
    if (mols.size() % 2 != 0)
      throw ShapeMismatch("forward_batch expects pairs of molecules");
    param_ids_.clear();  // bind parameters to this tape
    EncodeResult enc = encode_batch(tape, mols, train, key);
    Id h = enc.h;
    BatchOutput out;
    if (cfg.variant == Variant::CrossAtt || cfg.variant == Variant::Ternary)
      h = cross_attention_batch(tape, h, enc, &out.attn_ab, &out.attn_ba);
    if (cfg.variant == Variant::Ternary)
      h = interaction_pass(tape, h, enc, train);
    Id pooled = tape.segment_mean(h, enc.atom_mol, static_cast<int>(mols.size()));
    Id pair = tape.pair_concat(pooled);
    out.binary_logits = head(tape, pair, "heads/binary/", train,
                             with_layer(key, 10));
    out.class_logits = head(tape, pair, "heads/multi/", train,
                            with_layer(key, 11));
    return out;
  }

  // Single-molecule encoder output (n x hidden), eval-style unless train.
  num::Tensor<T> encode(const Graph &g, bool train = false,
                        num::DropoutKey key = {}) {
    Tape tape;
    param_ids_.clear();
    EncodeResult enc = encode_batch(tape, {&g}, train, key);
    return tape.value(enc.h);
  }

  // Cross-attention for one pair; returns updated (ha, hb) values plus the
  // retained A->B attention block.
  struct PairAttention {
    num::Tensor<T> ha;
    num::Tensor<T> hb;
    num::Tensor<T> attn_ab;  // (heads*nA) x nB
    num::Tensor<T> attn_ba;
  };

  PairAttention cross_attention_pair(const Graph &a, const Graph &b) {
    if (cfg.variant == Variant::Concat)
      throw VariantHasNoAttention(to_string(cfg.variant));
    Tape tape;
    param_ids_.clear();
    std::vector<const Graph *> mols{&a, &b};
    EncodeResult enc = encode_batch(tape, mols, false, {});
    std::vector<num::Tensor<T>> ab, ba;
    Id h = cross_attention_batch(tape, enc.h, enc, &ab, &ba);
    PairAttention out;
    out.ha = slice_value(tape, h, enc.offsets[0], enc.sizes[0]);
    out.hb = slice_value(tape, h, enc.offsets[1], enc.sizes[1]);
    out.attn_ab = ab[0];
    out.attn_ba = ba[0];
    return out;
  }

  // Most-attended atom in molecule B: weights averaged over heads and over
  // A-side query atoms; argmax with lowest-index tie-break.
  struct AttentionSummary {
    int most_attended = 0;
    std::vector<double> weights;  // per B atom, sums to 1
  };

  static AttentionSummary summarize_attention(const num::Tensor<T> &attn_ab) {
    int nb = attn_ab.n_cols;
    int rows = attn_ab.n_rows;  // heads * nA
    AttentionSummary s;
    s.weights.assign(nb, 0.0);
    for (int r = 0; r < rows; ++r)
      for (int j = 0; j < nb; ++j) s.weights[j] += double(attn_ab.at(r, j));
    for (auto &w : s.weights) w /= rows;
    s.most_attended = 0;
    for (int j = 1; j < nb; ++j)
      if (s.weights[j] > s.weights[s.most_attended]) s.most_attended = j;
    return s;
  }

  AttentionSummary attention_summary(const Graph &a, const Graph &b) {
    PairAttention pa = cross_attention_pair(a, b);
    return summarize_attention(pa.attn_ab);
  }

 private:
  struct EncodeResult {
    Id h = -1;                  // N_total x hidden
    std::vector<int> atom_mol;  // atom row -> molecule index
    std::vector<int> offsets;   // first atom row of each molecule
    std::vector<int> sizes;     // atom count of each molecule
    std::vector<int> arc_src;   // global arc endpoints (intra-molecular)
    std::vector<int> arc_dst;
  };

  static num::DropoutKey with_layer(num::DropoutKey key, std::uint64_t layer) {
    key.layer = layer;
    return key;
  }

  Id param(Tape &tape, const std::string &name) {
    auto it = param_ids_.find(name);
    if (it != param_ids_.end() && it->second.tape == &tape) return it->second.id;
    const num::Tensor<T> *t = const_cast<num::ParamSet<T> &>(params).find(name);
    if (!t) throw Error("missing parameter " + name);
    Id id = tape.leaf(*t);
    param_ids_[name] = TapeRef{&tape, id};
    return id;
  }

  num::Tensor<T> slice_value(Tape &tape, Id h, int begin, int len) {
    const auto &H = tape.value(h);
    num::Tensor<T> out(len, H.n_cols);
    for (int r = 0; r < len; ++r)
      for (int c = 0; c < H.n_cols; ++c) out.at(r, c) = H.at(begin + r, c);
    return out;
  }

  EncodeResult encode_batch(Tape &tape, const std::vector<const Graph *> &mols,
                            bool train, num::DropoutKey key) {
    EncodeResult enc;
    int n_total = 0, e_total = 0;
    for (const Graph *g : mols) {
      if (g->atom_features.n_rows < 1) throw EmptyGraph("molecule has no atoms");
      enc.offsets.push_back(n_total);
      enc.sizes.push_back(g->atom_features.n_rows);
      n_total += g->atom_features.n_rows;
      e_total += static_cast<int>(g->arc_src.size());
    }
    num::Tensor<T> X(n_total, cfg.atom_dim);
    num::Tensor<T> E(e_total, cfg.bond_dim);
    enc.atom_mol.resize(n_total);
    enc.arc_src.reserve(e_total);
    enc.arc_dst.reserve(e_total);
    int r0 = 0, er0 = 0;
    for (std::size_t m = 0; m < mols.size(); ++m) {
      const Graph *g = mols[m];
      for (int r = 0; r < g->atom_features.n_rows; ++r) {
        enc.atom_mol[r0 + r] = static_cast<int>(m);
        for (int c = 0; c < cfg.atom_dim; ++c)
          X.at(r0 + r, c) = T(g->atom_features.at(r, c));
      }
      for (std::size_t e = 0; e < g->arc_src.size(); ++e) {
        enc.arc_src.push_back(r0 + g->arc_src[e]);
        enc.arc_dst.push_back(r0 + g->arc_dst[e]);
        for (int c = 0; c < cfg.bond_dim; ++c)
          E.at(er0 + static_cast<int>(e), c) = T(g->bond_features.at(static_cast<int>(e), c));
      }
      er0 += static_cast<int>(g->arc_src.size());
      r0 += g->atom_features.n_rows;
    }
    Id x = tape.leaf(std::move(X));
    Id ebf = tape.leaf(std::move(E));
    Id h = x;
    int H = cfg.hidden_dim;
    for (int l = 0; l < cfg.n_mp_layers; ++l) {
      int in = l == 0 ? cfg.atom_dim : H;
      std::string p = "encoder/l" + std::to_string(l + 1) + "/";
      Id mats = tape.add_rowvec(tape.matmul(ebf, param(tape, p + "edge_w")),
                                param(tape, p + "edge_b"));
      Id msg = tape.edge_message(h, mats, enc.arc_src, in, H);
      Id agg = tape.segment_mean(msg, enc.arc_dst, n_total);
      Id root = tape.add_rowvec(tape.matmul(h, param(tape, p + "root_w")),
                                param(tape, p + "root_b"));
      Id pre = tape.add(root, agg);
      Id bn = apply_bn(tape, pre, p, train);
      Id act = tape.relu(bn);
      h = tape.dropout(act, cfg.dropout_p, with_layer(key, l + 1), train);
    }
    enc.h = h;
    return enc;
  }

  Id apply_bn(Tape &tape, Id x, const std::string &prefix, bool train) {
    num::Tensor<T> *mean = params.find(prefix + "bn_mean");
    num::Tensor<T> *var = params.find(prefix + "bn_var");
    num::BnStats<T> stats(cfg.hidden_dim);
    stats.running_mean = *mean;
    stats.running_var = *var;
    Id out = tape.batch_norm(x, param(tape, prefix + "bn_gamma"),
                             param(tape, prefix + "bn_beta"), stats, train);
    if (train) {
      *mean = stats.running_mean;
      *var = stats.running_var;
    }
    return out;
  }

  Id attn_direction(Tape &tape, Id hq, Id hk, const std::string &dir,
                    num::Tensor<T> *saved) {
    std::string p = "attn/" + dir + "/";
    Id q = tape.add_rowvec(tape.matmul(hq, param(tape, p + "wq")),
                           param(tape, p + "bq"));
    Id k = tape.add_rowvec(tape.matmul(hk, param(tape, p + "wk")),
                           param(tape, p + "bk"));
    Id v = tape.add_rowvec(tape.matmul(hk, param(tape, p + "wv")),
                           param(tape, p + "bv"));
    Id att = tape.multihead_attention(q, k, v, cfg.n_heads, saved);
    Id proj = tape.add_rowvec(tape.matmul(att, param(tape, p + "wo")),
                              param(tape, p + "bo"));
    Id res = tape.add(hq, proj);
    return tape.layer_norm(res, param(tape, p + "ln_gamma"),
                           param(tape, p + "ln_beta"));
  }

  Id cross_attention_batch(Tape &tape, Id h, const EncodeResult &enc,
                           std::vector<num::Tensor<T>> *attn_ab,
                           std::vector<num::Tensor<T>> *attn_ba) {
    std::vector<Id> updated;
    int n_pairs = static_cast<int>(enc.offsets.size()) / 2;
    for (int pIdx = 0; pIdx < n_pairs; ++pIdx) {
      Id ha = tape.slice_rows(h, enc.offsets[2 * pIdx], enc.sizes[2 * pIdx]);
      Id hb = tape.slice_rows(h, enc.offsets[2 * pIdx + 1], enc.sizes[2 * pIdx + 1]);
      num::Tensor<T> sab, sba;
      Id ha2 = attn_direction(tape, ha, hb, "ab", &sab);
      Id hb2 = attn_direction(tape, hb, ha, "ba", &sba);
      if (attn_ab) attn_ab->push_back(std::move(sab));
      if (attn_ba) attn_ba->push_back(std::move(sba));
      updated.push_back(ha2);
      updated.push_back(hb2);
    }
    return tape.concat_rows(updated);
  }

  Id interaction_pass(Tape &tape, Id h, const EncodeResult &enc, bool train) {
    const auto &H = tape.value(h);
    // combined edge list: intra-molecular arcs (gate 1) plus top-k cosine
    // inter-molecular arcs in both directions (gate = similarity, which
    // backpropagates into the embeddings; only the top-k *selection* is
    // discrete)
    std::vector<int> src = enc.arc_src;
    std::vector<int> dst = enc.arc_dst;
    std::vector<int> inter_src, inter_dst;
    int n_pairs = static_cast<int>(enc.offsets.size()) / 2;
    for (int pIdx = 0; pIdx < n_pairs; ++pIdx) {
      int oa = enc.offsets[2 * pIdx], ob = enc.offsets[2 * pIdx + 1];
      num::Tensor<T> ha(enc.sizes[2 * pIdx], H.n_cols);
      num::Tensor<T> hb(enc.sizes[2 * pIdx + 1], H.n_cols);
      for (int r = 0; r < ha.n_rows; ++r)
        for (int c = 0; c < H.n_cols; ++c) ha.at(r, c) = H.at(oa + r, c);
      for (int r = 0; r < hb.n_rows; ++r)
        for (int c = 0; c < H.n_cols; ++c) hb.at(r, c) = H.at(ob + r, c);
      for (const auto &e : build_interaction_graph(ha, hb, cfg.topk)) {
        inter_src.push_back(oa + e.atom_a);
        inter_dst.push_back(ob + e.atom_b);
        inter_src.push_back(ob + e.atom_b);
        inter_dst.push_back(oa + e.atom_a);
      }
    }
    Id ynbr = tape.add_rowvec(tape.matmul(h, param(tape, "interaction/w_nbr")),
                              param(tape, "interaction/b_nbr"));
    Id intra = tape.gather_rows_scaled(
        ynbr, src, std::vector<T>(src.size(), T(1)));
    Id gates = tape.cosine_pairs(h, inter_src, inter_dst);
    Id inter = tape.scale_rows(
        tape.gather_rows_scaled(
            ynbr, inter_src, std::vector<T>(inter_src.size(), T(1))),
        gates);
    Id msgs = tape.concat_rows({intra, inter});
    dst.insert(dst.end(), inter_dst.begin(), inter_dst.end());
    Id agg = tape.segment_mean(msgs, std::move(dst), H.n_rows);
    Id self = tape.add_rowvec(tape.matmul(h, param(tape, "interaction/w_self")),
                              param(tape, "interaction/b_self"));
    Id pre = tape.add(self, agg);
    Id bn = apply_bn(tape, pre, "interaction/", train);
    return tape.relu(bn);
  }

  Id head(Tape &tape, Id pair, const std::string &p, bool train,
          num::DropoutKey key) {
    Id hid = tape.relu(tape.add_rowvec(tape.matmul(pair, param(tape, p + "w1")),
                                       param(tape, p + "b1")));
    Id drop = tape.dropout(hid, cfg.dropout_p, key, train);
    return tape.add_rowvec(tape.matmul(drop, param(tape, p + "w2")),
                           param(tape, p + "b2"));
  }

  struct TapeRef {
    Tape *tape = nullptr;
    Id id = -1;
  };
  std::map<std::string, TapeRef> param_ids_;

 public:
  // Accumulated parameter gradients from the last backward() on `tape`.
  void apply_gradients(Tape &tape,
                       const std::function<void(const std::string &,
                                                num::Tensor<T> &,
                                                const num::Tensor<T> &)> &fn) {
    for (auto &e : params.entries) {
      if (!e.trainable) continue;
      auto it = param_ids_.find(e.name);
      if (it == param_ids_.end() || it->second.tape != &tape) continue;
      fn(e.name, e.tensor, tape.grad(it->second.id));
    }
  }

  void clear_tape_bindings() { param_ids_.clear(); }
};

}  // namespace ddi::model
