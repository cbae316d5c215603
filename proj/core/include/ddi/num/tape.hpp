#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "ddi/errors.hpp"
#include "ddi/num/rng.hpp"
#include "ddi/num/tensor.hpp"

namespace ddi::num {

// Running statistics for one batch-normalization site. Lives outside the tape
// and persists across steps; updated only in train mode.
template <class T>
struct BnStats {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  explicit BnStats(int channels = 0)
      : running_mean(1, channels), running_var(1, channels) {
    running_var.fill(T(1));
  }
};

// Reverse-mode differentiation tape. Every primitive appends one node holding
// the forward value and a backward closure; backward() replays the record in
// reverse creation order, visiting each node exactly once.
template <class T>
class Tape {
 public:
  using Id = int;

  Id leaf(Tensor<T> t) {
    nodes_.push_back(Node{std::move(t), {}, nullptr});
    nodes_.back().grad = Tensor<T>(nodes_.back().val.n_rows, nodes_.back().val.n_cols);
    return static_cast<Id>(nodes_.size()) - 1;
  }

  const Tensor<T> &value(Id id) const { return nodes_[id].val; }
  const Tensor<T> &grad(Id id) const { return nodes_[id].grad; }

  // ---- elementwise / structural primitives -------------------------------

  Id add(Id a, Id b) {
    const auto &A = val(a), &B = val(b);
    if (!A.same_shape(B))
      throw ShapeMismatch("add " + shape_str(A) + " vs " + shape_str(B));
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += B.v[i];
    return record(std::move(out), [this, a, b](const Tensor<T> &g) {
      accum(a, g);
      accum(b, g);
    });
  }

  // Broadcast a 1xC bias row over every row of a.
  Id add_rowvec(Id a, Id bias) {
    const auto &A = val(a), &B = val(bias);
    if (B.n_rows != 1 || B.n_cols != A.n_cols)
      throw ShapeMismatch("add_rowvec " + shape_str(A) + " vs " + shape_str(B));
    Tensor<T> out = A;
    for (int r = 0; r < A.n_rows; ++r)
      for (int c = 0; c < A.n_cols; ++c) out.at(r, c) += B.v[c];
    return record(std::move(out), [this, a, bias](const Tensor<T> &g) {
      accum(a, g);
      auto &gb = nodes_[bias].grad;
      for (int r = 0; r < g.n_rows; ++r)
        for (int c = 0; c < g.n_cols; ++c) gb.v[c] += g.at(r, c);
    });
  }

  Id mul(Id a, Id b) {
    const auto &A = val(a), &B = val(b);
    if (!A.same_shape(B))
      throw ShapeMismatch("mul " + shape_str(A) + " vs " + shape_str(B));
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= B.v[i];
    return record(std::move(out), [this, a, b](const Tensor<T> &g) {
      auto &ga = nodes_[a].grad;
      auto &gb = nodes_[b].grad;
      const auto &A2 = nodes_[a].val;
      const auto &B2 = nodes_[b].val;
      for (std::size_t i = 0; i < g.v.size(); ++i) {
        ga.v[i] += g.v[i] * B2.v[i];
        gb.v[i] += g.v[i] * A2.v[i];
      }
    });
  }

  Id scale(Id a, T c) {
    Tensor<T> out = val(a);
    for (auto &x : out.v) x *= c;
    return record(std::move(out), [this, a, c](const Tensor<T> &g) {
      auto &ga = nodes_[a].grad;
      for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * c;
    });
  }

  Id relu(Id a) {
    Tensor<T> out = val(a);
    for (auto &x : out.v) x = x > T(0) ? x : T(0);
    return record(std::move(out), [this, a](const Tensor<T> &g) {
      auto &ga = nodes_[a].grad;
      const auto &A = nodes_[a].val;
      for (std::size_t i = 0; i < g.v.size(); ++i)
        if (A.v[i] > T(0)) ga.v[i] += g.v[i];
    });
  }

  Id matmul(Id a, Id b, bool transpose_b = false) {
    const auto &A = val(a), &B = val(b);
    int m = A.n_rows, k = A.n_cols;
    int n = transpose_b ? B.n_rows : B.n_cols;
    int kb = transpose_b ? B.n_cols : B.n_rows;
    if (k != kb)
      throw ShapeMismatch("matmul " + shape_str(A) + " vs " + shape_str(B) +
                          (transpose_b ? " (B transposed)" : ""));
    Tensor<T> out(m, n);
    if (!transpose_b) {
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          T aip = A.at(i, p);
          if (aip == T(0)) continue;
          const T *brow = &B.v[static_cast<std::size_t>(p) * n];
          T *orow = &out.v[static_cast<std::size_t>(i) * n];
          for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    } else {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          T s = T(0);
          const T *arow = &A.v[static_cast<std::size_t>(i) * k];
          const T *brow = &B.v[static_cast<std::size_t>(j) * k];
          for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
          out.at(i, j) = s;
        }
    }
    return record(std::move(out), [this, a, b, transpose_b](const Tensor<T> &g) {
      const auto &A2 = nodes_[a].val;
      const auto &B2 = nodes_[b].val;
      auto &ga = nodes_[a].grad;
      auto &gb = nodes_[b].grad;
      int m = A2.n_rows, k = A2.n_cols, n = g.n_cols;
      if (!transpose_b) {
        // dA += g * B^T ; dB += A^T * g
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            T gij = g.at(i, j);
            if (gij == T(0)) continue;
            for (int p = 0; p < k; ++p) ga.at(i, p) += gij * B2.at(p, j);
          }
        for (int p = 0; p < k; ++p)
          for (int i = 0; i < m; ++i) {
            T aip = A2.at(i, p);
            if (aip == T(0)) continue;
            for (int j = 0; j < n; ++j) gb.at(p, j) += aip * g.at(i, j);
          }
      } else {
        // out = A * B^T ; dA += g * B ; dB += g^T * A
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            T gij = g.at(i, j);
            if (gij == T(0)) continue;
            for (int p = 0; p < k; ++p) {
              ga.at(i, p) += gij * B2.at(j, p);
              gb.at(j, p) += gij * A2.at(i, p);
            }
          }
      }
    });
  }

  Id softmax_rows(Id a) {
    const auto &A = val(a);
    Tensor<T> out(A.n_rows, A.n_cols);
    for (int r = 0; r < A.n_rows; ++r) {
      T mx = A.at(r, 0);
      for (int c = 1; c < A.n_cols; ++c) mx = std::max(mx, A.at(r, c));
      T sum = T(0);
      for (int c = 0; c < A.n_cols; ++c) {
        T e = std::exp(A.at(r, c) - mx);
        out.at(r, c) = e;
        sum += e;
      }
      for (int c = 0; c < A.n_cols; ++c) out.at(r, c) /= sum;
    }
    Id id = record(std::move(out), nullptr);
    nodes_[id].backward = [this, a, id](const Tensor<T> &g) {
      const auto &Y = nodes_[id].val;
      auto &ga = nodes_[a].grad;
      for (int r = 0; r < Y.n_rows; ++r) {
        T dot = T(0);
        for (int c = 0; c < Y.n_cols; ++c) dot += g.at(r, c) * Y.at(r, c);
        for (int c = 0; c < Y.n_cols; ++c)
          ga.at(r, c) += Y.at(r, c) * (g.at(r, c) - dot);
      }
    };
    return id;
  }

  // Mean of rows sharing a segment id. Empty segments yield zero rows.
  Id segment_mean(Id a, std::vector<int> seg, int n_segments) {
    const auto &A = val(a);
    if (static_cast<int>(seg.size()) != A.n_rows)
      throw ShapeMismatch("segment_mean ids " + std::to_string(seg.size()) +
                          " vs rows " + std::to_string(A.n_rows));
    Tensor<T> out(n_segments, A.n_cols);
    std::vector<int> counts(n_segments, 0);
    for (int r = 0; r < A.n_rows; ++r) {
      int s = seg[r];
      ++counts[s];
      for (int c = 0; c < A.n_cols; ++c) out.at(s, c) += A.at(r, c);
    }
    for (int s = 0; s < n_segments; ++s)
      if (counts[s] > 0)
        for (int c = 0; c < A.n_cols; ++c) out.at(s, c) /= T(counts[s]);
    return record(std::move(out),
                  [this, a, seg = std::move(seg), counts = std::move(counts)](
                      const Tensor<T> &g) {
                    auto &ga = nodes_[a].grad;
                    for (int r = 0; r < ga.n_rows; ++r) {
                      int s = seg[r];
                      T inv = T(1) / T(counts[s]);
                      for (int c = 0; c < ga.n_cols; ++c)
                        ga.at(r, c) += g.at(s, c) * inv;
                    }
                  });
  }

  Id concat_rows(const std::vector<Id> &parts) {
    if (parts.empty()) throw ShapeMismatch("concat_rows of zero parts");
    int cols = val(parts[0]).n_cols;
    int rows = 0;
    for (Id p : parts) {
      if (val(p).n_cols != cols)
        throw ShapeMismatch("concat_rows column mismatch");
      rows += val(p).n_rows;
    }
    Tensor<T> out(rows, cols);
    int r0 = 0;
    for (Id p : parts) {
      const auto &P = val(p);
      std::copy(P.v.begin(), P.v.end(),
                out.v.begin() + static_cast<std::size_t>(r0) * cols);
      r0 += P.n_rows;
    }
    return record(std::move(out), [this, parts](const Tensor<T> &g) {
      int r0 = 0;
      for (Id p : parts) {
        auto &gp = nodes_[p].grad;
        for (int r = 0; r < gp.n_rows; ++r)
          for (int c = 0; c < gp.n_cols; ++c)
            gp.at(r, c) += g.at(r0 + r, c);
        r0 += gp.n_rows;
      }
    });
  }

  Id slice_rows(Id a, int begin, int len) {
    const auto &A = val(a);
    if (begin < 0 || begin + len > A.n_rows)
      throw ShapeMismatch("slice_rows out of range");
    Tensor<T> out(len, A.n_cols);
    std::copy(A.v.begin() + static_cast<std::size_t>(begin) * A.n_cols,
              A.v.begin() + static_cast<std::size_t>(begin + len) * A.n_cols,
              out.v.begin());
    return record(std::move(out), [this, a, begin](const Tensor<T> &g) {
      auto &ga = nodes_[a].grad;
      for (int r = 0; r < g.n_rows; ++r)
        for (int c = 0; c < g.n_cols; ++c)
          ga.at(begin + r, c) += g.at(r, c);
    });
  }

  // (2B x D) molecule rows, ordered A0,B0,A1,B1,... -> (B x 2D) pair rows.
  Id pair_concat(Id a) {
    const auto &A = val(a);
    if (A.n_rows % 2 != 0)
      throw ShapeMismatch("pair_concat needs an even row count");
    int B = A.n_rows / 2, D = A.n_cols;
    Tensor<T> out(B, 2 * D);
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < D; ++c) {
        out.at(b, c) = A.at(2 * b, c);
        out.at(b, D + c) = A.at(2 * b + 1, c);
      }
    return record(std::move(out), [this, a](const Tensor<T> &g) {
      auto &ga = nodes_[a].grad;
      int B = ga.n_rows / 2, D = ga.n_cols;
      for (int b = 0; b < B; ++b)
        for (int c = 0; c < D; ++c) {
          ga.at(2 * b, c) += g.at(b, c);
          ga.at(2 * b + 1, c) += g.at(b, D + c);
        }
    });
  }

  // out[e] = gate[e] * x[idx[e]] (gates are constants, not differentiated).
  Id gather_rows_scaled(Id a, std::vector<int> idx, std::vector<T> gates) {
    const auto &A = val(a);
    if (idx.size() != gates.size())
      throw ShapeMismatch("gather_rows_scaled index/gate count mismatch");
    Tensor<T> out(static_cast<int>(idx.size()), A.n_cols);
    for (std::size_t e = 0; e < idx.size(); ++e)
      for (int c = 0; c < A.n_cols; ++c)
        out.at(static_cast<int>(e), c) = gates[e] * A.at(idx[e], c);
    return record(std::move(out),
                  [this, a, idx = std::move(idx), gates = std::move(gates)](
                      const Tensor<T> &g) {
                    auto &ga = nodes_[a].grad;
                    for (std::size_t e = 0; e < idx.size(); ++e)
                      for (int c = 0; c < ga.n_cols; ++c)
                        ga.at(idx[e], c) +=
                            gates[e] * g.at(static_cast<int>(e), c);
                  });
  }

  // out[e] = cos(a[ia[e]], a[ib[e]]) as an E x 1 column; zero-norm rows give
  // similarity 0 with zero gradient.
  Id cosine_pairs(Id a, std::vector<int> ia, std::vector<int> ib) {
    const auto &A = val(a);
    if (ia.size() != ib.size())
      throw ShapeMismatch("cosine_pairs index count mismatch");
    int E = static_cast<int>(ia.size()), D = A.n_cols;
    Tensor<T> out(E, 1);
    for (int e = 0; e < E; ++e) {
      const T *u = &A.v[static_cast<std::size_t>(ia[e]) * D];
      const T *v = &A.v[static_cast<std::size_t>(ib[e]) * D];
      T dot = T(0), nu = T(0), nv = T(0);
      for (int c = 0; c < D; ++c) {
        dot += u[c] * v[c];
        nu += u[c] * u[c];
        nv += v[c] * v[c];
      }
      out.at(e, 0) =
          (nu == T(0) || nv == T(0)) ? T(0) : dot / std::sqrt(nu * nv);
    }
    return record(
        std::move(out),
        [this, a, ia = std::move(ia), ib = std::move(ib)](const Tensor<T> &g) {
          const auto &A2 = nodes_[a].val;
          auto &ga = nodes_[a].grad;
          int D = A2.n_cols;
          for (std::size_t e = 0; e < ia.size(); ++e) {
            const T *u = &A2.v[static_cast<std::size_t>(ia[e]) * D];
            const T *v = &A2.v[static_cast<std::size_t>(ib[e]) * D];
            T dot = T(0), nu = T(0), nv = T(0);
            for (int c = 0; c < D; ++c) {
              dot += u[c] * v[c];
              nu += u[c] * u[c];
              nv += v[c] * v[c];
            }
            if (nu == T(0) || nv == T(0)) continue;
            T inv = T(1) / std::sqrt(nu * nv);
            T s = dot * inv;
            T *gu = &ga.v[static_cast<std::size_t>(ia[e]) * D];
            T *gv = &ga.v[static_cast<std::size_t>(ib[e]) * D];
            T ge = g.at(static_cast<int>(e), 0);
            for (int c = 0; c < D; ++c) {
              gu[c] += ge * (v[c] * inv - s * u[c] / nu);
              gv[c] += ge * (u[c] * inv - s * v[c] / nv);
            }
          }
        });
  }

  // out[e] = s[e] * a[e] with s an E x 1 column; differentiable in both.
  Id scale_rows(Id a, Id s) {
    const auto &A = val(a);
    const auto &S = val(s);
    if (S.n_rows != A.n_rows || S.n_cols != 1)
      throw ShapeMismatch("scale_rows " + shape_str(A) + " / " + shape_str(S));
    Tensor<T> out(A.n_rows, A.n_cols);
    for (int e = 0; e < A.n_rows; ++e)
      for (int c = 0; c < A.n_cols; ++c) out.at(e, c) = S.at(e, 0) * A.at(e, c);
    return record(std::move(out), [this, a, s](const Tensor<T> &g) {
      const auto &A2 = nodes_[a].val;
      const auto &S2 = nodes_[s].val;
      auto &ga = nodes_[a].grad;
      auto &gs = nodes_[s].grad;
      for (int e = 0; e < A2.n_rows; ++e) {
        T acc = T(0);
        for (int c = 0; c < A2.n_cols; ++c) {
          ga.at(e, c) += S2.at(e, 0) * g.at(e, c);
          acc += g.at(e, c) * A2.at(e, c);
        }
        gs.at(e, 0) += acc;
      }
    });
  }

  // Edge-conditioned message: h is N x in, mats is E x (in*out) holding one
  // in x out matrix per arc; out[e] = h[src[e]] * mat_e.
  Id edge_message(Id h, Id mats, std::vector<int> src, int in_dim, int out_dim) {
    const auto &H = val(h);
    const auto &M = val(mats);
    if (H.n_cols != in_dim || M.n_cols != in_dim * out_dim ||
        M.n_rows != static_cast<int>(src.size()))
      throw ShapeMismatch("edge_message " + shape_str(H) + " / " +
                          shape_str(M));
    int E = M.n_rows;
    Tensor<T> out(E, out_dim);
    for (int e = 0; e < E; ++e) {
      const T *hr = &H.v[static_cast<std::size_t>(src[e]) * in_dim];
      const T *me = &M.v[static_cast<std::size_t>(e) * in_dim * out_dim];
      T *orow = &out.v[static_cast<std::size_t>(e) * out_dim];
      for (int i = 0; i < in_dim; ++i) {
        T hi = hr[i];
        if (hi == T(0)) continue;
        const T *mrow = me + static_cast<std::size_t>(i) * out_dim;
        for (int o = 0; o < out_dim; ++o) orow[o] += hi * mrow[o];
      }
    }
    return record(
        std::move(out),
        [this, h, mats, src = std::move(src), in_dim, out_dim](const Tensor<T> &g) {
          const auto &H2 = nodes_[h].val;
          const auto &M2 = nodes_[mats].val;
          auto &gh = nodes_[h].grad;
          auto &gm = nodes_[mats].grad;
          int E = M2.n_rows;
          for (int e = 0; e < E; ++e) {
            const T *hr = &H2.v[static_cast<std::size_t>(src[e]) * in_dim];
            T *ghr = &gh.v[static_cast<std::size_t>(src[e]) * in_dim];
            const T *me = &M2.v[static_cast<std::size_t>(e) * in_dim * out_dim];
            T *gme = &gm.v[static_cast<std::size_t>(e) * in_dim * out_dim];
            const T *grow = &g.v[static_cast<std::size_t>(e) * out_dim];
            for (int i = 0; i < in_dim; ++i) {
              const T *mrow = me + static_cast<std::size_t>(i) * out_dim;
              T *gmrow = gme + static_cast<std::size_t>(i) * out_dim;
              T acc = T(0);
              for (int o = 0; o < out_dim; ++o) {
                acc += grow[o] * mrow[o];
                gmrow[o] += hr[i] * grow[o];
              }
              ghr[i] += acc;
            }
          }
        });
  }

  Id layer_norm(Id a, Id gamma, Id beta, T eps = T(1e-5)) {
    const auto &A = val(a);
    const auto &G = val(gamma);
    const auto &Be = val(beta);
    if (G.n_rows != 1 || G.n_cols != A.n_cols || !G.same_shape(Be))
      throw ShapeMismatch("layer_norm scale/shift must be 1 x cols");
    int R = A.n_rows, C = A.n_cols;
    Tensor<T> out(R, C);
    auto xhat = std::make_shared<Tensor<T>>(R, C);
    auto invstd = std::make_shared<std::vector<T>>(R);
    for (int r = 0; r < R; ++r) {
      T mean = T(0);
      for (int c = 0; c < C; ++c) mean += A.at(r, c);
      mean /= T(C);
      T var = T(0);
      for (int c = 0; c < C; ++c) {
        T d = A.at(r, c) - mean;
        var += d * d;
      }
      var /= T(C);
      T is = T(1) / std::sqrt(var + eps);
      (*invstd)[r] = is;
      for (int c = 0; c < C; ++c) {
        T xh = (A.at(r, c) - mean) * is;
        xhat->at(r, c) = xh;
        out.at(r, c) = G.v[c] * xh + Be.v[c];
      }
    }
    return record(std::move(out), [this, a, gamma, beta, xhat, invstd](
                                      const Tensor<T> &g) {
      const auto &G2 = nodes_[gamma].val;
      auto &ga = nodes_[a].grad;
      auto &gg = nodes_[gamma].grad;
      auto &gb = nodes_[beta].grad;
      int R = g.n_rows, C = g.n_cols;
      for (int r = 0; r < R; ++r) {
        T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
        for (int c = 0; c < C; ++c) {
          T dxh = g.at(r, c) * G2.v[c];
          sum_dxhat += dxh;
          sum_dxhat_xhat += dxh * xhat->at(r, c);
          gg.v[c] += g.at(r, c) * xhat->at(r, c);
          gb.v[c] += g.at(r, c);
        }
        T is = (*invstd)[r];
        for (int c = 0; c < C; ++c) {
          T dxh = g.at(r, c) * G2.v[c];
          ga.at(r, c) += is * (dxh - sum_dxhat / T(C) -
                               xhat->at(r, c) * sum_dxhat_xhat / T(C));
        }
      }
    });
  }

  // Batch normalization over all rows, per channel. In train mode batch
  // statistics normalize and update the running stats; in eval mode the
  // frozen running stats are used.
  Id batch_norm(Id a, Id gamma, Id beta, BnStats<T> &stats, bool train) {
    const auto &A = val(a);
    const auto &G = val(gamma);
    int R = A.n_rows, C = A.n_cols;
    if (G.n_cols != C || stats.running_mean.n_cols != C)
      throw ShapeMismatch("batch_norm channel mismatch");
    Tensor<T> out(R, C);
    if (!train) {
      auto scale = std::make_shared<std::vector<T>>(C);
      for (int c = 0; c < C; ++c)
        (*scale)[c] = T(1) / std::sqrt(stats.running_var.v[c] + stats.eps);
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c)
          out.at(r, c) = G.v[c] * (A.at(r, c) - stats.running_mean.v[c]) *
                             (*scale)[c] +
                         val(beta).v[c];
      Tensor<T> rm = stats.running_mean;
      return record(std::move(out), [this, a, gamma, beta, scale,
                                     rm = std::move(rm)](const Tensor<T> &g) {
        const auto &A2 = nodes_[a].val;
        const auto &G2 = nodes_[gamma].val;
        auto &ga = nodes_[a].grad;
        auto &gg = nodes_[gamma].grad;
        auto &gb = nodes_[beta].grad;
        for (int r = 0; r < g.n_rows; ++r)
          for (int c = 0; c < g.n_cols; ++c) {
            T xh = (A2.at(r, c) - rm.v[c]) * (*scale)[c];
            ga.at(r, c) += g.at(r, c) * G2.v[c] * (*scale)[c];
            gg.v[c] += g.at(r, c) * xh;
            gb.v[c] += g.at(r, c);
          }
      });
    }
    auto xhat = std::make_shared<Tensor<T>>(R, C);
    auto invstd = std::make_shared<std::vector<T>>(C);
    for (int c = 0; c < C; ++c) {
      T mean = T(0);
      for (int r = 0; r < R; ++r) mean += A.at(r, c);
      mean /= T(R);
      T var = T(0);
      for (int r = 0; r < R; ++r) {
        T d = A.at(r, c) - mean;
        var += d * d;
      }
      var /= T(R);
      T is = T(1) / std::sqrt(var + stats.eps);
      (*invstd)[c] = is;
      for (int r = 0; r < R; ++r) {
        T xh = (A.at(r, c) - mean) * is;
        xhat->at(r, c) = xh;
        out.at(r, c) = G.v[c] * xh + val(beta).v[c];
      }
      T unbiased = R > 1 ? var * T(R) / T(R - 1) : var;
      stats.running_mean.v[c] =
          (T(1) - stats.momentum) * stats.running_mean.v[c] + stats.momentum * mean;
      stats.running_var.v[c] =
          (T(1) - stats.momentum) * stats.running_var.v[c] + stats.momentum * unbiased;
    }
    return record(std::move(out), [this, a, gamma, beta, xhat,
                                   invstd](const Tensor<T> &g) {
      const auto &G2 = nodes_[gamma].val;
      auto &ga = nodes_[a].grad;
      auto &gg = nodes_[gamma].grad;
      auto &gb = nodes_[beta].grad;
      int R = g.n_rows, C = g.n_cols;
      for (int c = 0; c < C; ++c) {
        T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
        for (int r = 0; r < R; ++r) {
          T dxh = g.at(r, c) * G2.v[c];
          sum_dxhat += dxh;
          sum_dxhat_xhat += dxh * xhat->at(r, c);
          gg.v[c] += g.at(r, c) * xhat->at(r, c);
          gb.v[c] += g.at(r, c);
        }
        T is = (*invstd)[c];
        for (int r = 0; r < R; ++r) {
          T dxh = g.at(r, c) * G2.v[c];
          ga.at(r, c) += is * (dxh - sum_dxhat / T(R) -
                               xhat->at(r, c) * sum_dxhat_xhat / T(R));
        }
      }
    });
  }

  // Inverted dropout: train mode zeroes with probability p and rescales the
  // survivors by 1/(1-p); eval mode is the identity. The mask comes from the
  // counter-based stream, so it is independent of evaluation order.
  Id dropout(Id a, double p, const DropoutKey &key, bool train) {
    if (p < 0.0 || p >= 1.0)
      throw Error("dropout probability must be in [0,1): " + std::to_string(p));
    if (!train || p == 0.0) {
      Tensor<T> out = val(a);
      return record(std::move(out),
                    [this, a](const Tensor<T> &g) { accum(a, g); });
    }
    const auto &A = val(a);
    auto mask = std::make_shared<std::vector<T>>(A.v.size());
    T keep_scale = T(1.0 / (1.0 - p));
    Tensor<T> out = A;
    for (std::size_t i = 0; i < A.v.size(); ++i) {
      T m = key.uniform(i) >= p ? keep_scale : T(0);
      (*mask)[i] = m;
      out.v[i] *= m;
    }
    return record(std::move(out), [this, a, mask](const Tensor<T> &g) {
      auto &ga = nodes_[a].grad;
      for (std::size_t i = 0; i < g.v.size(); ++i)
        ga.v[i] += g.v[i] * (*mask)[i];
    });
  }

  // Scaled dot-product attention with h heads over the full 64-d channel.
  // q: nA x D, k/v: nB x D. Returns nA x D (heads re-concatenated). When
  // save_attention is non-null the per-head weights are stored as an
  // (h*nA) x nB block for later reporting.
  Id multihead_attention(Id q, Id k, Id v, int heads,
                         Tensor<T> *save_attention = nullptr) {
    const auto &Q = val(q);
    const auto &K = val(k);
    const auto &V = val(v);
    int D = Q.n_cols;
    if (K.n_cols != D || V.n_cols != D || K.n_rows != V.n_rows || D % heads != 0)
      throw ShapeMismatch("multihead_attention " + shape_str(Q) + " / " +
                          shape_str(K) + " / " + shape_str(V));
    int nA = Q.n_rows, nB = K.n_rows, d = D / heads;
    T inv_sqrt_d = T(1) / std::sqrt(T(d));
    auto attn = std::make_shared<Tensor<T>>(heads * nA, nB);
    Tensor<T> out(nA, D);
    for (int h = 0; h < heads; ++h) {
      int c0 = h * d;
      for (int i = 0; i < nA; ++i) {
        // scores + stabilized softmax over B's atoms
        T mx = -std::numeric_limits<T>::infinity();
        std::vector<T> s(nB);
        for (int j = 0; j < nB; ++j) {
          T dot = T(0);
          for (int c = 0; c < d; ++c) dot += Q.at(i, c0 + c) * K.at(j, c0 + c);
          s[j] = dot * inv_sqrt_d;
          mx = std::max(mx, s[j]);
        }
        T sum = T(0);
        for (int j = 0; j < nB; ++j) {
          s[j] = std::exp(s[j] - mx);
          sum += s[j];
        }
        for (int j = 0; j < nB; ++j) {
          T a = s[j] / sum;
          attn->at(h * nA + i, j) = a;
          for (int c = 0; c < d; ++c) out.at(i, c0 + c) += a * V.at(j, c0 + c);
        }
      }
    }
    if (save_attention) *save_attention = *attn;
    return record(std::move(out), [this, q, k, v, heads, attn,
                                   inv_sqrt_d](const Tensor<T> &g) {
      const auto &Q2 = nodes_[q].val;
      const auto &K2 = nodes_[k].val;
      const auto &V2 = nodes_[v].val;
      auto &gq = nodes_[q].grad;
      auto &gk = nodes_[k].grad;
      auto &gv = nodes_[v].grad;
      int D = Q2.n_cols, nA = Q2.n_rows, nB = K2.n_rows;
      int d = D / heads;
      for (int h = 0; h < heads; ++h) {
        int c0 = h * d;
        for (int i = 0; i < nA; ++i) {
          // dA[j] = sum_c g[i,c]*V[j,c];  dV[j] += a[j]*g[i,c]
          std::vector<T> dA(nB);
          for (int j = 0; j < nB; ++j) {
            T a = attn->at(h * nA + i, j);
            T acc = T(0);
            for (int c = 0; c < d; ++c) {
              acc += g.at(i, c0 + c) * V2.at(j, c0 + c);
              gv.at(j, c0 + c) += a * g.at(i, c0 + c);
            }
            dA[j] = acc;
          }
          // softmax backward, then scores -> Q,K
          T dot = T(0);
          for (int j = 0; j < nB; ++j)
            dot += dA[j] * attn->at(h * nA + i, j);
          for (int j = 0; j < nB; ++j) {
            T ds = attn->at(h * nA + i, j) * (dA[j] - dot) * inv_sqrt_d;
            if (ds == T(0)) continue;
            for (int c = 0; c < d; ++c) {
              gq.at(i, c0 + c) += ds * K2.at(j, c0 + c);
              gk.at(j, c0 + c) += ds * Q2.at(i, c0 + c);
            }
          }
        }
      }
    });
  }

  Id mean_all(Id a) {
    const auto &A = val(a);
    T s = T(0);
    for (T x : A.v) s += x;
    T inv = T(1) / T(A.numel());
    return record(Tensor<T>::scalar(s * inv), [this, a, inv](const Tensor<T> &g) {
      auto &ga = nodes_[a].grad;
      for (auto &x : ga.v) x += g.v[0] * inv;
    });
  }

  // Mean binary cross-entropy on logits (stabilized). Labels must be 0/1.
  Id bce_with_logits(Id logits, const std::vector<int> &labels) {
    const auto &Z = val(logits);
    if (static_cast<int>(labels.size()) != Z.n_rows || Z.n_cols != 1)
      throw ShapeMismatch("bce_with_logits wants B x 1 logits, one label per row");
    for (int y : labels)
      if (y != 0 && y != 1)
        throw LabelOutOfRange("binary label " + std::to_string(y));
    int B = Z.n_rows;
    T loss = T(0);
    for (int i = 0; i < B; ++i) {
      T z = Z.v[i];
      T y = T(labels[i]);
      loss += std::max(z, T(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    loss /= T(B);
    return record(Tensor<T>::scalar(loss),
                  [this, logits, labels](const Tensor<T> &g) {
                    const auto &Z2 = nodes_[logits].val;
                    auto &gz = nodes_[logits].grad;
                    int B = Z2.n_rows;
                    for (int i = 0; i < B; ++i) {
                      T z = Z2.v[i];
                      T sig = T(1) / (T(1) + std::exp(-z));
                      gz.v[i] += g.v[0] * (sig - T(labels[i])) / T(B);
                    }
                  });
  }

  // Mean cross-entropy over rows whose label is not -1. Rows labeled -1
  // contribute exactly zero loss and zero gradient. An all-masked batch is
  // defined as zero loss; *all_masked (when given) reports that condition.
  Id masked_cross_entropy(Id logits, const std::vector<int> &labels,
                          bool *all_masked = nullptr) {
    const auto &Z = val(logits);
    int B = Z.n_rows, C = Z.n_cols;
    if (static_cast<int>(labels.size()) != B)
      throw ShapeMismatch("masked_cross_entropy label count");
    int active = 0;
    for (int y : labels) {
      if (y < -1 || y >= C)
        throw LabelOutOfRange("class label " + std::to_string(y) +
                              " for " + std::to_string(C) + " classes");
      if (y != -1) ++active;
    }
    if (all_masked) *all_masked = (active == 0);
    if (active == 0)
      return record(Tensor<T>::scalar(T(0)), [](const Tensor<T> &) {});
    T loss = T(0);
    for (int i = 0; i < B; ++i) {
      if (labels[i] == -1) continue;
      T mx = Z.at(i, 0);
      for (int c = 1; c < C; ++c) mx = std::max(mx, Z.at(i, c));
      T sum = T(0);
      for (int c = 0; c < C; ++c) sum += std::exp(Z.at(i, c) - mx);
      loss += mx + std::log(sum) - Z.at(i, labels[i]);
    }
    loss /= T(active);
    return record(Tensor<T>::scalar(loss), [this, logits, labels,
                                            active](const Tensor<T> &g) {
      const auto &Z2 = nodes_[logits].val;
      auto &gz = nodes_[logits].grad;
      int B = Z2.n_rows, C = Z2.n_cols;
      for (int i = 0; i < B; ++i) {
        if (labels[i] == -1) continue;
        T mx = Z2.at(i, 0);
        for (int c = 1; c < C; ++c) mx = std::max(mx, Z2.at(i, c));
        T sum = T(0);
        for (int c = 0; c < C; ++c) sum += std::exp(Z2.at(i, c) - mx);
        for (int c = 0; c < C; ++c) {
          T p = std::exp(Z2.at(i, c) - mx) / sum;
          T target = (c == labels[i]) ? T(1) : T(0);
          gz.at(i, c) += g.v[0] * (p - target) / T(active);
        }
      }
    });
  }

  // Seeds grad(loss)=1 and replays the record backwards.
  void backward(Id loss) {
    if (val(loss).numel() != 1)
      throw NotScalarLoss("tensor has shape " + shape_str(val(loss)));
    for (auto &n : nodes_) n.grad.fill(T(0));
    nodes_[loss].grad.v[0] = T(1);
    for (int i = loss; i >= 0; --i)
      if (nodes_[i].backward) nodes_[i].backward(nodes_[i].grad);
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> val;
    Tensor<T> grad;
    std::function<void(const Tensor<T> &)> backward;  // null for leaves
  };

  const Tensor<T> &val(Id id) const { return nodes_[id].val; }

  Id record(Tensor<T> out, std::function<void(const Tensor<T> &)> back) {
    Node n{std::move(out), {}, std::move(back)};
    n.grad = Tensor<T>(n.val.n_rows, n.val.n_cols);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size()) - 1;
  }

  void accum(Id id, const Tensor<T> &g) {
    auto &ga = nodes_[id].grad;
    for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
  }

  std::vector<Node> nodes_;
};

// Plain (non-tape) helpers for inference-time math.
template <class T>
inline T sigmoid(T z) {
  return T(1) / (T(1) + std::exp(-z));
}

template <class T>
inline std::vector<T> softmax(const std::vector<T> &z) {
  T mx = z[0];
  for (T x : z) mx = std::max(mx, x);
  T sum = T(0);
  std::vector<T> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - mx);
    sum += out[i];
  }
  for (auto &x : out) x /= sum;
  return out;
}

}  // namespace ddi::num
