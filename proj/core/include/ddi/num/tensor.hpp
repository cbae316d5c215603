#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "ddi/errors.hpp"

namespace ddi::num {

// Dense rank-2 tensor. Scalars are 1x1, row vectors 1xN.
template <class T>
struct Tensor {
  int n_rows = 0;
  int n_cols = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int rows, int cols)
      : n_rows(rows), n_cols(cols),
        v(static_cast<std::size_t>(rows) * cols, T(0)) {}
  Tensor(int rows, int cols, std::vector<T> data)
      : n_rows(rows), n_cols(cols), v(std::move(data)) {
    if (v.size() != static_cast<std::size_t>(rows) * cols)
      throw ShapeMismatch("tensor data size does not match extents");
  }

  static Tensor scalar(T x) { return Tensor(1, 1, {x}); }
  static Tensor row(std::vector<T> data) {
    int n = static_cast<int>(data.size());
    return Tensor(1, n, std::move(data));
  }

  std::size_t numel() const { return v.size(); }
  T &at(int r, int c) { return v[static_cast<std::size_t>(r) * n_cols + c]; }
  const T &at(int r, int c) const {
    return v[static_cast<std::size_t>(r) * n_cols + c];
  }
  bool same_shape(const Tensor &o) const {
    return n_rows == o.n_rows && n_cols == o.n_cols;
  }
  void fill(T x) { std::fill(v.begin(), v.end(), x); }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(n_rows, n_cols);
    for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

template <class T>
inline std::string shape_str(const Tensor<T> &t) {
  return "[" + std::to_string(t.n_rows) + "x" + std::to_string(t.n_cols) + "]";
}

}  // namespace ddi::num
