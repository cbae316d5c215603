#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ddi/errors.hpp"
#include "ddi/num/tensor.hpp"

namespace ddi::num {

// Named parameter registry for one model instance. Non-trainable entries
// carry state (batch-norm running statistics) that checkpoints must preserve
// but the optimizer must not touch.
template <class T>
struct ParamSet {
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool trainable = true;
  };
  std::vector<Entry> entries;

  Tensor<T> &add(const std::string &name, Tensor<T> t, bool trainable = true) {
    entries.push_back(Entry{name, std::move(t), trainable});
    return entries.back().tensor;
  }

  Tensor<T> *find(const std::string &name) {
    for (auto &e : entries)
      if (e.name == name) return &e.tensor;
    return nullptr;
  }

  long count_trainable(const std::string &prefix = "") const {
    long n = 0;
    for (const auto &e : entries)
      if (e.trainable && e.name.rfind(prefix, 0) == 0)
        n += static_cast<long>(e.tensor.numel());
    return n;
  }
};

namespace detail {
inline void write_u64(std::ostream &os, std::uint64_t x) {
  os.write(reinterpret_cast<const char *>(&x), sizeof(x));
}
inline std::uint64_t read_u64(std::istream &is) {
  std::uint64_t x = 0;
  is.read(reinterpret_cast<char *>(&x), sizeof(x));
  return x;
}
inline void write_str(std::ostream &os, const std::string &s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string read_str(std::istream &is) {
  std::uint64_t n = read_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}
}  // namespace detail

inline constexpr std::uint64_t kCheckpointSchemaVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'D', 'D', 'I', 'C', 'K', 'P', 'T', '1'};

// Binary checkpoint: parameter-path -> shape + raw little-endian values,
// plus a free-form string metadata section. Round-trips bit-exactly.
template <class T>
void save_checkpoint(const std::string &path, const ParamSet<T> &params,
                     const std::map<std::string, std::string> &meta = {}) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_u64(os, kCheckpointSchemaVersion);
  detail::write_u64(os, sizeof(T));  // scalar width tag
  detail::write_u64(os, meta.size());
  for (const auto &[k, v] : meta) {
    detail::write_str(os, k);
    detail::write_str(os, v);
  }
  detail::write_u64(os, params.entries.size());
  for (const auto &e : params.entries) {
    detail::write_str(os, e.name);
    detail::write_u64(os, e.trainable ? 1 : 0);
    detail::write_u64(os, static_cast<std::uint64_t>(e.tensor.n_rows));
    detail::write_u64(os, static_cast<std::uint64_t>(e.tensor.n_cols));
    os.write(reinterpret_cast<const char *>(e.tensor.v.data()),
             static_cast<std::streamsize>(e.tensor.v.size() * sizeof(T)));
  }
  if (!os) throw IoError("short write to checkpoint " + path);
}

template <class T>
ParamSet<T> load_checkpoint(const std::string &path,
                            std::map<std::string, std::string> *meta = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, 8) != std::string(kCheckpointMagic, 8))
    throw IoError("not a checkpoint file: " + path);
  std::uint64_t version = detail::read_u64(is);
  if (version != kCheckpointSchemaVersion)
    throw IoError("unsupported checkpoint schema version " +
                  std::to_string(version));
  std::uint64_t width = detail::read_u64(is);
  if (width != sizeof(T))
    throw IoError("checkpoint scalar width " + std::to_string(width) +
                  " does not match expected " + std::to_string(sizeof(T)));
  std::uint64_t n_meta = detail::read_u64(is);
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    std::string k = detail::read_str(is);
    std::string v = detail::read_str(is);
    if (meta) (*meta)[k] = v;
  }
  ParamSet<T> params;
  std::uint64_t n = detail::read_u64(is);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name = detail::read_str(is);
    bool trainable = detail::read_u64(is) != 0;
    int rows = static_cast<int>(detail::read_u64(is));
    int cols = static_cast<int>(detail::read_u64(is));
    Tensor<T> t(rows, cols);
    is.read(reinterpret_cast<char *>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(T)));
    params.add(name, std::move(t), trainable);
  }
  if (!is) throw IoError("truncated checkpoint " + path);
  return params;
}

}  // namespace ddi::num
