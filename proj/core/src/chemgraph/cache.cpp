#include "ddi/chemgraph/cache.hpp"

#include <cstdint>
#include <fstream>

#include "ddi/chemgraph/smiles.hpp"

#include "ddi/errors.hpp"

namespace ddi::chemgraph {
namespace {

constexpr char kMagic[8] = {'D', 'D', 'I', 'G', 'C', 'A', 'C', '1'};

void write_u64(std::ostream &os, std::uint64_t x) {
  os.write(reinterpret_cast<const char *>(&x), sizeof(x));
}
std::uint64_t read_u64(std::istream &is) {
  std::uint64_t x = 0;
  is.read(reinterpret_cast<char *>(&x), sizeof(x));
  return x;
}
void write_str(std::ostream &os, const std::string &s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string read_str(std::istream &is) {
  std::string s(read_u64(is), '\0');
  is.read(s.data(), static_cast<std::streamsize>(s.size()));
  return s;
}
void write_mat(std::ostream &os, const num::Tensor<float> &m) {
  write_u64(os, static_cast<std::uint64_t>(m.n_rows));
  write_u64(os, static_cast<std::uint64_t>(m.n_cols));
  os.write(reinterpret_cast<const char *>(m.v.data()),
           static_cast<std::streamsize>(m.v.size() * sizeof(float)));
}
num::Tensor<float> read_mat(std::istream &is) {
  int rows = static_cast<int>(read_u64(is));
  int cols = static_cast<int>(read_u64(is));
  num::Tensor<float> m(rows, cols);
  is.read(reinterpret_cast<char *>(m.v.data()),
          static_cast<std::streamsize>(m.v.size() * sizeof(float)));
  return m;
}
void write_ints(std::ostream &os, const std::vector<int> &v) {
  write_u64(os, v.size());
  os.write(reinterpret_cast<const char *>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(int)));
}
std::vector<int> read_ints(std::istream &is) {
  std::vector<int> v(read_u64(is));
  is.read(reinterpret_cast<char *>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(int)));
  return v;
}

}  // namespace

GraphCache GraphCache::build(const std::vector<std::string> &smiles_set,
                             const FeatureSchema &schema) {
  GraphCache cache;
  for (const auto &smiles : smiles_set) {
    if (cache.entries_.count(smiles)) continue;
    Entry e;
    try {
      e.graph = parse_smiles(smiles);
    } catch (const MalformedSmiles &err) {
      throw MalformedSmiles(std::string(err.what()) + " [SMILES: " + smiles + "]",
                            err.position);
    } catch (const UnsupportedFeature &err) {
      throw UnsupportedFeature(
          std::string(err.what()) + " [SMILES: " + smiles + "]", err.position);
    }
    e.features = featurize(e.graph, schema);
    cache.total_other_elements_ += e.features.other_element_count;
    cache.entries_.emplace(smiles, std::move(e));
  }
  return cache;
}

const GraphCache::Entry *GraphCache::find(const std::string &smiles) const {
  auto it = entries_.find(smiles);
  return it == entries_.end() ? nullptr : &it->second;
}

const GraphCache::Entry &GraphCache::at(const std::string &smiles) const {
  const Entry *e = find(smiles);
  if (!e) throw MissingSmiles("not in graph cache: " + smiles);
  return *e;
}

void GraphCache::save(const std::string &path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write graph cache " + path);
  os.write(kMagic, sizeof(kMagic));
  write_u64(os, entries_.size());
  write_u64(os, static_cast<std::uint64_t>(total_other_elements_));
  for (const auto &[smiles, e] : entries_) {
    write_str(os, smiles);
    write_u64(os, e.graph.atoms.size());
    for (const auto &a : e.graph.atoms) {
      write_str(os, a.element);
      write_u64(os, static_cast<std::uint64_t>(a.degree));
      write_u64(os, static_cast<std::uint64_t>(
                        static_cast<std::int64_t>(a.formal_charge)));
      write_u64(os, a.is_aromatic ? 1 : 0);
      write_u64(os, static_cast<std::uint64_t>(a.implicit_hydrogens));
      write_u64(os, a.in_ring ? 1 : 0);
    }
    write_u64(os, e.graph.bonds.size());
    for (const auto &b : e.graph.bonds) {
      write_u64(os, static_cast<std::uint64_t>(b.a));
      write_u64(os, static_cast<std::uint64_t>(b.b));
      write_u64(os, static_cast<std::uint64_t>(b.order));
      write_u64(os, b.in_ring ? 1 : 0);
    }
    write_mat(os, e.features.atom_features);
    write_mat(os, e.features.bond_features);
    write_ints(os, e.features.arc_src);
    write_ints(os, e.features.arc_dst);
    write_u64(os, static_cast<std::uint64_t>(e.features.other_element_count));
  }
  if (!os) throw IoError("short write to graph cache " + path);
}

GraphCache GraphCache::load(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read graph cache " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, 8) != std::string(kMagic, 8))
    throw IoError("not a graph cache file: " + path);
  GraphCache cache;
  std::uint64_t n = read_u64(is);
  cache.total_other_elements_ = static_cast<int>(read_u64(is));
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string smiles = read_str(is);
    Entry e;
    e.graph.smiles_canonical_input = smiles;
    std::uint64_t n_atoms = read_u64(is);
    e.graph.atoms.resize(n_atoms);
    for (auto &a : e.graph.atoms) {
      a.element = read_str(is);
      a.degree = static_cast<int>(read_u64(is));
      a.formal_charge = static_cast<int>(static_cast<std::int64_t>(read_u64(is)));
      a.is_aromatic = read_u64(is) != 0;
      a.implicit_hydrogens = static_cast<int>(read_u64(is));
      a.in_ring = read_u64(is) != 0;
    }
    std::uint64_t n_bonds = read_u64(is);
    e.graph.bonds.resize(n_bonds);
    for (auto &b : e.graph.bonds) {
      b.a = static_cast<int>(read_u64(is));
      b.b = static_cast<int>(read_u64(is));
      b.order = static_cast<BondOrder>(read_u64(is));
      b.in_ring = read_u64(is) != 0;
    }
    e.features.atom_features = read_mat(is);
    e.features.bond_features = read_mat(is);
    e.features.arc_src = read_ints(is);
    e.features.arc_dst = read_ints(is);
    e.features.other_element_count = static_cast<int>(read_u64(is));
    cache.entries_.emplace(std::move(smiles), std::move(e));
  }
  if (!is) throw IoError("truncated graph cache " + path);
  return cache;
}

}  // namespace ddi::chemgraph
