#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "ddi/chemgraph/cache.hpp"
#include "ddi/errors.hpp"

using namespace ddi;
using namespace ddi::chemgraph;

namespace {
std::string temp_path(const char *name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("cache deduplicates and accumulates other-element counts") {
  GraphCache cache = GraphCache::build(
      {"CCO", "CCO", "c1ccccc1", "[Fe]C[Fe]"});
  CHECK(cache.size() == 3);
  CHECK(cache.total_other_elements() == 2);
  CHECK(cache.find("CCO") != nullptr);
  CHECK(cache.find("OCC") == nullptr);  // keyed by exact string
  CHECK(cache.at("c1ccccc1").graph.atoms.size() == 6);
  CHECK_THROWS_AS(cache.at("missing"), MissingSmiles);
}

TEST_CASE("build errors carry the offending SMILES") {
  try {
    GraphCache::build({"CCO", "C(C"});
    FAIL("expected MalformedSmiles");
  } catch (const MalformedSmiles &e) {
    CHECK(std::string(e.what()).find("C(C") != std::string::npos);
  }
}

TEST_CASE("save/load round-trips bit-exactly") {
  GraphCache cache = GraphCache::build(
      {"CC(=O)Oc1ccccc1C(=O)O", "CCN", "[NH4+]", "C%12CCCCC%12"});
  std::string path = temp_path("ddi_cache_test.bin");
  cache.save(path);
  GraphCache loaded = GraphCache::load(path);
  std::remove(path.c_str());

  REQUIRE(loaded.size() == cache.size());
  CHECK(loaded.total_other_elements() == cache.total_other_elements());
  for (const auto &[smiles, entry] : cache.entries()) {
    const auto *l = loaded.find(smiles);
    REQUIRE(l != nullptr);
    CHECK(l->graph.atoms.size() == entry.graph.atoms.size());
    CHECK(l->graph.bonds.size() == entry.graph.bonds.size());
    for (std::size_t i = 0; i < entry.graph.atoms.size(); ++i) {
      CHECK(l->graph.atoms[i].element == entry.graph.atoms[i].element);
      CHECK(l->graph.atoms[i].degree == entry.graph.atoms[i].degree);
      CHECK(l->graph.atoms[i].formal_charge == entry.graph.atoms[i].formal_charge);
      CHECK(l->graph.atoms[i].is_aromatic == entry.graph.atoms[i].is_aromatic);
      CHECK(l->graph.atoms[i].implicit_hydrogens ==
            entry.graph.atoms[i].implicit_hydrogens);
      CHECK(l->graph.atoms[i].in_ring == entry.graph.atoms[i].in_ring);
    }
    CHECK(l->features.atom_features.v == entry.features.atom_features.v);
    CHECK(l->features.bond_features.v == entry.features.bond_features.v);
    CHECK(l->features.arc_src == entry.features.arc_src);
    CHECK(l->features.arc_dst == entry.features.arc_dst);
  }
}

TEST_CASE("loading a missing or corrupt file fails cleanly") {
  CHECK_THROWS_AS(GraphCache::load("/nonexistent/path/cache.bin"), IoError);
  std::string path = temp_path("ddi_cache_corrupt.bin");
  {
    FILE *f = std::fopen(path.c_str(), "wb");
    std::fputs("not a cache", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(GraphCache::load(path), IoError);
  std::remove(path.c_str());
}
