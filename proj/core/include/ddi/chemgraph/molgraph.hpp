#pragma once

#include <string>
#include <vector>

namespace ddi::chemgraph {

enum class BondOrder { Single, Double, Triple, Aromatic };

struct AtomRecord {
  std::string element;
  int degree = 0;            // heavy-atom neighbors
  int formal_charge = 0;
  bool is_aromatic = false;
  int implicit_hydrogens = 0;
  bool in_ring = false;
};

struct BondRecord {
  int a = 0;  // endpoints, a < b
  int b = 0;
  BondOrder order = BondOrder::Single;
  bool in_ring = false;
};

// Heavy-atom molecular graph. Bonds are undirected and stored once; the
// featurizer expands them to two directed arcs.
struct MolGraph {
  std::vector<AtomRecord> atoms;
  std::vector<BondRecord> bonds;
  std::string smiles_canonical_input;  // exact input text, cache key
};

}  // namespace ddi::chemgraph
