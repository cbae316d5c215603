#pragma once

#include <string>
#include <vector>

#include "ddi/chemgraph/molgraph.hpp"
#include "ddi/num/tensor.hpp"

namespace ddi::chemgraph {

// Frozen feature layout.
//
// Atom row (31):
//   [0..16]  element one-hot over the 16-symbol vocabulary + "other"
//   [17..22] degree one-hot 0-5 (clipped)
//   [23..27] formal charge one-hot -2..+2 (clipped)
//   [28]     aromatic flag
//   [29]     in-ring flag
//   [30]     implicit H count, clipped to 0-3 and scaled to [0,1]
//
// Bond row (12):
//   [0..3]   order one-hot (single, double, triple, aromatic)
//   [4]      in-ring flag
//   [5]      in-ring bond with both endpoints aromatic
//   [6..11]  endpoint-degree-sum one-hot 2-7 (clipped)
struct FeatureSchema {
  static constexpr int kAtomDim = 31;
  static constexpr int kBondDim = 12;

  std::vector<std::string> element_vocabulary = {
      "C", "N", "O", "S", "F", "Cl", "Br", "I",
      "P", "B", "Na", "K", "Li", "Ca", "Se", "Si"};

  int atom_dim() const { return kAtomDim; }
  int bond_dim() const { return kBondDim; }

  // Index into the element one-hot block; vocabulary size = "other" slot.
  int element_slot(const std::string &element) const;
};

// Featurized molecule ready for the encoder. Arcs are directed: undirected
// bond k expands to arcs 2k (a->b) and 2k+1 (b->a) with identical features.
struct FeaturizedGraph {
  num::Tensor<float> atom_features;  // n_atoms x 31
  num::Tensor<float> bond_features;  // 2*n_bonds x 12
  std::vector<int> arc_src;
  std::vector<int> arc_dst;
  int other_element_count = 0;  // atoms that fell into the "other" slot
};

num::Tensor<float> featurize_atoms(const MolGraph &g, const FeatureSchema &schema,
                                   int *other_count = nullptr);
num::Tensor<float> featurize_bonds(const MolGraph &g, const FeatureSchema &schema);

FeaturizedGraph featurize(const MolGraph &g, const FeatureSchema &schema);

}  // namespace ddi::chemgraph
