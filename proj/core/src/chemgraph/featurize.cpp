#include "ddi/chemgraph/featurize.hpp"

#include <algorithm>

namespace ddi::chemgraph {

int FeatureSchema::element_slot(const std::string &element) const {
  for (std::size_t i = 0; i < element_vocabulary.size(); ++i)
    if (element_vocabulary[i] == element) return static_cast<int>(i);
  return static_cast<int>(element_vocabulary.size());  // "other"
}

num::Tensor<float> featurize_atoms(const MolGraph &g, const FeatureSchema &schema,
                                   int *other_count) {
  int n = static_cast<int>(g.atoms.size());
  num::Tensor<float> out(n, FeatureSchema::kAtomDim);
  int n_vocab = static_cast<int>(schema.element_vocabulary.size());
  int others = 0;
  for (int i = 0; i < n; ++i) {
    const AtomRecord &a = g.atoms[i];
    int slot = schema.element_slot(a.element);
    if (slot == n_vocab) ++others;
    out.at(i, slot) = 1.0f;
    int degree = std::clamp(a.degree, 0, 5);
    out.at(i, 17 + degree) = 1.0f;
    int charge = std::clamp(a.formal_charge, -2, 2);
    out.at(i, 23 + (charge + 2)) = 1.0f;
    out.at(i, 28) = a.is_aromatic ? 1.0f : 0.0f;
    out.at(i, 29) = a.in_ring ? 1.0f : 0.0f;
    out.at(i, 30) = static_cast<float>(std::clamp(a.implicit_hydrogens, 0, 3)) / 3.0f;
  }
  if (other_count) *other_count = others;
  return out;
}

num::Tensor<float> featurize_bonds(const MolGraph &g, const FeatureSchema &) {
  int nb = static_cast<int>(g.bonds.size());
  num::Tensor<float> out(2 * nb, FeatureSchema::kBondDim);
  for (int k = 0; k < nb; ++k) {
    const BondRecord &b = g.bonds[k];
    float row[FeatureSchema::kBondDim] = {};
    row[static_cast<int>(b.order)] = 1.0f;
    row[4] = b.in_ring ? 1.0f : 0.0f;
    row[5] = (b.in_ring && g.atoms[b.a].is_aromatic && g.atoms[b.b].is_aromatic)
                 ? 1.0f
                 : 0.0f;
    int deg_sum = std::clamp(g.atoms[b.a].degree + g.atoms[b.b].degree, 2, 7);
    row[6 + (deg_sum - 2)] = 1.0f;
    for (int c = 0; c < FeatureSchema::kBondDim; ++c) {
      out.at(2 * k, c) = row[c];
      out.at(2 * k + 1, c) = row[c];
    }
  }
  return out;
}

FeaturizedGraph featurize(const MolGraph &g, const FeatureSchema &schema) {
  FeaturizedGraph f;
  f.atom_features = featurize_atoms(g, schema, &f.other_element_count);
  f.bond_features = featurize_bonds(g, schema);
  f.arc_src.reserve(2 * g.bonds.size());
  f.arc_dst.reserve(2 * g.bonds.size());
  for (const auto &b : g.bonds) {
    f.arc_src.push_back(b.a);
    f.arc_dst.push_back(b.b);
    f.arc_src.push_back(b.b);
    f.arc_dst.push_back(b.a);
  }
  return f;
}

}  // namespace ddi::chemgraph
