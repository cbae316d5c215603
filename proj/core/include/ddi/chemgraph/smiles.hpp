#pragma once

#include <string>

#include "ddi/chemgraph/molgraph.hpp"

namespace ddi::chemgraph {

// Parses the supported SMILES subset into a heavy-atom graph.
//
// Supported: organic-subset atoms B C N O P S F Cl Br I; aromatic lowercase
// b c n o p s; bracket atoms with optional charge and explicit H count; ring
// closures 0-9 and %nn; branches; bond symbols - = # :.
// Rejected (UnsupportedFeature): stereo markers / \ @, isotopes, wildcard *,
// dot-disconnected fragments.
//
// Throws MalformedSmiles on unbalanced parentheses/brackets/ring closures,
// both with the offending character position.
MolGraph parse_smiles(const std::string &smiles);

}  // namespace ddi::chemgraph
