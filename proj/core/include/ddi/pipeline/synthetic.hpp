#pragma once

#include <cstdint>
#include <vector>

#include "ddi/data/records.hpp"

namespace ddi::pipeline {

// Generated pair benchmark with a planted cross-molecule mechanism.
//
// Each molecule is a small carbon skeleton carrying at most one marker atom
// from {N, O, S, F}. A pair is positive exactly when both molecules carry a
// marker; negatives are plain-skeleton pairs. The binary label therefore
// depends only on per-molecule presence and is equally easy for every
// variant.
//
// The type code is where the combination matters. With marker indices
// N=0, O=1, S=2, F=3, the type of a positive pair is the XOR of its two
// marker indices, so each type mixes disjoint marker pairs:
//
//   0 {NN, OO, SS, FF}   1 {NO, SF}   2 {NS, OF}   3 {NF, OS}
//
// No per-molecule scoring f with a rule of the form f(a) + f(b) separates
// these classes (a Latin-square quotient), so recovering the type requires
// genuinely relating the two markers across the pair rather than reading
// each molecule off separately.
struct SyntheticSpec {
  std::uint64_t seed = 7;
  int n_pairs = 2000;
};

inline constexpr int kSyntheticTypeCount = 4;

std::vector<data::PairRecord> make_synthetic_pairs(const SyntheticSpec &spec);

}  // namespace ddi::pipeline
