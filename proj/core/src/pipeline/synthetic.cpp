#include "ddi/pipeline/synthetic.hpp"

#include <string>

#include "ddi/num/rng.hpp"

namespace ddi::pipeline {
namespace {

// marker 0 means "plain carbon skeleton"
std::string make_molecule(num::Prng &rng, char marker) {
  int length = 4 + static_cast<int>(num::uniform_index(rng, 9));  // 4..12
  int marker_pos = -1;
  if (marker == 'F') {
    // fluorine is monovalent, so it can only terminate the chain
    marker_pos = num::uniform_index(rng, 2) == 0 ? 0 : length - 1;
  } else if (marker != 0) {
    marker_pos = static_cast<int>(num::uniform_index(rng, length));
  }
  int branch_pos = -1;
  char branch = 0;
  if (num::uniform_real(rng, 0.0, 1.0) < 0.5) {
    branch = num::uniform_index(rng, 2) == 0 ? 'C' : 'L';  // L -> Cl distractor
    branch_pos = static_cast<int>(num::uniform_index(rng, length));
    if (branch_pos == marker_pos) branch = 0;  // keep the marker unsubstituted
  }
  std::string out;
  for (int i = 0; i < length; ++i) {
    out += (i == marker_pos) ? marker : 'C';
    if (i == branch_pos && branch != 0 && i != 0 && i != length - 1)
      out += branch == 'L' ? "(Cl)" : "(C)";
  }
  return out;
}

constexpr char kMarkers[4] = {'N', 'O', 'S', 'F'};

struct MarkerPair {
  char a, b;
};

// the ten unordered marker pairs; type = index(a) XOR index(b)
constexpr MarkerPair kCombos[10] = {
    {'N', 'N'}, {'O', 'O'}, {'S', 'S'}, {'F', 'F'}, {'N', 'O'},
    {'S', 'F'}, {'N', 'S'}, {'O', 'F'}, {'N', 'F'}, {'O', 'S'},
};

int marker_index(char m) {
  for (int i = 0; i < 4; ++i)
    if (kMarkers[i] == m) return i;
  return -1;
}

}  // namespace

std::vector<data::PairRecord> make_synthetic_pairs(const SyntheticSpec &spec) {
  num::Prng rng = num::make_prng(spec.seed);
  std::vector<data::PairRecord> out;
  out.reserve(spec.n_pairs);
  long next_id = 0;
  auto fresh_id = [&] { return "SYN" + std::to_string(next_id++); };

  for (int i = 0; i < spec.n_pairs; ++i) {
    data::PairRecord rec;
    char ma, mb;
    if (i % 2 == 0) {  // positive: cycle through the marker combinations
      const MarkerPair &combo = kCombos[(i / 2) % 10];
      ma = combo.a;
      mb = combo.b;
      rec.binary_label = 1;
      rec.type_code = marker_index(ma) ^ marker_index(mb);
    } else {  // negative: plain skeletons on both sides
      ma = 0, mb = 0;
      rec.binary_label = 0;
      rec.type_code = -1;
    }
    if (num::uniform_index(rng, 2) == 1) std::swap(ma, mb);
    rec.drug1_id = fresh_id();
    rec.drug2_id = fresh_id();
    rec.smiles1 = make_molecule(rng, ma);
    rec.smiles2 = make_molecule(rng, mb);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace ddi::pipeline
