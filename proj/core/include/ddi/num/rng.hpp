#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ddi::num {

// SplitMix64 finalizer. Used both as a hash combiner and as the basis of the
// counter-based dropout stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + b + (a << 6) + (a >> 2)));
}

// Counter-based uniform stream keyed by (seed, epoch, batch, layer). Each
// element index maps to an independent draw, so results do not depend on
// evaluation order.
struct DropoutKey {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::uint64_t batch = 0;
  std::uint64_t layer = 0;

  // Uniform in [0,1) for element i.
  double uniform(std::uint64_t i) const {
    std::uint64_t h = splitmix64(seed);
    h = hash_combine(h, epoch);
    h = hash_combine(h, batch);
    h = hash_combine(h, layer);
    h = hash_combine(h, i);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  }
};

// The project-wide portable PRNG is std::mt19937_64: a fixed, fully specified
// algorithm whose output is identical on every conforming platform.
using Prng = std::mt19937_64;

inline Prng make_prng(std::uint64_t seed) { return Prng(seed); }

// Hand-rolled Fisher-Yates so the shuffle algorithm itself is pinned (the
// standard library's std::shuffle is not bit-portable across implementations).
template <class T>
void fisher_yates(std::vector<T> &items, Prng &rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::uint64_t j = rng() % i;  // modulo bias negligible for our sizes
    std::swap(items[i - 1], items[j]);
  }
}

// Uniform integer in [0, n) drawn portably (no std::uniform_int_distribution,
// whose mapping is implementation-defined).
inline std::uint64_t uniform_index(Prng &rng, std::uint64_t n) {
  return rng() % n;
}

// Uniform double in [lo, hi), portable.
inline double uniform_real(Prng &rng, double lo, double hi) {
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

}  // namespace ddi::num
