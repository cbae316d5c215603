#pragma once

#include <string>

#include "ddi/errors.hpp"

namespace ddi::model {

enum class Variant { Concat, CrossAtt, Ternary };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::Concat: return "concat";
    case Variant::CrossAtt: return "crossatt";
    case Variant::Ternary: return "ternary";
  }
  throw UnknownVariant("enum value out of range");
}

inline Variant variant_from_string(const std::string &s) {
  if (s == "concat") return Variant::Concat;
  if (s == "crossatt") return Variant::CrossAtt;
  if (s == "ternary") return Variant::Ternary;
  throw UnknownVariant(s);
}

struct ModelConfig {
  int hidden_dim = 64;
  int n_mp_layers = 3;
  int n_heads = 4;
  double dropout_p = 0.2;
  int n_classes = 86;
  int atom_dim = 31;
  int bond_dim = 12;
  Variant variant = Variant::Concat;
  int topk = 3;
  int head_hidden = 256;

  void validate() const {
    if (hidden_dim % n_heads != 0)
      throw ConfigMismatch("hidden_dim must be divisible by n_heads");
    if (topk < 1) throw ConfigMismatch("topk must be >= 1");
    if (n_mp_layers < 1) throw ConfigMismatch("n_mp_layers must be >= 1");
  }
};

}  // namespace ddi::model
