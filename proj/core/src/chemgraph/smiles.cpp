#include "ddi/chemgraph/smiles.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "ddi/errors.hpp"

namespace ddi::chemgraph {
namespace {

// Standard valences used to derive implicit hydrogen counts. Multi-valent
// elements list all common states; the smallest one covering the explicit
// bond-order sum wins.
const std::map<std::string, std::vector<int>> kValences = {
    {"B", {3}}, {"C", {4}},       {"N", {3, 5}}, {"O", {2}},
    {"P", {3, 5}}, {"S", {2, 4, 6}}, {"F", {1}},    {"Cl", {1}},
    {"Br", {1}}, {"I", {1}},
};

bool is_organic_subset(const std::string &sym) {
  return kValences.count(sym) > 0;
}

bool is_aromatic_symbol(char c) {
  return c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's';
}

struct PendingBond {
  bool set = false;
  BondOrder order = BondOrder::Single;
  std::size_t pos = 0;
};

struct RingOpen {
  int atom = -1;
  PendingBond bond;
  std::size_t pos = 0;
};

struct Builder {
  MolGraph g;
  std::vector<std::pair<int, int>> seen_bonds;  // normalized endpoint pairs

  void add_bond(int a, int b, BondOrder order, std::size_t pos) {
    if (a == b) throw MalformedSmiles("bond to self", pos);
    int lo = std::min(a, b), hi = std::max(a, b);
    for (const auto &p : seen_bonds)
      if (p.first == lo && p.second == hi)
        throw MalformedSmiles("duplicate bond between atoms " +
                                  std::to_string(lo) + " and " +
                                  std::to_string(hi),
                              pos);
    if (order == BondOrder::Aromatic &&
        !(g.atoms[a].is_aromatic && g.atoms[b].is_aromatic))
      throw MalformedSmiles("aromatic bond between non-aromatic atoms", pos);
    seen_bonds.emplace_back(lo, hi);
    g.bonds.push_back(BondRecord{lo, hi, order, false});
  }
};

double order_value(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 1.0;
    case BondOrder::Double: return 2.0;
    case BondOrder::Triple: return 3.0;
    case BondOrder::Aromatic: return 1.5;
  }
  return 1.0;
}

// Marks ring bonds (non-bridge edges) and ring atoms via bridge detection.
void mark_rings(MolGraph &g) {
  int n = static_cast<int>(g.atoms.size());
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, bond idx)
  for (int bi = 0; bi < static_cast<int>(g.bonds.size()); ++bi) {
    adj[g.bonds[bi].a].emplace_back(g.bonds[bi].b, bi);
    adj[g.bonds[bi].b].emplace_back(g.bonds[bi].a, bi);
  }
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  // iterative DFS to avoid recursion limits on long chains
  struct Frame {
    int node;
    int parent_edge;
    std::size_t next_child = 0;
  };
  for (int start = 0; start < n; ++start) {
    if (disc[start] != -1) continue;
    std::vector<Frame> stack{{start, -1}};
    disc[start] = low[start] = timer++;
    while (!stack.empty()) {
      Frame &f = stack.back();
      if (f.next_child < adj[f.node].size()) {
        auto [to, edge] = adj[f.node][f.next_child++];
        if (edge == f.parent_edge) continue;
        if (disc[to] == -1) {
          disc[to] = low[to] = timer++;
          stack.push_back(Frame{to, edge});
        } else {
          low[f.node] = std::min(low[f.node], disc[to]);
          // non-tree edge in an undirected DFS always closes a cycle
          g.bonds[edge].in_ring = true;
        }
      } else {
        int node = f.node;
        int pedge = f.parent_edge;
        stack.pop_back();
        if (pedge != -1) {
          int parent = stack.back().node;
          low[parent] = std::min(low[parent], low[node]);
          // bridge iff low[node] > disc[parent]; everything else is cyclic
          if (low[node] <= disc[parent]) g.bonds[pedge].in_ring = true;
        }
      }
    }
  }
  for (const auto &b : g.bonds)
    if (b.in_ring) {
      g.atoms[b.a].in_ring = true;
      g.atoms[b.b].in_ring = true;
    }
}

void finish_atom_fields(MolGraph &g) {
  std::vector<double> bond_sum(g.atoms.size(), 0.0);
  std::vector<int> degree(g.atoms.size(), 0);
  for (const auto &b : g.bonds) {
    bond_sum[b.a] += order_value(b.order);
    bond_sum[b.b] += order_value(b.order);
    ++degree[b.a];
    ++degree[b.b];
  }
  for (std::size_t i = 0; i < g.atoms.size(); ++i) {
    auto &atom = g.atoms[i];
    atom.degree = degree[i];
    if (atom.implicit_hydrogens >= 0) continue;  // bracket atom, H explicit
    auto it = kValences.find(atom.element);
    int h = 0;
    if (it != kValences.end()) {
      if (atom.is_aromatic) {
        // lowercase notation: delocalized system accounted by the 1.5 bond
        // contributions, truncated; unwritable H stays 0 ([nH] is explicit)
        int sum = static_cast<int>(bond_sum[i]);
        h = std::max(0, it->second.front() - sum);
      } else {
        int sum = static_cast<int>(std::ceil(bond_sum[i] - 1e-9));
        int valence = it->second.back();
        for (int v : it->second)
          if (v >= sum) {
            valence = v;
            break;
          }
        h = std::max(0, valence - sum);
      }
    }
    atom.implicit_hydrogens = h;
  }
}

}  // namespace

MolGraph parse_smiles(const std::string &smiles) {
  std::string s = smiles;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.pop_back();
  if (s.empty()) throw MalformedSmiles("empty input", 0);

  Builder bld;
  bld.g.smiles_canonical_input = s;
  int prev = -1;
  std::vector<std::pair<int, std::size_t>> branch_stack;  // (prev, '(' pos)
  std::map<int, RingOpen> ring_open;
  PendingBond pending;

  auto new_atom = [&](AtomRecord atom, std::size_t pos) {
    bld.g.atoms.push_back(std::move(atom));
    int idx = static_cast<int>(bld.g.atoms.size()) - 1;
    if (prev >= 0) {
      BondOrder order;
      if (pending.set) {
        order = pending.order;
      } else if (bld.g.atoms[prev].is_aromatic && bld.g.atoms[idx].is_aromatic) {
        order = BondOrder::Aromatic;
      } else {
        order = BondOrder::Single;
      }
      bld.add_bond(prev, idx, order, pos);
    }
    pending = PendingBond{};
    prev = idx;
  };

  auto ring_closure = [&](int number, std::size_t pos) {
    if (prev < 0)
      throw MalformedSmiles("ring closure before any atom", pos);
    auto it = ring_open.find(number);
    if (it == ring_open.end()) {
      ring_open[number] = RingOpen{prev, pending, pos};
      pending = PendingBond{};
      return;
    }
    RingOpen open = it->second;
    ring_open.erase(it);
    BondOrder order;
    if (pending.set && open.bond.set) {
      if (pending.order != open.bond.order)
        throw MalformedSmiles("conflicting ring-closure bond orders", pos);
      order = pending.order;
    } else if (pending.set) {
      order = pending.order;
    } else if (open.bond.set) {
      order = open.bond.order;
    } else if (bld.g.atoms[open.atom].is_aromatic &&
               bld.g.atoms[prev].is_aromatic) {
      order = BondOrder::Aromatic;
    } else {
      order = BondOrder::Single;
    }
    bld.add_bond(open.atom, prev, order, pos);
    pending = PendingBond{};
  };

  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c == '(') {
      if (prev < 0)
        throw MalformedSmiles("branch before any atom", i);
      branch_stack.emplace_back(prev, i);
      ++i;
    } else if (c == ')') {
      if (branch_stack.empty())
        throw MalformedSmiles("unmatched ')'", i);
      prev = branch_stack.back().first;
      branch_stack.pop_back();
      ++i;
    } else if (c == '-' || c == '=' || c == '#' || c == ':') {
      if (pending.set) throw MalformedSmiles("two bond symbols in a row", i);
      pending.set = true;
      pending.pos = i;
      pending.order = c == '-'   ? BondOrder::Single
                      : c == '=' ? BondOrder::Double
                      : c == '#' ? BondOrder::Triple
                                 : BondOrder::Aromatic;
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      ring_closure(c - '0', i);
      ++i;
    } else if (c == '%') {
      if (i + 2 >= s.size() ||
          !std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
          !std::isdigit(static_cast<unsigned char>(s[i + 2])))
        throw MalformedSmiles("'%' needs two digits", i);
      ring_closure((s[i + 1] - '0') * 10 + (s[i + 2] - '0'), i);
      i += 3;
    } else if (c == '[') {
      std::size_t start = i;
      ++i;
      if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
        throw UnsupportedFeature("isotope specification", i);
      AtomRecord atom;
      if (i < s.size() && std::isupper(static_cast<unsigned char>(s[i]))) {
        atom.element.push_back(s[i++]);
        if (i < s.size() && std::islower(static_cast<unsigned char>(s[i])) &&
            s[i] != 'h')
          atom.element.push_back(s[i++]);
      } else if (i < s.size() && is_aromatic_symbol(s[i])) {
        atom.element.push_back(static_cast<char>(std::toupper(s[i])));
        atom.is_aromatic = true;
        ++i;
      } else {
        throw MalformedSmiles("expected element symbol in brackets", i);
      }
      if (i < s.size() && s[i] == '@')
        throw UnsupportedFeature("chirality descriptor '@'", i);
      int h_count = 0;
      if (i < s.size() && s[i] == 'H') {
        ++i;
        h_count = 1;
        if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
          h_count = s[i++] - '0';
      }
      int charge = 0;
      if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
        int sign = s[i] == '+' ? 1 : -1;
        char symbol = s[i];
        ++i;
        if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
          charge = sign * (s[i++] - '0');
        } else {
          charge = sign;
          while (i < s.size() && s[i] == symbol) {
            charge += sign;
            ++i;
          }
        }
      }
      if (i >= s.size() || s[i] != ']')
        throw MalformedSmiles("unbalanced '['", start);
      ++i;
      atom.formal_charge = charge;
      atom.implicit_hydrogens = h_count;  // >=0 marks "explicitly given"
      new_atom(std::move(atom), start);
    } else if (c == 'C' && i + 1 < s.size() && s[i + 1] == 'l') {
      AtomRecord atom;
      atom.element = "Cl";
      atom.implicit_hydrogens = -1;
      new_atom(std::move(atom), i);
      i += 2;
    } else if (c == 'B' && i + 1 < s.size() && s[i + 1] == 'r') {
      AtomRecord atom;
      atom.element = "Br";
      atom.implicit_hydrogens = -1;
      new_atom(std::move(atom), i);
      i += 2;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      if (!is_organic_subset(sym))
        throw UnsupportedFeature("element '" + sym +
                                     "' outside the organic subset "
                                     "(use brackets)",
                                 i);
      AtomRecord atom;
      atom.element = sym;
      atom.implicit_hydrogens = -1;
      new_atom(std::move(atom), i);
      ++i;
    } else if (is_aromatic_symbol(c)) {
      AtomRecord atom;
      atom.element = std::string(1, static_cast<char>(std::toupper(c)));
      atom.is_aromatic = true;
      atom.implicit_hydrogens = -1;
      new_atom(std::move(atom), i);
      ++i;
    } else if (c == '.') {
      throw UnsupportedFeature("dot-disconnected fragments", i);
    } else if (c == '/' || c == '\\' || c == '@') {
      throw UnsupportedFeature(std::string("stereo descriptor '") + c + "'", i);
    } else if (c == '*') {
      throw UnsupportedFeature("wildcard atom '*'", i);
    } else {
      throw MalformedSmiles(std::string("unexpected character '") + c + "'", i);
    }
  }

  if (!branch_stack.empty())
    throw MalformedSmiles("unmatched '('", branch_stack.back().second);
  if (!ring_open.empty())
    throw MalformedSmiles("unclosed ring closure " +
                              std::to_string(ring_open.begin()->first),
                          ring_open.begin()->second.pos);
  if (pending.set)
    throw MalformedSmiles("dangling bond symbol", pending.pos);
  if (bld.g.atoms.empty()) throw MalformedSmiles("no atoms", 0);

  finish_atom_fields(bld.g);
  mark_rings(bld.g);
  return bld.g;
}

}  // namespace ddi::chemgraph
