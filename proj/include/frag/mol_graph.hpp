#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "frag/errors.hpp"

namespace frag {

enum class BondOrder : uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

// Bond order in half-units: single=2, double=4, triple=6, aromatic=3.
inline int bond_half_units(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 2;
    case BondOrder::Double: return 4;
    case BondOrder::Triple: return 6;
    case BondOrder::Aromatic: return 3;
  }
  return 0;
}

struct Atom {
  std::string element;   // "C", "Cl", ... ; "*" marks an open attachment in fragment graphs
  int charge = 0;
  bool aromatic = false;
  int hydrogens = 0;     // total attached hydrogens (implicit ones are folded in at parse time)
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
};

// Allowed total valences (bond orders + hydrogens) for the supported organic
// subset. Charges outside {-1, 0, +1} are rejected.
inline const std::vector<int>* allowed_valences(const std::string& element, int charge) {
  static const std::vector<int> kNone;
  auto table = [](const std::string& e, int q) -> const std::vector<int>* {
    static const std::vector<int> b{3}, bneg{4}, c{4}, cpm{3}, n{3, 5}, npos{4}, nneg{2},
        o{2}, opos{3}, oneg{1}, hal{1}, halneg{0}, p{3, 5}, ppos{4, 6}, pneg{2, 4},
        s{2, 4, 6}, spos{3, 5}, sneg{1, 3, 5}, dummy{1};
    if (e == "*") return q == 0 ? &dummy : nullptr;
    if (e == "B") return q == 0 ? &b : (q == -1 ? &bneg : nullptr);
    if (e == "C") return q == 0 ? &c : &cpm;
    if (e == "N") return q == 0 ? &n : (q == 1 ? &npos : &nneg);
    if (e == "O") return q == 0 ? &o : (q == 1 ? &opos : &oneg);
    if (e == "P") return q == 0 ? &p : (q == 1 ? &ppos : &pneg);
    if (e == "S") return q == 0 ? &s : (q == 1 ? &spos : &sneg);
    if (e == "F" || e == "Cl" || e == "Br" || e == "I")
      return q == 0 ? &hal : (q == -1 ? &halneg : nullptr);
    return nullptr;
  };
  if (charge < -1 || charge > 1) return nullptr;
  const std::vector<int>* v = table(element, charge);
  return v ? v : &kNone;
}

inline bool element_supported(const std::string& element) {
  static const std::array<const char*, 11> kElems = {"B", "C",  "N",  "O", "F", "P",
                                                     "S", "Cl", "Br", "I", "*"};
  return std::any_of(kElems.begin(), kElems.end(),
                     [&](const char* e) { return element == e; });
}

inline bool element_aromatic_capable(const std::string& element) {
  return element == "B" || element == "C" || element == "N" || element == "O" ||
         element == "P" || element == "S";
}

struct MolGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;

  int atom_count() const { return static_cast<int>(atoms.size()); }
  int bond_count() const { return static_cast<int>(bonds.size()); }

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(atoms.size());
    for (int i = 0; i < bond_count(); ++i) {
      adj[bonds[i].a].push_back(i);
      adj[bonds[i].b].push_back(i);
    }
    return adj;
  }

  int other_end(int bond_idx, int atom_idx) const {
    const Bond& b = bonds[bond_idx];
    return b.a == atom_idx ? b.b : b.a;
  }

  std::optional<int> find_bond(int a, int b) const {
    for (int i = 0; i < bond_count(); ++i) {
      if ((bonds[i].a == a && bonds[i].b == b) || (bonds[i].a == b && bonds[i].b == a))
        return i;
    }
    return std::nullopt;
  }

  // Half-unit bond order sum per atom (aromatic = 3 halves).
  int half_unit_sum(int atom_idx) const {
    int s = 0;
    for (const Bond& b : bonds)
      if (b.a == atom_idx || b.b == atom_idx) s += bond_half_units(b.order);
    return s;
  }

  int degree(int atom_idx) const {
    int d = 0;
    for (const Bond& b : bonds)
      if (b.a == atom_idx || b.b == atom_idx) ++d;
    return d;
  }

  // Lower/upper integral bond-order sums; aromatic bonds may resolve to 1 or
  // ceil(1.5*k) in total, which is how lowercase input is validated without a
  // kekulization pass.
  int bond_sum_floor(int atom_idx) const {
    int s = 0;
    for (const Bond& b : bonds) {
      if (b.a != atom_idx && b.b != atom_idx) continue;
      s += b.order == BondOrder::Aromatic ? 1 : bond_half_units(b.order) / 2;
    }
    return s;
  }

  int bond_sum_ceil(int atom_idx) const { return (half_unit_sum(atom_idx) + 1) / 2; }

  bool connected() const {
    if (atoms.empty()) return false;
    std::vector<std::vector<int>> adj = adjacency();
    std::vector<char> seen(atoms.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int reached = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int bi : adj[v]) {
        int w = other_end(bi, v);
        if (!seen[w]) {
          seen[w] = 1;
          ++reached;
          stack.push_back(w);
        }
      }
    }
    return reached == atom_count();
  }

  // Bridge-finding (iterative DFS); a bond lies in a cycle iff it is not a bridge.
  std::vector<bool> ring_bond_flags() const {
    int n = atom_count();
    std::vector<bool> is_ring(bonds.size(), false);
    if (n == 0) return is_ring;
    std::vector<std::vector<int>> adj = adjacency();
    std::vector<int> disc(n, -1), low(n, 0);
    int timer = 0;
    struct Frame {
      int v;
      int parent_bond;
      size_t edge_idx;
    };
    for (int root = 0; root < n; ++root) {
      if (disc[root] != -1) continue;
      std::vector<Frame> stack{{root, -1, 0}};
      disc[root] = low[root] = timer++;
      while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.edge_idx < adj[f.v].size()) {
          int bi = adj[f.v][f.edge_idx++];
          if (bi == f.parent_bond) continue;
          int w = other_end(bi, f.v);
          if (disc[w] == -1) {
            disc[w] = low[w] = timer++;
            stack.push_back({w, bi, 0});
          } else {
            low[f.v] = std::min(low[f.v], disc[w]);
            is_ring[bi] = true;  // back edge is always in a cycle
          }
        } else {
          int v = f.v;
          int pb = f.parent_bond;
          stack.pop_back();
          if (!stack.empty()) {
            int u = stack.back().v;
            low[u] = std::min(low[u], low[v]);
            if (low[v] <= disc[u]) is_ring[pb] = true;
          }
        }
      }
    }
    return is_ring;
  }

  std::vector<bool> ring_atom_flags() const {
    std::vector<bool> rb = ring_bond_flags();
    std::vector<bool> ra(atoms.size(), false);
    for (size_t i = 0; i < bonds.size(); ++i) {
      if (rb[i]) {
        ra[bonds[i].a] = true;
        ra[bonds[i].b] = true;
      }
    }
    return ra;
  }
};

inline bool atom_valence_ok(const MolGraph& g, int atom_idx) {
  const Atom& a = g.atoms[atom_idx];
  const std::vector<int>* allowed = allowed_valences(a.element, a.charge);
  if (!allowed || allowed->empty()) return false;
  if (a.hydrogens < 0) return false;
  int lo = g.bond_sum_floor(atom_idx);
  int hi = g.bond_sum_ceil(atom_idx);
  for (int b = lo; b <= hi; ++b)
    if (std::find(allowed->begin(), allowed->end(), b + a.hydrogens) != allowed->end())
      return true;
  return false;
}

struct ValidationOptions {
  bool allow_dummies = false;
  bool require_connected = true;
};

inline void validate_graph(const MolGraph& g, ValidationOptions opts = {}) {
  if (g.atoms.empty()) throw ParseError("empty molecule");
  std::vector<char> seen_pair;
  for (const Bond& b : g.bonds) {
    if (b.a < 0 || b.b < 0 || b.a >= g.atom_count() || b.b >= g.atom_count() || b.a == b.b)
      throw ParseError("bond references invalid atom indices");
  }
  for (size_t i = 0; i < g.bonds.size(); ++i)
    for (size_t j = i + 1; j < g.bonds.size(); ++j) {
      const Bond &x = g.bonds[i], &y = g.bonds[j];
      if ((x.a == y.a && x.b == y.b) || (x.a == y.b && x.b == y.a))
        throw ParseError("duplicate bond");
    }
  for (int i = 0; i < g.atom_count(); ++i) {
    const Atom& a = g.atoms[i];
    if (!element_supported(a.element)) throw ParseError("unsupported element " + a.element);
    if (a.element == "*") {
      if (!opts.allow_dummies) throw ParseError("dummy atom outside fragment context");
      if (g.degree(i) != 1 || g.half_unit_sum(i) != 2)
        throw ParseError("dummy atom must carry exactly one single bond");
      continue;
    }
    if (a.charge < -1 || a.charge > 1) throw ValenceError("unsupported charge on " + a.element);
    if (!atom_valence_ok(g, i))
      throw ValenceError(a.element + " valence " + std::to_string(g.bond_sum_ceil(i)) + "+" +
                         std::to_string(a.hydrogens) + "H out of range");
  }
  if (opts.require_connected && !g.connected()) throw ParseError("disconnected molecule");
}

inline bool graph_valid(const MolGraph& g, ValidationOptions opts = {}) {
  try {
    validate_graph(g, opts);
    return true;
  } catch (const Error&) {
    return false;
  }
}

// Derive the hydrogen count of a bare (non-bracket) atom from its bonds.
// Aromatic C/B donate one bond order unit to the ring pi system; aromatic
// N/O/S/P contribute a lone pair and take no implicit hydrogens.
inline int implicit_hydrogens(const MolGraph& g, int atom_idx) {
  const Atom& a = g.atoms[atom_idx];
  const std::vector<int>* allowed = allowed_valences(a.element, a.charge);
  if (!allowed || allowed->empty())
    throw ValenceError("no valence model for " + a.element);
  if (a.aromatic) {
    if (a.element == "C" || a.element == "B") {
      int target = (a.element == "C" ? 4 : 3) - 1;
      return std::max(0, target - g.bond_sum_floor(atom_idx));
    }
    return 0;
  }
  int sum = g.bond_sum_ceil(atom_idx);
  for (int v : *allowed)
    if (v >= sum) return v - sum;
  throw ValenceError(a.element + " bond order sum " + std::to_string(sum) +
                     " exceeds every allowed valence");
}

// Relabel atoms: perm[i] is the new index of old atom i.
inline MolGraph permute_atoms(const MolGraph& g, const std::vector<int>& perm) {
  MolGraph out;
  out.atoms.resize(g.atoms.size());
  for (int i = 0; i < g.atom_count(); ++i) out.atoms[perm[i]] = g.atoms[i];
  out.bonds.reserve(g.bonds.size());
  for (const Bond& b : g.bonds) out.bonds.push_back({perm[b.a], perm[b.b], b.order});
  return out;
}

}  // namespace frag
