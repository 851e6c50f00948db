#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "frag/canonical.hpp"
#include "frag/errors.hpp"
#include "frag/mol_graph.hpp"

namespace frag {

// ---------------------------------------------------------------------------
// Population: top-N molecules by property, unique by canonical key.
// ---------------------------------------------------------------------------

struct PopulationEntry {
  MolGraph mol;
  double y = 0.0;
  std::string key;
};

class Population {
 public:
  Population() = default;
  explicit Population(int capacity) : capacity_(capacity) {}

  // Returns true if the molecule entered (or re-scored nothing: duplicates
  // are ignored). Keeps entries sorted by descending y, key ascending.
  bool insert(MolGraph mol, double y, std::string key) {
    for (const PopulationEntry& e : entries_)
      if (e.key == key) return false;
    entries_.push_back({std::move(mol), y, std::move(key)});
    std::sort(entries_.begin(), entries_.end(), [](const PopulationEntry& a, const PopulationEntry& b) {
      if (a.y != b.y) return a.y > b.y;
      return a.key < b.key;
    });
    if (capacity_ > 0 && static_cast<int>(entries_.size()) > capacity_) entries_.resize(capacity_);
    return true;
  }

  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }
  int capacity() const { return capacity_; }
  const std::vector<PopulationEntry>& entries() const { return entries_; }

  double min_y() const {
    if (entries_.empty()) throw EmptyPopulation("population is empty");
    return entries_.back().y;
  }

 private:
  int capacity_ = 0;  // 0 = unbounded
  std::vector<PopulationEntry> entries_;
};

inline std::pair<const MolGraph*, const MolGraph*> select_parents(const Population& pop,
                                                                  std::mt19937_64& rng) {
  if (pop.empty()) throw EmptyPopulation("cannot select parents");
  std::uniform_int_distribution<int> pick(0, pop.size() - 1);
  const MolGraph* a = &pop.entries()[pick(rng)].mol;
  const MolGraph* b = &pop.entries()[pick(rng)].mol;
  return {a, b};
}

// ---------------------------------------------------------------------------
// Edit helpers. After changing an atom's bond orders the hydrogen count is
// re-derived (aliphatic neutral) or shifted by the freed/consumed units
// (aromatic or charged). Returns false when no consistent count exists.
// ---------------------------------------------------------------------------

namespace detail_ga {

inline bool fix_hydrogens(MolGraph& g, int atom, int delta_units) {
  Atom& a = g.atoms[atom];
  if (a.aromatic || a.charge != 0) {
    int h = a.hydrogens - delta_units;
    if (h < 0) return false;
    a.hydrogens = h;
    return atom_valence_ok(g, atom);
  }
  try {
    a.hydrogens = implicit_hydrogens(g, atom);
  } catch (const Error&) {
    return false;
  }
  return true;
}

inline bool finish(MolGraph& g) { return graph_valid(g); }

template <typename T>
inline const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<size_t>(0, v.size() - 1)(rng)];
}

inline std::vector<int> graph_distances(const MolGraph& g, int from) {
  std::vector<std::vector<int>> adj = g.adjacency();
  std::vector<int> dist(g.atom_count(), -1);
  std::vector<int> q{from};
  dist[from] = 0;
  for (size_t h = 0; h < q.size(); ++h) {
    int v = q[h];
    for (int bi : adj[v]) {
      int w = g.other_end(bi, v);
      if (dist[w] == -1) {
        dist[w] = dist[v] + 1;
        q.push_back(w);
      }
    }
  }
  return dist;
}

// Split at one bond; returns per-atom side flag (0 = side of bonds[cut].a).
inline std::vector<int> bond_split_sides(const MolGraph& g, int cut) {
  std::vector<std::vector<int>> adj = g.adjacency();
  std::vector<int> side(g.atom_count(), 1);
  std::vector<int> stack{g.bonds[cut].a};
  side[g.bonds[cut].a] = 0;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int bi : adj[v]) {
      if (bi == cut) continue;
      int w = g.other_end(bi, v);
      if (side[w] != 0) {
        side[w] = 0;
        stack.push_back(w);
      }
    }
  }
  return side;
}

struct Piece {
  MolGraph graph;
  std::vector<int> open;  // freed atoms (local indices), one per cut bond
};

inline Piece extract_side(const MolGraph& g, const std::vector<int>& member, int flag,
                          const std::vector<int>& open_atoms) {
  Piece p;
  std::vector<int> remap(g.atom_count(), -1);
  for (int i = 0; i < g.atom_count(); ++i) {
    if (member[i] != flag) continue;
    remap[i] = p.graph.atom_count();
    p.graph.atoms.push_back(g.atoms[i]);
  }
  for (const Bond& b : g.bonds)
    if (member[b.a] == flag && member[b.b] == flag)
      p.graph.bonds.push_back({remap[b.a], remap[b.b], b.order});
  for (int a : open_atoms)
    if (member[a] == flag) p.open.push_back(remap[a]);
  return p;
}

// One-cut piece of a parent: severs a random acyclic single bond and keeps a
// random side.
inline std::optional<Piece> random_chain_piece(const MolGraph& g, std::mt19937_64& rng) {
  std::vector<bool> ring = g.ring_bond_flags();
  std::vector<int> cuts;
  for (int i = 0; i < g.bond_count(); ++i)
    if (g.bonds[i].order == BondOrder::Single && !ring[i]) cuts.push_back(i);
  if (cuts.empty()) return std::nullopt;
  int cut = pick(cuts, rng);
  std::vector<int> side = bond_split_sides(g, cut);
  int keep = std::uniform_int_distribution<int>(0, 1)(rng);
  int open_atom = keep == 0 ? g.bonds[cut].a : g.bonds[cut].b;
  if (side[open_atom] != keep) open_atom = keep == 0 ? g.bonds[cut].b : g.bonds[cut].a;
  Piece p = extract_side(g, side, keep, {g.bonds[cut].a, g.bonds[cut].b});
  if (p.open.size() != 1 || p.graph.atoms.empty()) return std::nullopt;
  return p;
}

// Two-cut piece through a 5- or 6-ring: removes two single non-aromatic bonds
// of one such ring; keeps a random half (each half exposes two open ends).
inline std::optional<Piece> random_ring_piece(const MolGraph& g, std::mt19937_64& rng) {
  std::vector<bool> ring = g.ring_bond_flags();
  // Bonds on some 5/6-cycle: shortest alternative path between endpoints has
  // length 4 or 5.
  std::vector<std::pair<int, std::vector<int>>> ring_cycles;  // bond -> cycle bond list
  for (int bi = 0; bi < g.bond_count(); ++bi) {
    if (!ring[bi] || g.bonds[bi].order != BondOrder::Single) continue;
    if (g.atoms[g.bonds[bi].a].aromatic && g.atoms[g.bonds[bi].b].aromatic) continue;
    // BFS avoiding this bond
    std::vector<std::vector<int>> adj = g.adjacency();
    std::vector<int> prev_bond(g.atom_count(), -1), prev(g.atom_count(), -1);
    std::vector<int> dist(g.atom_count(), -1);
    std::vector<int> q{g.bonds[bi].a};
    dist[g.bonds[bi].a] = 0;
    for (size_t h = 0; h < q.size(); ++h) {
      int v = q[h];
      for (int e : adj[v]) {
        if (e == bi) continue;
        int w = g.other_end(e, v);
        if (dist[w] == -1) {
          dist[w] = dist[v] + 1;
          prev[w] = v;
          prev_bond[w] = e;
          q.push_back(w);
        }
      }
    }
    int b_end = g.bonds[bi].b;
    if (dist[b_end] < 4 || dist[b_end] > 5) continue;  // cycle size 5..6
    std::vector<int> cycle{bi};
    for (int v = b_end; prev[v] != -1; v = prev[v]) cycle.push_back(prev_bond[v]);
    ring_cycles.emplace_back(bi, std::move(cycle));
  }
  if (ring_cycles.empty()) return std::nullopt;
  const auto& [seed_bond, cycle] = pick(ring_cycles, rng);
  // Pick a second single non-aromatic bond from the same cycle.
  std::vector<int> partners;
  for (int e : cycle) {
    if (e == seed_bond || g.bonds[e].order != BondOrder::Single) continue;
    if (g.atoms[g.bonds[e].a].aromatic && g.atoms[g.bonds[e].b].aromatic) continue;
    partners.push_back(e);
  }
  if (partners.empty()) return std::nullopt;
  int second = pick(partners, rng);

  // Components after removing both bonds; need exactly two.
  std::vector<std::vector<int>> adj = g.adjacency();
  std::vector<int> comp(g.atom_count(), -1);
  int nc = 0;
  for (int s = 0; s < g.atom_count(); ++s) {
    if (comp[s] != -1) continue;
    comp[s] = nc;
    std::vector<int> stack{s};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int e : adj[v]) {
        if (e == seed_bond || e == second) continue;
        int w = g.other_end(e, v);
        if (comp[w] == -1) {
          comp[w] = nc;
          stack.push_back(w);
        }
      }
    }
    ++nc;
  }
  if (nc != 2) return std::nullopt;
  int keep = std::uniform_int_distribution<int>(0, 1)(rng);
  Piece p = extract_side(g, comp, keep,
                         {g.bonds[seed_bond].a, g.bonds[seed_bond].b, g.bonds[second].a,
                          g.bonds[second].b});
  if (p.open.size() != 2 || p.graph.atoms.empty()) return std::nullopt;
  return p;
}

inline MolGraph join_pieces(const Piece& a, const Piece& b, bool crossed) {
  MolGraph g = a.graph;
  int off = g.atom_count();
  for (const Atom& at : b.graph.atoms) g.atoms.push_back(at);
  for (const Bond& bd : b.graph.bonds) g.bonds.push_back({bd.a + off, bd.b + off, bd.order});
  if (a.open.size() == 1) {
    g.bonds.push_back({a.open[0], b.open[0] + off, BondOrder::Single});
  } else {
    int b0 = crossed ? 1 : 0;
    g.bonds.push_back({a.open[0], b.open[b0] + off, BondOrder::Single});
    g.bonds.push_back({a.open[1], b.open[1 - b0] + off, BondOrder::Single});
  }
  return g;
}

}  // namespace detail_ga

// ---------------------------------------------------------------------------
// Crossover: ring or non-ring cut mode with equal probability; one piece from
// each parent, joined at the cut sites. Empty when no compatible cut exists.
// ---------------------------------------------------------------------------

inline std::optional<MolGraph> crossover(const MolGraph& p1, const MolGraph& p2,
                                         std::mt19937_64& rng) {
  using namespace detail_ga;
  bool ring_mode = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  std::optional<Piece> a, b;
  if (ring_mode) {
    a = random_ring_piece(p1, rng);
    b = random_ring_piece(p2, rng);
  } else {
    a = random_chain_piece(p1, rng);
    b = random_chain_piece(p2, rng);
  }
  if (!a || !b) return std::nullopt;
  bool crossed = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  MolGraph child = join_pieces(*a, *b, crossed);
  if (!detail_ga::finish(child)) return std::nullopt;
  return child;
}

// ---------------------------------------------------------------------------
// Mutation: one operator sampled from the table, applied at a random legal
// site. Empty when the sampled operator has no legal site.
// ---------------------------------------------------------------------------

struct MutationTable {
  double atom_insertion = 1.0;
  double atom_deletion = 1.0;
  double bond_insertion = 1.0;
  double bond_deletion = 1.0;
  double bond_order_swap = 1.0;
  double atom_change = 1.0;
};

namespace detail_ga {

inline std::optional<MolGraph> op_atom_insertion(const MolGraph& m, std::mt19937_64& rng) {
  std::vector<int> sites;
  for (int i = 0; i < m.bond_count(); ++i)
    if (m.bonds[i].order == BondOrder::Single) sites.push_back(i);
  if (sites.empty()) return std::nullopt;
  int bi = pick(sites, rng);
  static const std::vector<std::string> kIns = {"C", "C", "N", "O", "S"};
  MolGraph g = m;
  Atom x;
  x.element = pick(kIns, rng);
  g.atoms.push_back(x);
  int xi = g.atom_count() - 1;
  int u = g.bonds[bi].a, v = g.bonds[bi].b;
  g.bonds[bi] = {u, xi, BondOrder::Single};
  g.bonds.push_back({xi, v, BondOrder::Single});
  if (!fix_hydrogens(g, xi, 0)) return std::nullopt;
  if (!finish(g)) return std::nullopt;
  return g;
}

inline std::optional<MolGraph> op_atom_deletion(const MolGraph& m, std::mt19937_64& rng) {
  if (m.atom_count() < 2) return std::nullopt;
  std::vector<bool> ring = m.ring_bond_flags();
  struct Candidate {
    int atom;
    int mode;  // 1 = leaf, 2 = splice
  };
  std::vector<Candidate> cands;
  for (int i = 0; i < m.atom_count(); ++i) {
    if (m.atoms[i].aromatic) continue;
    int deg = m.degree(i);
    if (deg == 1) {
      cands.push_back({i, 1});
    } else if (deg == 2) {
      std::vector<int> nb, orders;
      for (int bi = 0; bi < m.bond_count(); ++bi)
        if (m.bonds[bi].a == i || m.bonds[bi].b == i) {
          nb.push_back(m.other_end(bi, i));
          orders.push_back(static_cast<int>(m.bonds[bi].order));
        }
      if (orders[0] == static_cast<int>(BondOrder::Single) &&
          orders[1] == static_cast<int>(BondOrder::Single) && nb[0] != nb[1] &&
          !m.find_bond(nb[0], nb[1]))
        cands.push_back({i, 2});
    }
  }
  if (cands.empty()) return std::nullopt;
  Candidate c = pick(cands, rng);
  MolGraph g;
  std::vector<int> remap(m.atom_count(), -1);
  for (int i = 0; i < m.atom_count(); ++i) {
    if (i == c.atom) continue;
    remap[i] = g.atom_count();
    g.atoms.push_back(m.atoms[i]);
  }
  std::vector<int> touched;
  for (const Bond& b : m.bonds) {
    if (b.a == c.atom || b.b == c.atom) {
      touched.push_back(remap[b.a == c.atom ? b.b : b.a]);
      continue;
    }
    g.bonds.push_back({remap[b.a], remap[b.b], b.order});
  }
  if (c.mode == 2) {
    g.bonds.push_back({touched[0], touched[1], BondOrder::Single});
  } else {
    for (int t : touched)
      if (!fix_hydrogens(g, t, -1)) return std::nullopt;
  }
  if (!g.connected()) return std::nullopt;
  if (!finish(g)) return std::nullopt;
  return g;
}

inline std::optional<MolGraph> op_bond_insertion(const MolGraph& m, std::mt19937_64& rng) {
  auto can_take = [&](int atom) {
    const Atom& a = m.atoms[atom];
    if (a.aromatic || a.charge != 0) return a.hydrogens >= 1;
    const std::vector<int>* allowed = allowed_valences(a.element, a.charge);
    return !allowed->empty() && m.bond_sum_ceil(atom) + 1 <= allowed->back();
  };
  std::vector<std::pair<int, int>> cands;
  for (int a = 0; a < m.atom_count(); ++a) {
    if (!can_take(a)) continue;
    std::vector<int> dist = graph_distances(m, a);
    for (int b = a + 1; b < m.atom_count(); ++b)
      if (can_take(b) && dist[b] >= 2 && dist[b] <= 6 && !m.find_bond(a, b))
        cands.emplace_back(a, b);
  }
  if (cands.empty()) return std::nullopt;
  auto [a, b] = pick(cands, rng);
  MolGraph g = m;
  g.bonds.push_back({a, b, BondOrder::Single});
  if (!fix_hydrogens(g, a, 1) || !fix_hydrogens(g, b, 1)) return std::nullopt;
  if (!finish(g)) return std::nullopt;
  return g;
}

inline std::optional<MolGraph> op_bond_deletion(const MolGraph& m, std::mt19937_64& rng) {
  std::vector<bool> ring = m.ring_bond_flags();
  std::vector<int> cands;
  for (int i = 0; i < m.bond_count(); ++i)
    if (ring[i] && m.bonds[i].order == BondOrder::Single &&
        !(m.atoms[m.bonds[i].a].aromatic && m.atoms[m.bonds[i].b].aromatic))
      cands.push_back(i);
  if (cands.empty()) return std::nullopt;
  int bi = pick(cands, rng);
  MolGraph g = m;
  int u = g.bonds[bi].a, v = g.bonds[bi].b;
  g.bonds.erase(g.bonds.begin() + bi);
  if (!fix_hydrogens(g, u, -1) || !fix_hydrogens(g, v, -1)) return std::nullopt;
  if (!g.connected()) return std::nullopt;  // ring bonds keep connectivity, but gate anyway
  if (!finish(g)) return std::nullopt;
  return g;
}

inline std::optional<MolGraph> op_bond_order_swap(const MolGraph& m, std::mt19937_64& rng) {
  struct Cand {
    int bond;
    BondOrder order;
  };
  std::vector<Cand> cands;
  for (int i = 0; i < m.bond_count(); ++i) {
    const Bond& b = m.bonds[i];
    if (b.order == BondOrder::Aromatic) continue;
    if (m.atoms[b.a].aromatic || m.atoms[b.b].aromatic) continue;
    for (BondOrder o : {BondOrder::Single, BondOrder::Double, BondOrder::Triple}) {
      if (o == b.order) continue;
      MolGraph g = m;
      g.bonds[i].order = o;
      int delta = (bond_half_units(o) - bond_half_units(b.order)) / 2;
      if (fix_hydrogens(g, b.a, delta) && fix_hydrogens(g, b.b, delta) && graph_valid(g))
        cands.push_back({i, o});
    }
  }
  if (cands.empty()) return std::nullopt;
  Cand c = pick(cands, rng);
  MolGraph g = m;
  int delta = (bond_half_units(c.order) - bond_half_units(g.bonds[c.bond].order)) / 2;
  int u = g.bonds[c.bond].a, v = g.bonds[c.bond].b;
  g.bonds[c.bond].order = c.order;
  if (!fix_hydrogens(g, u, delta) || !fix_hydrogens(g, v, delta)) return std::nullopt;
  if (!finish(g)) return std::nullopt;
  return g;
}

inline std::optional<MolGraph> op_atom_change(const MolGraph& m, std::mt19937_64& rng) {
  static const std::vector<std::string> kAlphabet = {"C", "N", "O", "S", "F", "Cl", "Br"};
  struct Cand {
    int atom;
    std::string elem;
  };
  std::vector<Cand> cands;
  for (int i = 0; i < m.atom_count(); ++i) {
    const Atom& a = m.atoms[i];
    if (a.aromatic || a.charge != 0) continue;
    for (const std::string& e : kAlphabet) {
      if (e == a.element) continue;
      MolGraph g = m;
      g.atoms[i].element = e;
      if (fix_hydrogens(g, i, 0) && graph_valid(g)) cands.push_back({i, e});
    }
  }
  if (cands.empty()) return std::nullopt;
  Cand c = pick(cands, rng);
  MolGraph g = m;
  g.atoms[c.atom].element = c.elem;
  if (!fix_hydrogens(g, c.atom, 0)) return std::nullopt;
  if (!finish(g)) return std::nullopt;
  return g;
}

}  // namespace detail_ga

inline std::optional<MolGraph> mutate(const MolGraph& m, std::mt19937_64& rng,
                                      const MutationTable& table = {}) {
  const double weights[6] = {table.atom_insertion, table.atom_deletion, table.bond_insertion,
                             table.bond_deletion,  table.bond_order_swap, table.atom_change};
  double total = 0;
  for (double w : weights) total += w;
  if (total <= 0) return std::nullopt;
  double r = std::uniform_real_distribution<double>(0.0, total)(rng);
  int op = 0;
  for (; op < 5; ++op) {
    if (r < weights[op]) break;
    r -= weights[op];
  }
  switch (op) {
    case 0: return detail_ga::op_atom_insertion(m, rng);
    case 1: return detail_ga::op_atom_deletion(m, rng);
    case 2: return detail_ga::op_bond_insertion(m, rng);
    case 3: return detail_ga::op_bond_deletion(m, rng);
    case 4: return detail_ga::op_bond_order_swap(m, rng);
    default: return detail_ga::op_atom_change(m, rng);
  }
}

struct GaConfig {
  double mutation_rate = 0.1;  // Appendix-default
  int crossover_retries = 20;
  MutationTable mutation_table;
};

// One GA offspring attempt: parent selection + crossover (with retries) +
// probabilistic mutation. No oracle involved.
inline std::optional<MolGraph> make_offspring(const Population& pop, std::mt19937_64& rng,
                                              const GaConfig& cfg = {}) {
  std::optional<MolGraph> child;
  for (int attempt = 0; attempt < cfg.crossover_retries && !child; ++attempt) {
    auto [p1, p2] = select_parents(pop, rng);
    child = crossover(*p1, *p2, rng);
  }
  if (!child) return std::nullopt;
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.mutation_rate) {
    std::optional<MolGraph> mutated = mutate(*child, rng, cfg.mutation_table);
    if (mutated) child = mutated;
  }
  return child;
}

}  // namespace frag
