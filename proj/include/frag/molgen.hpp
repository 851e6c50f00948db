#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "frag/mol_graph.hpp"

namespace frag {

// Seeded synthetic molecule source. Grows a random aliphatic skeleton, then
// decorates it with hetero atoms, multiple bonds, aliphatic rings, aromatic
// ring templates, and occasional charged groups. Every output is connected
// and valence-valid by construction.
struct MolGenOptions {
  int min_atoms = 8;
  int max_atoms = 28;
  double aromatic_ring_prob = 0.35;   // chance to attach one aromatic template
  double aliphatic_ring_prob = 0.25;  // chance to close one extra ring
  double double_bond_prob = 0.4;      // chance of one carbonyl-style decoration
  double charged_group_prob = 0.06;   // chance of one nitro / carboxylate
};

namespace detail {

inline int max_allowed_valence(const Atom& a) {
  const std::vector<int>* v = allowed_valences(a.element, a.charge);
  return (v && !v->empty()) ? v->back() : 0;
}

struct GrowState {
  MolGraph g;
  std::vector<int> fixed_h;  // -1: derive at the end; >=0: pinned
};

inline int capacity(const GrowState& s, int idx) {
  const Atom& a = s.g.atoms[idx];
  int pinned = s.fixed_h[idx] > 0 ? s.fixed_h[idx] : 0;
  return std::max(0, max_allowed_valence(a) - s.g.bond_sum_ceil(idx) - pinned);
}

inline int add_atom(GrowState& s, const std::string& element, bool aromatic = false,
                    int charge = 0, int pinned_h = -1) {
  Atom a;
  a.element = element;
  a.aromatic = aromatic;
  a.charge = charge;
  s.g.atoms.push_back(a);
  s.fixed_h.push_back(pinned_h);
  return s.g.atom_count() - 1;
}

inline std::vector<int> atoms_with_capacity(const GrowState& s, int need) {
  std::vector<int> out;
  for (int i = 0; i < s.g.atom_count(); ++i)
    if (capacity(s, i) >= need) out.push_back(i);
  return out;
}

template <typename T>
inline const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<size_t>(0, v.size() - 1)(rng)];
}

// Aromatic five/six-ring templates; returns the substitutable ring atom.
inline int attach_aromatic_ring(GrowState& s, int anchor, std::mt19937_64& rng) {
  int which = std::uniform_int_distribution<int>(0, 4)(rng);
  std::vector<int> ring;
  auto arom = [&](const std::string& e, int pinned = -1) {
    ring.push_back(add_atom(s, e, true, 0, pinned));
  };
  switch (which) {
    case 0: for (int k = 0; k < 6; ++k) arom("C"); break;                  // benzene
    case 1: arom("N"); for (int k = 0; k < 5; ++k) arom("C"); break;       // pyridine
    case 2: arom("O"); for (int k = 0; k < 4; ++k) arom("C"); break;       // furan
    case 3: arom("S"); for (int k = 0; k < 4; ++k) arom("C"); break;       // thiophene
    case 4: arom("N", 1); for (int k = 0; k < 4; ++k) arom("C"); break;    // pyrrole
  }
  for (size_t k = 0; k < ring.size(); ++k)
    s.g.bonds.push_back({ring[k], ring[(k + 1) % ring.size()], BondOrder::Aromatic});
  // Bond the anchor to a ring carbon.
  std::vector<int> carbons;
  for (int idx : ring)
    if (s.g.atoms[idx].element == "C") carbons.push_back(idx);
  int site = pick(carbons, rng);
  s.g.bonds.push_back({anchor, site, BondOrder::Single});
  return site;
}

inline void attach_charged_group(GrowState& s, int anchor, std::mt19937_64& rng) {
  if (std::uniform_int_distribution<int>(0, 1)(rng) == 0) {
    // nitro: anchor-[N+](=O)[O-]
    int n = add_atom(s, "N", false, 1);
    int o1 = add_atom(s, "O");
    int o2 = add_atom(s, "O", false, -1);
    s.g.bonds.push_back({anchor, n, BondOrder::Single});
    s.g.bonds.push_back({n, o1, BondOrder::Double});
    s.g.bonds.push_back({n, o2, BondOrder::Single});
  } else {
    // carboxylate: anchor-C(=O)[O-]
    int c = add_atom(s, "C");
    int o1 = add_atom(s, "O");
    int o2 = add_atom(s, "O", false, -1);
    s.g.bonds.push_back({anchor, c, BondOrder::Single});
    s.g.bonds.push_back({c, o1, BondOrder::Double});
    s.g.bonds.push_back({c, o2, BondOrder::Single});
  }
}

}  // namespace detail

inline MolGraph random_molecule(std::mt19937_64& rng, const MolGenOptions& opts = {}) {
  using namespace detail;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int attempt = 0; attempt < 64; ++attempt) {
    GrowState s;
    int target =
        std::uniform_int_distribution<int>(opts.min_atoms, opts.max_atoms)(rng);

    int chain_len = std::uniform_int_distribution<int>(3, std::max(3, target / 3))(rng);
    int prev = -1;
    for (int k = 0; k < chain_len; ++k) {
      int idx = add_atom(s, "C");
      if (prev >= 0) s.g.bonds.push_back({prev, idx, BondOrder::Single});
      prev = idx;
    }

    bool did_aromatic = false, did_ring = false, did_double = false, did_charge = false;
    int guard = 0;
    while (s.g.atom_count() < target && ++guard < 200) {
      double r = coin(rng);
      if (!did_aromatic && r < opts.aromatic_ring_prob && s.g.atom_count() + 6 <= target + 2) {
        std::vector<int> sites = atoms_with_capacity(s, 1);
        if (!sites.empty()) {
          attach_aromatic_ring(s, pick(sites, rng), rng);
          did_aromatic = true;
          continue;
        }
      }
      if (!did_charge && r < opts.charged_group_prob && s.g.atom_count() + 3 <= target + 2) {
        std::vector<int> sites;
        for (int i : atoms_with_capacity(s, 1))
          if (!s.g.atoms[i].aromatic && s.g.atoms[i].element == "C") sites.push_back(i);
        if (!sites.empty()) {
          attach_charged_group(s, pick(sites, rng), rng);
          did_charge = true;
          continue;
        }
      }
      if (!did_double && r < opts.double_bond_prob) {
        std::vector<int> sites;
        for (int i : atoms_with_capacity(s, 2))
          if (!s.g.atoms[i].aromatic && s.g.atoms[i].element == "C") sites.push_back(i);
        if (!sites.empty()) {
          int anchor = pick(sites, rng);
          int o = add_atom(s, coin(rng) < 0.7 ? "O" : "C");
          s.g.bonds.push_back({anchor, o, BondOrder::Double});
          did_double = true;
          continue;
        }
      }
      // default: grow one single-bonded atom
      std::vector<int> sites = atoms_with_capacity(s, 1);
      if (sites.empty()) break;
      static const std::vector<std::string> kElems = {"C", "C", "C", "C", "C", "C", "N",
                                                      "N", "O", "O", "S", "F", "Cl", "Br"};
      int idx = add_atom(s, pick(kElems, rng));
      s.g.bonds.push_back({pick(sites, rng), idx, BondOrder::Single});
    }

    if (!did_ring && coin(rng) < opts.aliphatic_ring_prob) {
      // Close one ring between two non-aromatic atoms at distance 2..5.
      std::vector<std::vector<int>> adj = s.g.adjacency();
      std::vector<std::pair<int, int>> candidates;
      for (int a = 0; a < s.g.atom_count(); ++a) {
        if (s.g.atoms[a].aromatic || capacity(s, a) < 1) continue;
        // BFS with depth cap
        std::vector<int> dist(s.g.atom_count(), -1);
        std::vector<int> q{a};
        dist[a] = 0;
        for (size_t h = 0; h < q.size(); ++h) {
          int v = q[h];
          if (dist[v] >= 5) continue;
          for (int bi : adj[v]) {
            int w = s.g.other_end(bi, v);
            if (dist[w] == -1) {
              dist[w] = dist[v] + 1;
              q.push_back(w);
            }
          }
        }
        for (int b = a + 1; b < s.g.atom_count(); ++b)
          if (!s.g.atoms[b].aromatic && capacity(s, b) >= 1 && dist[b] >= 2 && dist[b] <= 5 &&
              !s.g.find_bond(a, b))
            candidates.emplace_back(a, b);
      }
      if (!candidates.empty()) {
        auto [a, b] = pick(candidates, rng);
        s.g.bonds.push_back({a, b, BondOrder::Single});
        did_ring = true;
      }
    }

    for (int i = 0; i < s.g.atom_count(); ++i)
      s.g.atoms[i].hydrogens =
          s.fixed_h[i] >= 0 ? s.fixed_h[i] : implicit_hydrogens(s.g, i);

    if (s.g.atom_count() >= opts.min_atoms && graph_valid(s.g)) return s.g;
  }
  throw Error("random_molecule failed to produce a valid graph");
}

}  // namespace frag
