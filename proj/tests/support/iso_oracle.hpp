#pragma once

// Test-only brute-force graph isomorphism (VF2-flavoured backtracking).
// Deliberately independent of frag::canonical_key so the two can check each
// other.

#include <algorithm>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "frag/mol_graph.hpp"

namespace fragtest {

inline bool atoms_match(const frag::Atom& a, const frag::Atom& b) {
  return a.element == b.element && a.charge == b.charge && a.aromatic == b.aromatic &&
         a.hydrogens == b.hydrogens;
}

inline bool graphs_isomorphic(const frag::MolGraph& g1, const frag::MolGraph& g2) {
  const int n = g1.atom_count();
  if (n != g2.atom_count() || g1.bond_count() != g2.bond_count()) return false;

  // Adjacency with bond orders.
  auto table = [](const frag::MolGraph& g) {
    std::vector<std::vector<std::pair<int, int>>> t(g.atom_count());
    for (const frag::Bond& b : g.bonds) {
      t[b.a].push_back({b.b, static_cast<int>(b.order)});
      t[b.b].push_back({b.a, static_cast<int>(b.order)});
    }
    return t;
  };
  auto t1 = table(g1), t2 = table(g2);

  // Visit g1 atoms in a connectivity-friendly order.
  std::vector<int> order;
  std::vector<bool> queued(n, false);
  for (int s = 0; s < n; ++s) {
    if (queued[s]) continue;
    queued[s] = true;
    order.push_back(s);
    for (size_t h = order.size() - 1; h < order.size(); ++h) {
      for (auto& [w, o] : t1[order[h]])
        if (!queued[w]) {
          queued[w] = true;
          order.push_back(w);
        }
    }
  }

  std::vector<int> map(n, -1), used(n, 0);
  std::function<bool(size_t)> rec = [&](size_t k) -> bool {
    if (k == order.size()) return true;
    int v = order[k];
    for (int c = 0; c < n; ++c) {
      if (used[c] || !atoms_match(g1.atoms[v], g2.atoms[c])) continue;
      if (t1[v].size() != t2[c].size()) continue;
      bool ok = true;
      for (auto& [w, o] : t1[v]) {
        if (map[w] == -1) continue;
        bool found = false;
        for (auto& [w2, o2] : t2[c])
          if (w2 == map[w] && o2 == o) found = true;
        if (!found) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      map[v] = c;
      used[c] = 1;
      if (rec(k + 1)) return true;
      map[v] = -1;
      used[c] = 0;
    }
    return false;
  };
  return rec(0);
}

inline std::vector<int> random_permutation(int n, std::mt19937_64& rng) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

}  // namespace fragtest
