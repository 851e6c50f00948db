#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "frag/mol_graph.hpp"

namespace frag {
namespace detail {

inline int element_code(const std::string& e) {
  static const std::vector<std::string> order = {"*", "B", "C",  "N",  "O", "F",
                                                 "P", "S", "Cl", "Br", "I"};
  for (size_t i = 0; i < order.size(); ++i)
    if (order[i] == e) return static_cast<int>(i);
  return static_cast<int>(order.size());
}

// Stable relabeling of arbitrary signatures into dense colors 0..k-1.
template <typename Sig>
std::vector<int> dense_colors(const std::vector<Sig>& sigs) {
  std::map<Sig, int> index;
  for (const Sig& s : sigs) index.emplace(s, 0);
  int next = 0;
  for (auto& kv : index) kv.second = next++;
  std::vector<int> colors(sigs.size());
  for (size_t i = 0; i < sigs.size(); ++i) colors[i] = index[sigs[i]];
  return colors;
}

inline std::vector<int> initial_colors(const MolGraph& g) {
  std::vector<bool> ring = g.ring_atom_flags();
  std::vector<std::vector<int>> sigs(g.atom_count());
  for (int i = 0; i < g.atom_count(); ++i) {
    const Atom& a = g.atoms[i];
    std::vector<int> orders;
    for (const Bond& b : g.bonds)
      if (b.a == i || b.b == i) orders.push_back(static_cast<int>(b.order));
    std::sort(orders.begin(), orders.end());
    std::vector<int> s = {element_code(a.element), a.charge, a.aromatic ? 1 : 0,
                          a.hydrogens, g.degree(i), ring[i] ? 1 : 0};
    s.insert(s.end(), orders.begin(), orders.end());
    sigs[i] = std::move(s);
  }
  return dense_colors(sigs);
}

inline int color_count(const std::vector<int>& colors) {
  return colors.empty() ? 0 : *std::max_element(colors.begin(), colors.end()) + 1;
}

// Iterative neighborhood refinement: an atom's new color folds in the sorted
// multiset of (bond order, neighbor color) pairs. Runs to a fixed point.
inline std::vector<int> refine_colors(const MolGraph& g, std::vector<int> colors) {
  std::vector<std::vector<int>> adj = g.adjacency();
  int classes = color_count(colors);
  while (true) {
    std::vector<std::vector<int>> sigs(g.atom_count());
    for (int i = 0; i < g.atom_count(); ++i) {
      std::vector<std::pair<int, int>> nb;
      for (int bi : adj[i])
        nb.emplace_back(static_cast<int>(g.bonds[bi].order), colors[g.other_end(bi, i)]);
      std::sort(nb.begin(), nb.end());
      std::vector<int> s = {colors[i]};
      for (auto& p : nb) {
        s.push_back(p.first);
        s.push_back(p.second);
      }
      sigs[i] = std::move(s);
    }
    std::vector<int> next = dense_colors(sigs);
    int next_classes = color_count(next);
    if (next_classes == classes) return next;
    classes = next_classes;
    colors = std::move(next);
  }
}

// Serialized graph under a complete ranking; lexicographically minimal code ==
// canonical form.
inline std::vector<int> code_under_ranks(const MolGraph& g, const std::vector<int>& ranks) {
  std::vector<int> inv(ranks.size());
  for (size_t i = 0; i < ranks.size(); ++i) inv[ranks[i]] = static_cast<int>(i);
  std::vector<int> code;
  code.reserve(g.atoms.size() * 4 + g.bonds.size() * 3 + 2);
  code.push_back(g.atom_count());
  for (int r = 0; r < g.atom_count(); ++r) {
    const Atom& a = g.atoms[inv[r]];
    code.push_back(element_code(a.element));
    code.push_back(a.charge);
    code.push_back(a.aromatic ? 1 : 0);
    code.push_back(a.hydrogens);
  }
  std::vector<std::array<int, 3>> edges;
  edges.reserve(g.bonds.size());
  for (const Bond& b : g.bonds) {
    int u = ranks[b.a], v = ranks[b.b];
    if (u > v) std::swap(u, v);
    edges.push_back({u, v, static_cast<int>(b.order)});
  }
  std::sort(edges.begin(), edges.end());
  for (auto& e : edges) {
    code.push_back(e[0]);
    code.push_back(e[1]);
    code.push_back(e[2]);
  }
  return code;
}

struct CanonResult {
  std::vector<int> code;
  std::vector<int> ranks;
};

inline void canon_search(const MolGraph& g, const std::vector<int>& colors, CanonResult& best) {
  int n = g.atom_count();
  // Find the smallest non-singleton color class.
  std::vector<int> counts(color_count(colors), 0);
  for (int c : colors) ++counts[c];
  int target = -1;
  for (int c = 0; c < static_cast<int>(counts.size()); ++c)
    if (counts[c] > 1) {
      target = c;
      break;
    }
  if (target == -1) {
    std::vector<int> code = code_under_ranks(g, colors);
    if (best.ranks.empty() || code < best.code) best = {std::move(code), colors};
    return;
  }
  for (int i = 0; i < n; ++i) {
    if (colors[i] != target) continue;
    // Individualize atom i ahead of its class, then re-refine.
    std::vector<int> split(n);
    for (int j = 0; j < n; ++j) split[j] = colors[j] * 2 + (j == i ? 0 : 1);
    canon_search(g, refine_colors(g, dense_colors(split)), best);
  }
}

}  // namespace detail

// Canonical ranks: ranks[i] is the canonical position of atom i. Invariant
// under atom relabeling; identical attribute-preserving graphs map to the
// same rank-ordered serialization.
inline std::vector<int> canonical_ranks(const MolGraph& g) {
  if (g.atoms.empty()) return {};
  detail::CanonResult best;
  detail::canon_search(g, detail::refine_colors(g, detail::initial_colors(g)), best);
  return best.ranks;
}

// Equal keys iff the graphs are isomorphic with element, charge, aromaticity,
// hydrogen count, and bond order preserved.
inline std::string canonical_key(const MolGraph& g) {
  detail::CanonResult best;
  if (!g.atoms.empty())
    detail::canon_search(g, detail::refine_colors(g, detail::initial_colors(g)), best);
  std::string key;
  key.reserve(best.code.size() * 3);
  for (size_t i = 0; i < best.code.size(); ++i) {
    if (i) key.push_back(',');
    key += std::to_string(best.code[i]);
  }
  return key;
}

}  // namespace frag
