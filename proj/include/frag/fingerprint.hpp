#pragma once

#include <algorithm>
#include <bitset>
#include <cstdint>
#include <vector>

#include "frag/canonical.hpp"
#include "frag/mol_graph.hpp"

namespace frag {

inline constexpr int kFingerprintBits = 1024;
inline constexpr int kFingerprintRadius = 2;

struct Fingerprint {
  std::bitset<kFingerprintBits> bits;

  int popcount() const { return static_cast<int>(bits.count()); }
  bool operator==(const Fingerprint& o) const { return bits == o.bits; }
};

namespace detail {

// splitmix64 finalizer; the only hash used for fingerprint bit positions.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t seed, uint64_t v) {
  return mix64(seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

}  // namespace detail

// ECFP-style circular fingerprint: per-atom invariants hashed, then two
// rounds of neighbor folding; every environment (radius 0, 1, 2 of every
// atom) sets one bit, position = hash mod 1024.
inline Fingerprint morgan_fingerprint(const MolGraph& g) {
  using detail::hash_combine;
  using detail::mix64;
  Fingerprint fp;
  const int n = g.atom_count();
  if (n == 0) return fp;
  std::vector<bool> ring = g.ring_atom_flags();
  std::vector<std::vector<int>> adj = g.adjacency();

  std::vector<uint64_t> env(n);
  for (int i = 0; i < n; ++i) {
    const Atom& a = g.atoms[i];
    uint64_t h = mix64(static_cast<uint64_t>(detail::element_code(a.element)) + 1);
    h = hash_combine(h, static_cast<uint64_t>(g.degree(i)));
    h = hash_combine(h, static_cast<uint64_t>(a.charge + 8));
    h = hash_combine(h, static_cast<uint64_t>(a.hydrogens));
    h = hash_combine(h, ring[i] ? 2 : 1);
    env[i] = h;
  }
  for (uint64_t h : env) fp.bits.set(h % kFingerprintBits);

  for (int round = 0; round < kFingerprintRadius; ++round) {
    std::vector<uint64_t> next(n);
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<uint64_t, uint64_t>> nb;
      nb.reserve(adj[i].size());
      for (int bi : adj[i])
        nb.emplace_back(static_cast<uint64_t>(g.bonds[bi].order), env[g.other_end(bi, i)]);
      std::sort(nb.begin(), nb.end());
      uint64_t h = hash_combine(mix64(round + 3), env[i]);
      for (const auto& [order, e] : nb) {
        h = hash_combine(h, order);
        h = hash_combine(h, e);
      }
      next[i] = h;
    }
    env = std::move(next);
    for (uint64_t h : env) fp.bits.set(h % kFingerprintBits);
  }
  return fp;
}

// |a AND b| / |a OR b|; two empty fingerprints count as identical.
inline double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  const auto both = a.bits & b.bits;
  const auto any = a.bits | b.bits;
  if (any.none()) return 1.0;
  return static_cast<double>(both.count()) / static_cast<double>(any.count());
}

}  // namespace frag
