#include <gtest/gtest.h>

#include <random>
#include <set>

#include "frag/genetic.hpp"
#include "frag/molgen.hpp"
#include "frag/smiles.hpp"

using namespace frag;

namespace {

Population make_population(int n, uint64_t seed, int capacity = 50) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0., 1.);
  Population pop(capacity);
  while (pop.size() < n) {
    MolGraph m = random_molecule(rng);
    pop.insert(m, u(rng), canonical_key(m));
  }
  return pop;
}

}  // namespace

TEST(Population, InvariantsHold) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0., 1.);
  Population pop(10);
  std::set<std::string> keys;
  for (int i = 0; i < 80; ++i) {
    MolGraph m = random_molecule(rng);
    pop.insert(m, u(rng), canonical_key(m));
    ASSERT_LE(pop.size(), 10);
    keys.clear();
    double prev = 2.0;
    for (const PopulationEntry& e : pop.entries()) {
      ASSERT_TRUE(keys.insert(e.key).second);
      ASSERT_LE(e.y, prev);
      prev = e.y;
    }
  }
  // duplicate key is a no-op
  const PopulationEntry top = pop.entries()[0];
  EXPECT_FALSE(pop.insert(top.mol, 0.99, top.key));
  EXPECT_DOUBLE_EQ(pop.min_y(), pop.entries().back().y);
  Population empty(5);
  EXPECT_THROW(empty.min_y(), EmptyPopulation);
  EXPECT_THROW(select_parents(empty, rng), EmptyPopulation);
}

TEST(Population, SingletonParents) {
  Population pop(5);
  MolGraph m = parse_smiles("CCO");
  pop.insert(m, 0.5, canonical_key(m));
  std::mt19937_64 rng(2);
  auto [a, b] = select_parents(pop, rng);
  EXPECT_EQ(a, b);
}

TEST(Population, SelectionUniformity) {
  Population pop = make_population(50, 3);
  std::mt19937_64 rng(7);
  std::map<const MolGraph*, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto [a, b] = select_parents(pop, rng);
    counts[a]++;
    counts[b]++;
  }
  for (const PopulationEntry& e : pop.entries()) {
    double freq = counts[&e.mol] / (2.0 * draws);
    EXPECT_GE(freq, 0.014);
    EXPECT_LE(freq, 0.026);
  }
}

TEST(Crossover, ChainJoinMatchesBruteForce) {
  MolGraph p1 = parse_smiles("CCCC");
  MolGraph p2 = parse_smiles("NNNN");
  // Brute-force all non-ring single-cut joins: every (piece of p1) x (piece
  // of p2) combination bonded at the cut atoms.
  std::set<std::string> oracle;
  auto pieces = [](const MolGraph& g) {
    std::vector<std::pair<MolGraph, int>> out;  // piece, open atom
    std::vector<bool> ring = g.ring_bond_flags();
    for (int bi = 0; bi < g.bond_count(); ++bi) {
      if (ring[bi] || g.bonds[bi].order != BondOrder::Single) continue;
      for (int side = 0; side < 2; ++side) {
        MolGraph piece;
        std::vector<int> member(g.atom_count(), -1);
        std::vector<int> stack{side == 0 ? g.bonds[bi].a : g.bonds[bi].b};
        member[stack[0]] = 1;
        auto adj = g.adjacency();
        while (!stack.empty()) {
          int v = stack.back();
          stack.pop_back();
          for (int e : adj[v]) {
            if (e == bi) continue;
            int w = g.other_end(e, v);
            if (member[w] == -1) {
              member[w] = 1;
              stack.push_back(w);
            }
          }
        }
        std::vector<int> remap(g.atom_count(), -1);
        for (int i = 0; i < g.atom_count(); ++i)
          if (member[i] == 1) {
            remap[i] = piece.atom_count();
            piece.atoms.push_back(g.atoms[i]);
          }
        // the cut bond spans both sides, so membership excludes it
        for (const Bond& b : g.bonds)
          if (member[b.a] == 1 && member[b.b] == 1)
            piece.bonds.push_back({remap[b.a], remap[b.b], b.order});
        int open = side == 0 ? g.bonds[bi].a : g.bonds[bi].b;
        out.emplace_back(piece, remap[open]);
      }
    }
    return out;
  };
  for (auto& [pa, oa] : pieces(p1))
    for (auto& [pb, ob] : pieces(p2)) {
      MolGraph join = pa;
      int off = join.atom_count();
      for (const Atom& at : pb.atoms) join.atoms.push_back(at);
      for (const Bond& bd : pb.bonds) join.bonds.push_back({bd.a + off, bd.b + off, bd.order});
      join.bonds.push_back({oa, ob + off, BondOrder::Single});
      for (int i = 0; i < join.atom_count(); ++i)
        join.atoms[i].hydrogens = implicit_hydrogens(join, i);
      if (graph_valid(join)) oracle.insert(canonical_key(join));
    }
  ASSERT_FALSE(oracle.empty());
  EXPECT_TRUE(oracle.count(canonical_key(parse_smiles("CCNN"))));

  std::mt19937_64 rng(11);
  std::set<std::string> seen;
  for (int t = 0; t < 600; ++t) {
    auto child = crossover(p1, p2, rng);
    if (!child) continue;  // ring mode on acyclic parents fails
    std::string key = canonical_key(*child);
    ASSERT_TRUE(oracle.count(key)) << write_smiles(*child);
    seen.insert(key);
  }
  EXPECT_TRUE(seen.count(canonical_key(parse_smiles("CCNN"))));
}

TEST(Crossover, OffspringAlwaysValid) {
  std::mt19937_64 rng(13);
  int produced = 0;
  for (int t = 0; t < 400; ++t) {
    MolGraph p1 = random_molecule(rng);
    MolGraph p2 = random_molecule(rng);
    auto child = crossover(p1, p2, rng);
    if (!child) continue;
    ++produced;
    ASSERT_TRUE(graph_valid(*child));
    ASSERT_TRUE(child->connected());
  }
  EXPECT_GT(produced, 150);
}

TEST(Crossover, SelfCrossCanReproduceParent) {
  MolGraph m = parse_smiles("CCOCC");
  std::string key = canonical_key(m);
  std::mt19937_64 rng(17);
  bool reproduced = false;
  for (int t = 0; t < 400 && !reproduced; ++t) {
    auto child = crossover(m, m, rng);
    if (child && canonical_key(*child) == key) reproduced = true;
  }
  EXPECT_TRUE(reproduced);
}

TEST(Crossover, RingModeProducesRingOffspring) {
  MolGraph p1 = parse_smiles("C1CCCCC1CC");
  MolGraph p2 = parse_smiles("C1CCCC1N");
  std::mt19937_64 rng(19);
  int ringy = 0, produced = 0;
  for (int t = 0; t < 300; ++t) {
    auto child = crossover(p1, p2, rng);
    if (!child) continue;
    ++produced;
    std::vector<bool> rb = child->ring_bond_flags();
    if (std::count(rb.begin(), rb.end(), true) > 0) ++ringy;
    ASSERT_TRUE(graph_valid(*child));
  }
  EXPECT_GT(produced, 50);
  EXPECT_GT(ringy, 0);
}

TEST(Mutate, AtomChangeOnEthane) {
  MolGraph m = parse_smiles("CC");
  MutationTable only_change;
  only_change.atom_insertion = only_change.atom_deletion = only_change.bond_insertion =
      only_change.bond_deletion = only_change.bond_order_swap = 0;
  std::mt19937_64 rng(23);
  std::set<std::string> seen;
  for (int t = 0; t < 100; ++t) {
    auto r = mutate(m, rng, only_change);
    ASSERT_TRUE(r.has_value());
    seen.insert(write_smiles(*r));
  }
  EXPECT_TRUE(seen.count("CN"));
}

TEST(Mutate, BondDeletionOnlyInRings) {
  MutationTable only_del;
  only_del.atom_insertion = only_del.atom_deletion = only_del.bond_insertion =
      only_del.bond_order_swap = only_del.atom_change = 0;
  std::mt19937_64 rng(29);
  // Acyclic molecule: no legal site, must return empty.
  for (int t = 0; t < 20; ++t) EXPECT_FALSE(mutate(parse_smiles("CCCCC"), rng, only_del));
  // Cyclic molecule: never disconnects.
  MolGraph ring = parse_smiles("C1CCCCC1CC");
  int produced = 0;
  for (int t = 0; t < 100; ++t) {
    auto r = mutate(ring, rng, only_del);
    if (!r) continue;
    ++produced;
    ASSERT_TRUE(r->connected());
    ASSERT_TRUE(graph_valid(*r));
  }
  EXPECT_GT(produced, 50);
}

TEST(Mutate, SeededAuditAllValid) {
  std::mt19937_64 gen_rng(31);
  MolGraph m = random_molecule(gen_rng, {.min_atoms = 20, .max_atoms = 20});
  ASSERT_EQ(m.atom_count(), 20);
  std::mt19937_64 rng(37);
  int produced = 0;
  for (int t = 0; t < 1000; ++t) {
    auto r = mutate(m, rng);
    if (!r) continue;
    ++produced;
    ASSERT_TRUE(graph_valid(*r)) << "mutation " << t;
    ASSERT_TRUE(r->connected());
  }
  EXPECT_GT(produced, 800);
}

TEST(Offspring, DefaultsAndDeterminism) {
  GaConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.mutation_rate, 0.1);
  EXPECT_EQ(cfg.crossover_retries, 20);

  Population pop = make_population(20, 41);
  std::mt19937_64 r1(43), r2(43);
  for (int t = 0; t < 30; ++t) {
    auto a = make_offspring(pop, r1);
    auto b = make_offspring(pop, r2);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) ASSERT_EQ(canonical_key(*a), canonical_key(*b));
  }
}

TEST(Offspring, ZeroMutationRateIsPureCrossover) {
  Population pop = make_population(10, 47);
  std::mt19937_64 rng(53);
  int produced = 0;
  for (int t = 0; t < 50; ++t) {
    auto child = make_offspring(pop, rng, {.mutation_rate = 0.0});
    if (child) {
      ++produced;
      ASSERT_TRUE(graph_valid(*child));
    }
  }
  EXPECT_GT(produced, 20);
}
