// End-to-end acceptance suite. One test per criterion; each prints a
// PASS/FAIL line through GoogleTest. The shared environment (synthetic
// corpus, trained backbone, trained injection module) is built lazily once.

#include <gtest/gtest.h>

#include <chrono>
#include <numeric>
#include <set>

#include "frag/checkpoint.hpp"
#include "frag/corpus.hpp"
#include "frag/lm.hpp"
#include "frag/metrics.hpp"
#include "frag/molgen.hpp"
#include "frag/optimizer.hpp"
#include "frag/report.hpp"
#include "frag/train.hpp"
#include "support/inclusion.hpp"
#include "support/iso_oracle.hpp"
#include "support/stats.hpp"

using namespace frag;

namespace {

double now_s() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

struct Env {
  std::vector<MolGraph> corpus;          // 5000 synthetic molecules
  std::set<std::string> corpus_keys;
  MolGraph target;                       // held out of the corpus
  std::vector<MolGraph> train_mols;      // 4500
  std::vector<MolGraph> held_mols;       // 500
  BackboneLM lm;
  InjectionModule inj;                   // trained on train_mols
  InjectionModule untrained;             // same init, never trained
  double pretrain_seconds = 0;
  double inject_seconds = 0;
  double validity = 0;

  Env() {
    std::mt19937_64 crng(2025);
    for (int i = 0; i < 5000; ++i) {
      MolGraph m = random_molecule(crng, {.min_atoms = 8, .max_atoms = 16});
      corpus_keys.insert(canonical_key(m));
      corpus.push_back(std::move(m));
    }
    std::mt19937_64 trng(7777);
    do {
      target = random_molecule(trng, {.min_atoms = 10, .max_atoms = 16});
    } while (corpus_keys.count(canonical_key(target)));
    train_mols.assign(corpus.begin(), corpus.begin() + 4500);
    held_mols.assign(corpus.begin() + 4500, corpus.end());

    std::vector<std::string> strings = safe_training_corpus(corpus, 2025);
    lm.init({.d_model = 64, .n_layers = 3, .n_heads = 4, .context = 96},
            TokenVocab::build(strings), 2025);
    double t0 = now_s();
    pretrain_backbone(lm, strings, {.epochs = 30, .batch_size = 16, .lr = 1.2e-3, .seed = 2025});
    pretrain_seconds = now_s() - t0;
    std::mt19937_64 vrng(1);
    validity = sample_validity(lm, 200, {.temperature = 0.9, .max_new_tokens = 64}, vrng);

    std::mt19937_64 irng(2025);
    inj.init(lm.cfg.d_model, lm.cfg.d_model, 1, irng);
    untrained = inj;  // identical initialization, kept untrained
    InjectionData data = build_injection_examples(lm, train_mols, 10, 2025);
    t0 = now_s();
    train_injection(lm, inj, data.examples,
                    {.epochs = 8, .lr = 1e-4, .batch_size = 16, .seed = 2025});
    inject_seconds = now_s() - t0;
    std::printf("[env] pretrain %.0fs (validity %.2f), injection training %.0fs\n",
                pretrain_seconds, validity, inject_seconds);
  }
};

Env& env() {
  static Env e;
  return e;
}

RunConfig run_config(uint64_t seed, RunVariant variant, std::optional<double> delta) {
  RunConfig rc;
  rc.n_frag = 50;
  rc.n_mol = 50;
  rc.g_total = 2000;
  rc.k_soft = 10;
  rc.frag_min_atoms = 2;
  rc.frag_max_atoms = 20;
  rc.mol_min_atoms = 5;
  rc.mol_max_atoms = 40;
  rc.sampling.temperature = 0.9;
  rc.sampling.max_new_tokens = 64;
  rc.seed = seed;
  rc.variant = variant;
  rc.delta = delta;
  return rc;
}

struct RunOutcome {
  double auc_top10 = 0;
  double diversity_top100 = 0;
  std::vector<HistoryRecord> history;
  bool stalled = false;
};

RunOutcome do_run(uint64_t seed, RunVariant variant, std::optional<double> delta) {
  Env& e = env();
  Oracle oracle = similarity_oracle(e.target);
  std::vector<std::pair<MolGraph, double>> dataset;
  dataset.reserve(e.corpus.size());
  for (const MolGraph& m : e.corpus) dataset.emplace_back(m, oracle.peek(m));
  OptimizationRun run(run_config(seed, variant, delta), &e.lm, &e.inj, oracle);
  run.initialize(dataset);
  run.run();
  RunOutcome out;
  out.stalled = run.state().stalled;
  out.history = run.state().history;
  std::vector<double> ys;
  for (const HistoryRecord& h : out.history) ys.push_back(h.y);
  if (!ys.empty()) out.auc_top10 = auc_topk(ys, 10, run.state().budget);
  std::vector<Fingerprint> fps;
  for (const HistoryRecord* h : top_n_records(out.history, 100))
    fps.push_back(morgan_fingerprint(parse_smiles(h->smiles)));
  if (fps.size() >= 2) out.diversity_top100 = diversity(fps);
  return out;
}

}  // namespace

// Criterion 1: parse -> write -> parse graph isomorphism on >= 1000 molecules;
// canonical-key invariance under 100 random atom permutations each; < 1 min.
TEST(Acceptance, Criterion01_ParserRoundTrip) {
  double t0 = now_s();
  std::mt19937_64 rng(101);
  std::vector<MolGraph> mols;
  for (int i = 0; i < 1000; ++i) mols.push_back(random_molecule(rng));
  int round_trips = 0;
  for (const MolGraph& m : mols) {
    std::string text = write_smiles(m);
    MolGraph back = parse_smiles(text);
    ASSERT_TRUE(fragtest::graphs_isomorphic(m, back)) << text;
    ++round_trips;
    std::string key = canonical_key(m);
    for (int p = 0; p < 100; ++p) {
      MolGraph pm = permute_atoms(m, fragtest::random_permutation(m.atom_count(), rng));
      ASSERT_EQ(canonical_key(pm), key) << text;
    }
  }
  EXPECT_EQ(round_trips, 1000);
  double elapsed = now_s() - t0;
  EXPECT_LT(elapsed, 60.0) << "runtime budget";
}

// Criterion 2: reattach(slice(m)) isomorphic to m for every decomposable
// corpus molecule; fragment kind/attachment invariants hold.
TEST(Acceptance, Criterion02_SlicingRoundTrip) {
  std::mt19937_64 rng(202);
  std::mt19937_64 slice_rng(203);
  int decomposable = 0;
  for (int i = 0; i < 1200; ++i) {
    MolGraph m = random_molecule(rng);
    auto s = slice_arm_linker_arm(m, slice_rng);
    if (!s) continue;
    ++decomposable;
    ASSERT_EQ(s->arm1.attachments.size(), 1u);
    ASSERT_EQ(s->arm2.attachments.size(), 1u);
    ASSERT_EQ(s->linker.attachments.size(), 2u);
    ASSERT_NO_THROW(validate_fragment(s->arm1));
    ASSERT_NO_THROW(validate_fragment(s->linker));
    ASSERT_NO_THROW(validate_fragment(s->arm2));
    MolGraph back = reattach(*s);
    ASSERT_EQ(canonical_key(back), canonical_key(m)) << write_smiles(m);
  }
  EXPECT_GT(decomposable, 1000);
}

// Criterion 3: after 10,000 randomized vocabulary updates every record's
// score matches brute-force recomputation from the update log within 1e-12.
TEST(Acceptance, Criterion03_ScoreOracleEquivalence) {
  std::mt19937_64 data_rng(303);
  std::uniform_real_distribution<double> u(0., 1.);
  std::mt19937_64 run_rng(304);
  std::mt19937_64 shadow_rng(304);
  std::map<std::string, std::pair<double, int>> shadow;
  auto shadow_update = [&](const MolGraph& m, double y) {
    auto s = slice_arm_linker_arm(m, shadow_rng);
    if (!s) return;
    std::set<std::string> keys;
    for (const Fragment* f : {&s->arm1, &s->linker, &s->arm2}) keys.insert(fragment_key(*f));
    for (const std::string& k : keys) {
      shadow[k].first += y;
      shadow[k].second += 1;
    }
  };

  std::vector<std::pair<MolGraph, double>> init;
  for (int i = 0; i < 50; ++i) init.emplace_back(random_molecule(data_rng), u(data_rng));
  FragmentVocabulary v = FragmentVocabulary::build_initial(init, {.n_frag = 40}, run_rng);
  for (const auto& [m, y] : init) shadow_update(m, y);

  for (int i = 0; i < 10000; ++i) {
    MolGraph m = random_molecule(data_rng);
    double y = u(data_rng);
    v.update_with_molecule(m, y, run_rng);
    shadow_update(m, y);
  }
  int checked = 0;
  for (FragmentKind kind : {FragmentKind::Arm, FragmentKind::Linker}) {
    ASSERT_LE(v.pool_size(kind), 40);
    for (const FragmentRecord* rec : v.pool(kind)) {
      auto it = shadow.find(rec->key);
      ASSERT_NE(it, shadow.end());
      ASSERT_EQ(rec->count, it->second.second);
      ASSERT_NEAR(rec->score(), it->second.first / it->second.second, 1e-12);
      ++checked;
    }
  }
  EXPECT_GE(checked, 40);
}

// Criterion 4: 10,000 seeded hard draws split linker design / motif extension
// within [0.48, 0.52]; soft kinds complementary on every draw.
TEST(Acceptance, Criterion04_RetrievalSplit) {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0., 1.);
  std::vector<std::pair<MolGraph, double>> data;
  for (int i = 0; i < 400; ++i) data.emplace_back(random_molecule(rng), u(rng));
  FragmentVocabulary v = FragmentVocabulary::build_initial(data, {.n_frag = 50}, rng);

  std::mt19937_64 draw_rng(405);
  int linker_design = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    GenerationTask t = sample_hard(v, draw_rng);
    std::vector<Fragment> soft = sample_soft(t, v, 10, draw_rng);
    ASSERT_EQ(soft.size(), 10u);
    FragmentKind want =
        t.mode == TaskMode::LinkerDesign ? FragmentKind::Linker : FragmentKind::Arm;
    for (const Fragment& f : soft) ASSERT_EQ(f.kind(), want);
    if (t.mode == TaskMode::LinkerDesign) ++linker_design;
  }
  double freq = static_cast<double>(linker_design) / draws;
  EXPECT_GE(freq, 0.48);
  EXPECT_LE(freq, 0.52);
}

// Criterion 5: injection math. Softmax rows sum to 1 within 1e-6; singleton
// soft state returns exactly Value(h_soft); finite-difference agreement at
// rel-err <= 1e-4; zero-Value + residual reproduces the bare backbone logits
// bit for bit.
TEST(Acceptance, Criterion05_InjectionMath) {
  Env& e = env();
  std::vector<int> toks = e.lm.vocab.encode("CC(C)%10.c1ccccc1C%11.C%10O%11", true, true);
  std::vector<Fragment> soft{fragment_from_smiles("CCN[*]"), fragment_from_smiles("[*]OC[*]")};
  nn::Matrix h_soft = e.lm.soft_states(soft, e.inj.layer);
  nn::Matrix h_in = e.lm.encode_lower(toks, e.inj.layer);

  InjectionModule probe = e.inj;
  probe.attend_train(h_in, h_soft);
  for (int r = 0; r < probe.att_cache.rows(); ++r)
    ASSERT_NEAR(probe.att_cache.row(r).sum(), 1.0, 1e-6);

  nn::Matrix single = h_soft.topRows(1);
  nn::Matrix fi = probe.attend_const(h_in, single);
  nn::Matrix v = probe.value.forward_const(single);
  for (int r = 0; r < fi.rows(); ++r)
    for (int c = 0; c < fi.cols(); ++c) ASSERT_EQ(fi(r, c), v(0, c));

  // finite differences on a tiny instance
  std::vector<MolGraph> mols;
  std::mt19937_64 mrng(505);
  for (int i = 0; i < 40; ++i) mols.push_back(random_molecule(mrng));
  BackboneLM tiny;
  tiny.init({.d_model = 12, .n_layers = 2, .n_heads = 2, .context = 32},
            TokenVocab::build(safe_training_corpus(mols, 505)), 505);
  std::mt19937_64 irng(506);
  InjectionModule fd_inj;
  fd_inj.init(12, 8, 1, irng, 0.3);
  std::normal_distribution<double> nd(0.0, 0.3);
  for (int r = 0; r < fd_inj.value.fc2.weight.w.rows(); ++r)
    for (int c = 0; c < fd_inj.value.fc2.weight.w.cols(); ++c)
      fd_inj.value.fc2.weight.w(r, c) = nd(irng);
  InjectionExample ex;
  ex.tokens = tiny.vocab.encode("CC%10.C%10", true, true);
  ex.target_start = 4;
  ex.soft = {fragment_from_smiles("C[*]"), fragment_from_smiles("O[*]")};
  for (const nn::NamedParam& p : fd_inj.params()) p.param->zero_grad();
  detail_train::injection_step(tiny, fd_inj, ex, 1.0);
  const double h = 1e-4;
  int resolvable = 0;
  for (const nn::NamedParam& p : fd_inj.params()) {
    nn::Matrix analytic = p.param->g;
    for (int r = 0; r < p.param->w.rows(); ++r)
      for (int c = 0; c < p.param->w.cols(); ++c) {
        double save = p.param->w(r, c);
        p.param->w(r, c) = save + h;
        double lp = detail_train::injection_step(tiny, fd_inj, ex, 0.0);
        p.param->w(r, c) = save - h;
        double lmn = detail_train::injection_step(tiny, fd_inj, ex, 0.0);
        p.param->w(r, c) = save;
        double fd = (lp - lmn) / (2 * h);
        double a = analytic(r, c);
        double scale = std::max(std::abs(a), std::abs(fd));
        if (scale < 1e-7) continue;  // below central-difference resolution
        ASSERT_LE(std::abs(a - fd), 1e-4 * scale) << p.name << "(" << r << "," << c << ")";
        ++resolvable;
      }
  }
  EXPECT_GT(resolvable, 200);

  // zero-Value + residual == bare backbone, exactly
  InjectionModule zeroed = e.inj;
  zeroed.value.fc2.weight.w.setZero();
  zeroed.value.fc2.bias.w.setZero();
  nn::Matrix with = e.lm.forward_logits(toks, &zeroed, &h_soft);
  nn::Matrix without = e.lm.forward_logits(toks, nullptr, nullptr);
  for (int r = 0; r < with.rows(); ++r)
    for (int c = 0; c < with.cols(); ++c) ASSERT_EQ(with(r, c), without(r, c));
}

// Criterion 6: the backbone is byte-identical across injection training and
// the trainable-parameter count matches the analytic formula.
TEST(Acceptance, Criterion06_FrozenBackbone) {
  std::mt19937_64 rng(606);
  std::vector<MolGraph> mols;
  for (int i = 0; i < 250; ++i) mols.push_back(random_molecule(rng, {.min_atoms = 8, .max_atoms = 14}));
  std::vector<std::string> corpus = safe_training_corpus(mols, 606);
  BackboneLM lm;
  lm.init({.d_model = 32, .n_layers = 2, .n_heads = 4, .context = 96},
          TokenVocab::build(corpus), 606);
  pretrain_backbone(lm, corpus, {.epochs = 2, .batch_size = 16, .lr = 1e-3, .seed = 606});

  std::vector<nn::Matrix> before;
  for (const nn::NamedParam& p : lm.params()) before.push_back(p.param->w);
  lm.zero_grads();

  InjectionData data = build_injection_examples(lm, mols, 6, 606);
  ASSERT_GT(data.examples.size(), 100u);
  std::mt19937_64 irng(606);
  InjectionModule inj;
  inj.init(lm.cfg.d_model, lm.cfg.d_model, 1, irng);
  train_injection(lm, inj, data.examples, {.epochs = 2, .lr = 5e-4, .batch_size = 16, .seed = 606});

  std::vector<nn::NamedParam> params = lm.params();
  for (size_t i = 0; i < params.size(); ++i)
    for (int r = 0; r < before[i].rows(); ++r)
      for (int c = 0; c < before[i].cols(); ++c)
        ASSERT_EQ(params[i].param->w(r, c), before[i](r, c)) << params[i].name;
  EXPECT_DOUBLE_EQ(nn::grad_norm(lm.params()), 0.0);

  long d = lm.cfg.d_model, dk = inj.d_key;
  long analytic = 2 * ((d * d + d) + (d * dk + dk)) + ((d * d + d) + (d * d + d));
  EXPECT_EQ(inj.parameter_count(), analytic);
}

// Criterion 7: held-out mean log-likelihood of the nearest-neighbor target
// improves over the untrained module; paired one-sided t-test p < 0.05;
// training fits the 30-minute budget.
TEST(Acceptance, Criterion07_TrainingObjective) {
  Env& e = env();
  EXPECT_LT(e.inject_seconds, 1800.0) << "training runtime budget";
  InjectionData held = build_injection_examples(e.lm, e.held_mols, 10, 9999, &e.train_mols);
  ASSERT_GT(held.examples.size(), 300u);
  std::vector<double> trained, untrained;
  for (const InjectionExample& ex : held.examples) {
    trained.push_back(example_loglik(e.lm, &e.inj, ex));
    untrained.push_back(example_loglik(e.lm, &e.untrained, ex));
  }
  fragtest::PairedTest t = fragtest::paired_t_test(trained, untrained);
  std::printf("[c7] n=%d mean diff=%.4f t=%.2f p=%.3g\n", t.n, t.mean_diff, t.t, t.p_one_sided);
  EXPECT_GT(t.mean_diff, 0.0);
  EXPECT_LT(t.p_one_sided, 0.05);
}

// Criterion 8: every valid generated molecule embeds both hard fragments at
// their attachment sites.
TEST(Acceptance, Criterion08_HardFragmentInclusion) {
  Env& e = env();
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> u(0., 1.);
  std::vector<std::pair<MolGraph, double>> data;
  for (const MolGraph& m : e.corpus)
    if (data.size() < 600) data.emplace_back(m, u(rng));
  FragmentVocabulary v = FragmentVocabulary::build_initial(
      data, {.n_frag = 50, .frag_min_atoms = 2, .frag_max_atoms = 20}, rng);

  SamplingConfig s{.temperature = 0.9, .max_new_tokens = 64};
  int valid = 0, attempts = 0;
  while (valid < 100 && attempts < 3000) {
    ++attempts;
    GenerationTask task = sample_hard(v, rng);
    std::vector<Fragment> soft = sample_soft(task, v, 10, rng);
    auto g = generate_once(e.lm, &e.inj, task.hard_input, soft, s, rng);
    if (!g) continue;
    ++valid;
    ASSERT_GE(g->assembled.block_atom_ranges.size(), task.hard.size() + 1);
    for (size_t b = 0; b < task.hard.size(); ++b)
      ASSERT_TRUE(fragtest::block_embeds_fragment(*g, static_cast<int>(b), task.hard[b]))
          << g->safe_text;
  }
  EXPECT_EQ(valid, 100) << "only " << valid << " valid generations in " << attempts
                        << " attempts";
}

// Criterion 9: >= 99% of non-empty crossover/mutation outputs pass valence +
// connectivity validation over 10,000 seeded operations; stated defaults.
TEST(Acceptance, Criterion09_GaValidity) {
  EXPECT_DOUBLE_EQ(GaConfig{}.mutation_rate, 0.1);
  EXPECT_EQ(RunConfig{}.n_mol, 50);

  std::mt19937_64 rng(909);
  std::vector<MolGraph> mols;
  for (int i = 0; i < 200; ++i) mols.push_back(random_molecule(rng));
  long produced = 0, valid = 0;
  std::mt19937_64 op_rng(910);
  for (int i = 0; i < 10000; ++i) {
    const MolGraph& a = mols[std::uniform_int_distribution<size_t>(0, mols.size() - 1)(op_rng)];
    const MolGraph& b = mols[std::uniform_int_distribution<size_t>(0, mols.size() - 1)(op_rng)];
    std::optional<MolGraph> child =
        i % 2 == 0 ? crossover(a, b, op_rng) : mutate(a, op_rng);
    if (!child) continue;
    ++produced;
    if (graph_valid(*child) && child->connected()) ++valid;
  }
  ASSERT_GT(produced, 5000);
  double rate = static_cast<double>(valid) / produced;
  std::printf("[c9] %ld/%ld valid (%.4f)\n", valid, produced, rate);
  EXPECT_GE(rate, 0.99);
}

// Criterion 10: with budget 2000 on a held-out similarity target, the full
// pipeline beats unconditional sampling and the no-soft ablation on mean
// AUC top-10 over 3 seeds, within the 1-hour budget.
TEST(Acceptance, Criterion10_EndToEndOrdering) {
  double t0 = now_s();
  double full = 0, hard = 0, rnd = 0;
  for (uint64_t seed : {1, 2, 3}) {
    RunOutcome o = do_run(seed, RunVariant::Full, std::nullopt);
    EXPECT_FALSE(o.stalled);
    full += o.auc_top10;
  }
  for (uint64_t seed : {1, 2, 3}) hard += do_run(seed, RunVariant::HardGa, std::nullopt).auc_top10;
  for (uint64_t seed : {1, 2, 3}) rnd += do_run(seed, RunVariant::Random, std::nullopt).auc_top10;
  full /= 3;
  hard /= 3;
  rnd /= 3;
  std::printf("[c10] auc_top10 means: full=%.4f hard-ga=%.4f random=%.4f\n", full, hard, rnd);
  EXPECT_GT(full, rnd);
  EXPECT_GT(full, hard);
  EXPECT_LT(now_s() - t0, 3600.0) << "runtime budget";
}

// Criterion 11: metric implementations match brute-force recomputation;
// novelty threshold is strict at 0.4.
TEST(Acceptance, Criterion11_MetricsCorrectness) {
  std::mt19937_64 rng(1111);
  std::uniform_real_distribution<double> u(0., 1.);
  for (int trial = 0; trial < 30; ++trial) {
    int n = std::uniform_int_distribution<int>(1, 500)(rng);
    int k = std::uniform_int_distribution<int>(1, 20)(rng);
    long budget = n + std::uniform_int_distribution<int>(0, 100)(rng);
    std::vector<double> ys;
    for (int i = 0; i < n; ++i) ys.push_back(u(rng));
    double area = 0, last = 0;
    for (int t = 1; t <= n; ++t) {
      std::vector<double> prefix(ys.begin(), ys.begin() + t);
      std::sort(prefix.rbegin(), prefix.rend());
      int kk = std::min(k, t);
      double mean = std::accumulate(prefix.begin(), prefix.begin() + kk, 0.0) / kk;
      area += mean;
      last = mean;
    }
    area += last * (budget - n);
    ASSERT_DOUBLE_EQ(auc_topk(ys, k, budget), area / budget);
  }

  std::vector<Fingerprint> gen, train;
  for (int i = 0; i < 60; ++i) gen.push_back(morgan_fingerprint(random_molecule(rng)));
  for (int i = 0; i < 80; ++i) train.push_back(morgan_fingerprint(random_molecule(rng)));
  double pair_sum = 0;
  for (size_t i = 0; i < gen.size(); ++i)
    for (size_t j = i + 1; j < gen.size(); ++j) pair_sum += tanimoto(gen[i], gen[j]);
  double brute_div = 1.0 - pair_sum / (gen.size() * (gen.size() - 1) / 2.0);
  ASSERT_DOUBLE_EQ(diversity(gen), brute_div);

  int brute_novel = 0;
  for (const Fingerprint& g : gen) {
    double mx = 0;
    for (const Fingerprint& t : train) mx = std::max(mx, tanimoto(g, t));
    if (mx < 0.4) ++brute_novel;
  }
  ASSERT_DOUBLE_EQ(novelty(gen, train), static_cast<double>(brute_novel) / gen.size());

  // boundary: similarity exactly 0.4 is NOT novel
  Fingerprint a, b;
  a.bits.set(0);
  a.bits.set(1);
  b.bits.set(0);
  b.bits.set(1);
  a.bits.set(10);
  b.bits.set(20);
  b.bits.set(21);
  ASSERT_DOUBLE_EQ(tanimoto(a, b), 0.4);
  EXPECT_DOUBLE_EQ(novelty({a}, {b}), 0.0);
}

// Criterion 12: identical config and seed give byte-identical history CSVs.
TEST(Acceptance, Criterion12_Determinism) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "frag_acceptance_det";
  fs::create_directories(dir);
  RunOutcome a = do_run(42, RunVariant::Full, std::nullopt);
  RunOutcome b = do_run(42, RunVariant::Full, std::nullopt);
  write_history_csv((dir / "a.csv").string(), a.history);
  write_history_csv((dir / "b.csv").string(), b.history);
  std::ifstream fa(dir / "a.csv", std::ios::binary), fb(dir / "b.csv", std::ios::binary);
  std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  ASSERT_FALSE(ca.empty());
  EXPECT_EQ(ca, cb);
  fs::remove_all(dir);
}

// Criterion 13: at fixed seed and budget, top-100 diversity is non-decreasing
// as the similarity filter tightens over {unset, 0.8, 0.6, 0.4}.
TEST(Acceptance, Criterion13_DeltaTradeoff) {
  double d_none = do_run(1, RunVariant::Full, std::nullopt).diversity_top100;
  double d_08 = do_run(1, RunVariant::Full, 0.8).diversity_top100;
  double d_06 = do_run(1, RunVariant::Full, 0.6).diversity_top100;
  double d_04 = do_run(1, RunVariant::Full, 0.4).diversity_top100;
  std::printf("[c13] diversity_top100: unset=%.4f d0.8=%.4f d0.6=%.4f d0.4=%.4f\n", d_none, d_08,
              d_06, d_04);
  EXPECT_LE(d_none, d_08);
  EXPECT_LE(d_08, d_06);
  EXPECT_LE(d_06, d_04);
}
