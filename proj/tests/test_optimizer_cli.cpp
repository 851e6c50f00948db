#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "frag/checkpoint.hpp"
#include "frag/config.hpp"
#include "frag/corpus.hpp"
#include "frag/molgen.hpp"
#include "frag/optimizer.hpp"
#include "frag/report.hpp"
#include "frag/train.hpp"

using namespace frag;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path dir;
  Workspace(const std::string& name) {
    dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  fs::path file(const std::string& n) const { return dir / n; }
};

void write_corpus(const fs::path& path, int n, uint64_t seed,
                  const std::string& target_smiles = "CCOc1ccccc1") {
  std::mt19937_64 rng(seed);
  Oracle o = similarity_oracle(parse_smiles(target_smiles));
  std::ofstream os(path);
  os << "# synthetic corpus\n";
  for (int i = 0; i < n; ++i) {
    MolGraph m = random_molecule(rng, {.min_atoms = 8, .max_atoms = 14});
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", o.peek(m));
    os << write_smiles(m) << "\t" << buf << "\n";
  }
}

// A small trained stack shared by the optimizer tests.
struct Stack {
  BackboneLM lm;
  InjectionModule inj;
  std::vector<std::pair<MolGraph, double>> dataset;

  Stack() {
    std::mt19937_64 rng(1001);
    Oracle o = similarity_oracle(parse_smiles("CCOc1ccccc1"));
    std::vector<MolGraph> mols;
    for (int i = 0; i < 400; ++i) {
      MolGraph m = random_molecule(rng, {.min_atoms = 8, .max_atoms = 14});
      dataset.emplace_back(m, o.peek(m));
      mols.push_back(std::move(m));
    }
    std::vector<std::string> corpus = safe_training_corpus(mols, 1001);
    lm.init({.d_model = 48, .n_layers = 2, .n_heads = 4, .context = 96},
            TokenVocab::build(corpus), 1001);
    pretrain_backbone(lm, corpus, {.epochs = 10, .batch_size = 16, .lr = 1.5e-3, .seed = 1001});
    InjectionData data = build_injection_examples(lm, mols, 5, 1001);
    std::mt19937_64 irng(1001);
    inj.init(lm.cfg.d_model, lm.cfg.d_model, 1, irng);
    train_injection(lm, inj, data.examples, {.epochs = 2, .lr = 5e-4, .batch_size = 16,
                                             .seed = 1001});
  }
};

Stack& stack() {
  static Stack s;
  return s;
}

RunConfig small_run_config(long budget, uint64_t seed, RunVariant variant = RunVariant::Full) {
  RunConfig rc;
  rc.n_frag = 25;
  rc.n_mol = 25;
  rc.g_total = budget;
  rc.k_soft = 5;
  rc.mol_min_atoms = 4;
  rc.mol_max_atoms = 40;
  rc.frag_max_atoms = 20;
  rc.sampling.temperature = 0.9;
  rc.sampling.max_new_tokens = 48;
  rc.seed = seed;
  rc.variant = variant;
  return rc;
}

}  // namespace

TEST(RunConfigValidation, RejectsBadValues) {
  RunConfig rc;
  rc.n_frag = 0;
  EXPECT_THROW(rc.validate(), ConfigError);
  rc = RunConfig{};
  rc.delta = 1.5;
  EXPECT_THROW(rc.validate(), ConfigError);
  rc = RunConfig{};
  rc.mutation_rate = -0.1;
  EXPECT_THROW(rc.validate(), ConfigError);
  rc = RunConfig{};
  rc.g_lm_per_cycle = rc.g_ga_per_cycle = 0;
  EXPECT_THROW(rc.validate(), ConfigError);
}

TEST(RunDefaults, MatchStatedValues) {
  RunConfig rc;
  EXPECT_EQ(rc.g_lm_per_cycle, 10);
  EXPECT_EQ(rc.g_ga_per_cycle, 10);
  EXPECT_EQ(rc.n_frag, 50);
  EXPECT_EQ(rc.n_mol, 50);
  EXPECT_EQ(rc.k_soft, 10);
  EXPECT_DOUBLE_EQ(rc.mutation_rate, 0.1);
  EXPECT_EQ(rc.g_total, 10000);
  SamplingConfig s;
  EXPECT_DOUBLE_EQ(s.temperature, 1.0);
  EXPECT_DOUBLE_EQ(s.top_p, 0.95);
  EXPECT_EQ(s.max_new_tokens, 64);
  EXPECT_EQ(s.max_retries, 10);
}

TEST(OptimizationRun, ZeroBudgetReturnsImmediately) {
  Stack& s = stack();
  OptimizationRun run(small_run_config(0, 3), &s.lm, &s.inj,
                      similarity_oracle(parse_smiles("CCO")));
  run.initialize(s.dataset);
  run.run();
  EXPECT_EQ(run.state().oracle_calls_used, 0);
  EXPECT_TRUE(run.state().history.empty());
  EXPECT_TRUE(run.state().generated.empty());
  EXPECT_THROW(run.step_lm(), BudgetExhausted);
}

TEST(OptimizationRun, BudgetExactnessAndInvariants) {
  Stack& s = stack();
  Oracle oracle = similarity_oracle(parse_smiles("CCOc1ccccc1"));
  OptimizationRun run(small_run_config(60, 7), &s.lm, &s.inj, oracle);
  run.initialize(s.dataset);
  run.run();
  const RunState& st = run.state();
  ASSERT_FALSE(st.stalled);
  EXPECT_EQ(st.oracle_calls_used, 60);
  EXPECT_EQ(oracle.calls(), 60);
  ASSERT_EQ(st.history.size(), 60u);
  EXPECT_EQ(st.generated.size(), 60u);
  std::set<std::string> keys;
  for (size_t i = 0; i < st.history.size(); ++i) {
    EXPECT_EQ(st.history[i].call, static_cast<long>(i + 1));  // dense from 1
    EXPECT_TRUE(keys.insert(st.history[i].key).second);       // unique keys
    EXPECT_GE(st.history[i].y, 0.0);
    EXPECT_LE(st.history[i].y, 1.0);
  }
  EXPECT_LE(run.state().population.size(), 25);
  // every pool record's score matches Eq-style statistics (count >= 1)
  for (FragmentKind k : {FragmentKind::Arm, FragmentKind::Linker})
    for (const FragmentRecord* rec : st.vocab.pool(k)) {
      EXPECT_GE(rec->count, 1);
      EXPECT_GE(rec->score(), 0.0);
      EXPECT_LE(rec->score(), 1.0);
    }
}

TEST(OptimizationRun, ConstantOracleGivesConstantAuc) {
  Stack& s = stack();
  Oracle constant("const", [](const MolGraph&) { return 0.5; });
  OptimizationRun run(small_run_config(25, 11), &s.lm, &s.inj, constant);
  run.initialize(s.dataset);
  run.run();
  const RunState& st = run.state();
  ASSERT_GE(st.history.size(), 1u);
  std::vector<double> ys;
  for (const HistoryRecord& h : st.history) {
    EXPECT_DOUBLE_EQ(h.y, 0.5);
    ys.push_back(h.y);
  }
  EXPECT_DOUBLE_EQ(auc_topk(ys, 10, st.budget), 0.5);
}

TEST(OptimizationRun, DeterministicReplay) {
  Stack& s = stack();
  auto run_once = [&](uint64_t seed) {
    OptimizationRun run(small_run_config(40, seed), &s.lm, &s.inj,
                        similarity_oracle(parse_smiles("CCOc1ccccc1")));
    run.initialize(s.dataset);
    run.run();
    return run.state().history;
  };
  std::vector<HistoryRecord> a = run_once(99), b = run_once(99), c = run_once(100);
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].key, b[i].key);
    EXPECT_EQ(a[i].smiles, b[i].smiles);
    EXPECT_EQ(a[i].y, b[i].y);
  }
  bool differs = a.size() != c.size();
  for (size_t i = 0; !differs && i < std::min(a.size(), c.size()); ++i)
    differs = a[i].key != c[i].key;
  EXPECT_TRUE(differs);  // different seed explores differently
}

TEST(OptimizationRun, PopulationFloorMonotone) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0., 1.);
  Population pop(10);
  double last_floor = -1.0;
  for (int i = 0; i < 300; ++i) {
    MolGraph m = random_molecule(rng);
    pop.insert(m, u(rng), canonical_key(m));
    if (pop.size() == 10) {
      double floor = pop.min_y();
      if (last_floor >= 0) ASSERT_GE(floor, last_floor);
      last_floor = floor;
    }
  }
  ASSERT_GE(last_floor, 0.0);
}

TEST(OptimizationRun, ImpossibleSizeWindowStalls) {
  Stack& s = stack();
  RunConfig rc = small_run_config(10, 13);
  rc.mol_min_atoms = 95;  // nothing this large is generated
  rc.mol_max_atoms = 100;
  rc.stall_cycle_limit = 3;
  OptimizationRun run(rc, &s.lm, &s.inj, similarity_oracle(parse_smiles("CCO")));
  run.initialize(s.dataset);
  run.run();
  EXPECT_TRUE(run.state().stalled);
  EXPECT_EQ(run.state().oracle_calls_used, 0);
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

TEST(Config, ParsesSectionsAndValues) {
  std::string text = R"(
# comment
[data]
corpus = "corpus.tsv"

[vocab]
n_frag = 25
delta = 0.6  # trailing comment

[run]
budget = 2000
variant = "hard-ga"

[oracle]
oracle = { type = "product", components = [ { type = "similarity", target = "CCO" }, { type = "size_window", min = 5, max = 30 } ] }
)";
  AppConfig a = app_config_from_doc(parse_config_text(text));
  EXPECT_EQ(a.corpus_path, "corpus.tsv");
  EXPECT_EQ(a.n_frag, 25);
  ASSERT_TRUE(a.delta.has_value());
  EXPECT_DOUBLE_EQ(*a.delta, 0.6);
  EXPECT_EQ(a.budget, 2000);
  EXPECT_EQ(a.variant, "hard-ga");
  ASSERT_TRUE(a.oracle.has_value());
  EXPECT_EQ(a.oracle->type, "product");
  ASSERT_EQ(a.oracle->components.size(), 2u);
  EXPECT_EQ(a.oracle->components[0].type, "similarity");
  EXPECT_EQ(a.oracle->components[0].target, "CCO");
  EXPECT_EQ(a.oracle->components[1].max_atoms, 30);

  RunConfig rc = to_run_config(a);
  EXPECT_EQ(rc.variant, RunVariant::HardGa);
  EXPECT_EQ(rc.g_total, 2000);
  Oracle o = build_oracle(*a.oracle);
  EXPECT_DOUBLE_EQ(o.evaluate(parse_smiles("CCO")), 0.0);  // size window rejects 3 atoms
}

TEST(Config, BareOracleKeysAndErrors) {
  AppConfig a = app_config_from_doc(parse_config_text("[oracle]\ntype = \"similarity\"\ntarget = \"CCN\"\n"));
  ASSERT_TRUE(a.oracle);
  EXPECT_EQ(a.oracle->type, "similarity");

  EXPECT_THROW(parse_config_text("[x\n"), ConfigError);
  EXPECT_THROW(parse_config_text("key = 1\n"), ConfigError);                 // outside section
  EXPECT_THROW(app_config_from_doc(parse_config_text("[vocab]\nbogus = 1\n")), ConfigError);
  EXPECT_THROW(app_config_from_doc(parse_config_text("[nope]\nx = 1\n")), ConfigError);
  EXPECT_THROW(app_config_from_doc(parse_config_text("[oracle]\ntype = \"warp\"\n")), ConfigError);
  EXPECT_THROW(parse_config_text("[run]\nbudget = \n"), ConfigError);
}

// ---------------------------------------------------------------------------
// CLI (subprocess)
// ---------------------------------------------------------------------------

namespace {

int run_cli(const std::string& args, std::string* out = nullptr) {
  std::string cmd = std::string(FRAG_CLI_PATH) + " " + args;
  if (out) {
    fs::path tmp = fs::temp_directory_path() / "frag_cli_out.txt";
    cmd += " >" + tmp.string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    *out = slurp(tmp);
    fs::remove(tmp);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }
  cmd += " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

int count_data_lines(const fs::path& p) {
  std::ifstream is(p);
  std::string line;
  int n = 0;
  while (std::getline(is, line))
    if (!line.empty() && line[0] != '#') ++n;
  return n;
}

}  // namespace

TEST(Cli, DecomposeBehaviour) {
  Workspace ws("frag_cli_decompose");
  // empty input -> empty output, exit 0
  { std::ofstream(ws.file("empty.tsv")) << "# nothing\n"; }
  ASSERT_EQ(run_cli("decompose --input " + ws.file("empty.tsv").string() + " --output " +
                    ws.file("out0.tsv").string()),
            0);
  EXPECT_EQ(count_data_lines(ws.file("out0.tsv")), 0);

  // undecomposable molecules are counted, not emitted
  { std::ofstream(ws.file("ring.tsv")) << "C1CC1\t0.5\n"; }
  std::string log;
  ASSERT_EQ(run_cli("decompose --input " + ws.file("ring.tsv").string() + " --output " +
                        ws.file("out1.tsv").string(),
                    &log),
            0);
  EXPECT_EQ(count_data_lines(ws.file("out1.tsv")), 0);
  EXPECT_NE(log.find("1 undecomposable"), std::string::npos);

  write_corpus(ws.file("corpus.tsv"), 60, 5);
  std::string log2;
  ASSERT_EQ(run_cli("decompose --seed 3 --input " + ws.file("corpus.tsv").string() +
                        " --output " + ws.file("out2.tsv").string(),
                    &log2),
            0);
  int lines = count_data_lines(ws.file("out2.tsv"));
  EXPECT_EQ(lines % 3, 0);
  EXPECT_GT(lines, 0);
}

TEST(Cli, ErrorPathsAndExitCodes) {
  Workspace ws("frag_cli_errors");
  // missing input file -> exit 2, diagnostic names the path
  std::string log;
  EXPECT_EQ(run_cli("decompose --input " + ws.file("nope.tsv").string() + " --output " +
                        ws.file("x.tsv").string(),
                    &log),
            2);
  EXPECT_NE(log.find("nope.tsv"), std::string::npos);

  // unknown config key -> exit 1
  { std::ofstream(ws.file("bad.cfg")) << "[vocab]\nwhat = 3\n"; }
  EXPECT_EQ(run_cli("--config " + ws.file("bad.cfg").string() + " build-vocab --input x --output y"),
            1);

  // bad usage -> exit 1
  EXPECT_EQ(run_cli("no-such-command"), 1);

  // malformed corpus line -> exit 2
  { std::ofstream(ws.file("mal.tsv")) << "CCO no-tab-here\n"; }
  EXPECT_EQ(run_cli("build-vocab --input " + ws.file("mal.tsv").string() + " --output " +
                    ws.file("v.tsv").string()),
            2);

  // missing checkpoint path -> exit 2 naming the path
  write_corpus(ws.file("c.tsv"), 30, 7);
  std::string log2;
  { std::ofstream(ws.file("run.cfg")) << "[data]\ncorpus = \"" << ws.file("c.tsv").string()
                                      << "\"\n[lm]\nbackbone = \"" << ws.file("missing.frwt").string()
                                      << "\"\n[oracle]\ntype = \"similarity\"\ntarget = \"CCO\"\n"; }
  EXPECT_EQ(run_cli("--config " + ws.file("run.cfg").string() + " run --budget 5", &log2), 2);
  EXPECT_NE(log2.find("missing.frwt"), std::string::npos);
}

TEST(Cli, FullPipelineDeterminismAndEval) {
  Workspace ws("frag_cli_pipeline");
  write_corpus(ws.file("corpus.tsv"), 220, 11);

  // train a small stack through the CLI
  ASSERT_EQ(run_cli("--seed 5 pretrain-lm --input " + ws.file("corpus.tsv").string() +
                    " --output " + ws.file("backbone.frwt").string() +
                    " --epochs 8 --d-model 32 --n-layers 2 --n-heads 4 --context 96"),
            0);
  ASSERT_EQ(run_cli("--seed 5 train-injection --input " + ws.file("corpus.tsv").string() +
                    " --backbone " + ws.file("backbone.frwt").string() + " --output " +
                    ws.file("inject.frwt").string() + " --epochs 1 --k-soft 4"),
            0);

  std::string cfg = "[data]\ncorpus = \"" + ws.file("corpus.tsv").string() +
                    "\"\n[lm]\nbackbone = \"" + ws.file("backbone.frwt").string() +
                    "\"\ninjection = \"" + ws.file("inject.frwt").string() +
                    "\"\ntemperature = 0.9\nk_soft = 4\n[vocab]\nn_frag = 20\n"
                    "[run]\nmol_min_atoms = 4\nmol_max_atoms = 40\nstall_cycle_limit = 50\n"
                    "[oracle]\ntype = \"size_window\"\nmin = 1\nmax = 100\n";
  { std::ofstream(ws.file("run.cfg")) << cfg; }

  ASSERT_EQ(run_cli("--config " + ws.file("run.cfg").string() + " --seed 7 --out-dir " +
                    ws.file("run1").string() + " run --budget 25"),
            0);
  ASSERT_EQ(run_cli("--config " + ws.file("run.cfg").string() + " --seed 7 --out-dir " +
                    ws.file("run2").string() + " run --budget 25"),
            0);
  std::string h1 = slurp(ws.file("run1") / "history.csv");
  std::string h2 = slurp(ws.file("run2") / "history.csv");
  ASSERT_FALSE(h1.empty());
  EXPECT_EQ(h1, h2);  // byte-identical histories at fixed seed

  // constant-y oracle (size window spans everything) -> auc_top10 == 1.0
  ASSERT_EQ(run_cli("eval --manifest " + (ws.file("run1") / "manifest.json").string() +
                    " --output " + ws.file("metrics.csv").string()),
            0);
  std::string metrics = slurp(ws.file("metrics.csv"));
  ASSERT_NE(metrics.find("run_id,auc_top10,auc_top100,diversity_top100,novelty_top100"),
            std::string::npos);
  {
    std::istringstream is(metrics);
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    std::istringstream rs(row);
    std::string run_id, auc10;
    std::getline(rs, run_id, ',');
    std::getline(rs, auc10, ',');
    EXPECT_DOUBLE_EQ(std::stod(auc10), 1.0);
  }

  // eval idempotency
  ASSERT_EQ(run_cli("eval --manifest " + (ws.file("run1") / "manifest.json").string() +
                    " --output " + ws.file("metrics2.csv").string()),
            0);
  EXPECT_EQ(slurp(ws.file("metrics.csv")), slurp(ws.file("metrics2.csv")));

  // manifest dataset hash moves when the corpus changes
  std::string manifest_before = slurp(ws.file("run1") / "manifest.json");
  { std::ofstream(ws.file("corpus.tsv"), std::ios::app) << "CCO\t0.5\n"; }
  ASSERT_EQ(run_cli("--config " + ws.file("run.cfg").string() + " --seed 7 --out-dir " +
                    ws.file("run3").string() + " run --budget 25"),
            0);
  Json m1 = Json::parse(manifest_before);
  Json m3 = Json::parse(slurp(ws.file("run3") / "manifest.json"));
  EXPECT_NE(m1["dataset"]["hash"], m3["dataset"]["hash"]);
  EXPECT_NE(m1["run_id"], m3["run_id"]);

  // eval after the corpus changed underneath -> schema error (exit 2)
  EXPECT_EQ(run_cli("eval --manifest " + (ws.file("run1") / "manifest.json").string() +
                    " --output " + ws.file("m3.csv").string()),
            2);
}
