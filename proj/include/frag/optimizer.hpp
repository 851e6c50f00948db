#pragma once

#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "frag/errors.hpp"
#include "frag/genetic.hpp"
#include "frag/lm.hpp"
#include "frag/oracles.hpp"
#include "frag/retrieval.hpp"
#include "frag/vocab.hpp"

namespace frag {

// Which parts of the pipeline are active: the full method, the soft-retrieval
// ablation (hard prompts + GA, no injection), or unconditional backbone
// sampling.
enum class RunVariant : uint8_t { Full, HardGa, Random };

inline const char* variant_name(RunVariant v) {
  switch (v) {
    case RunVariant::Full: return "full";
    case RunVariant::HardGa: return "hard-ga";
    case RunVariant::Random: return "random";
  }
  return "?";
}

inline RunVariant variant_from_name(const std::string& s) {
  if (s == "full") return RunVariant::Full;
  if (s == "hard-ga") return RunVariant::HardGa;
  if (s == "random") return RunVariant::Random;
  throw ConfigError("unknown run variant '" + s + "'");
}

struct RunConfig {
  // vocabulary
  int n_frag = 50;
  std::optional<double> delta;
  int frag_min_atoms = 1;
  int frag_max_atoms = 100;
  // population / GA
  int n_mol = 50;
  double mutation_rate = 0.1;
  int crossover_retries = 20;
  // loop
  long g_total = 10000;
  int g_lm_per_cycle = 10;
  int g_ga_per_cycle = 10;
  int k_soft = 10;
  // generated-molecule size confinement
  int mol_min_atoms = 1;
  int mol_max_atoms = 100;
  SamplingConfig sampling;
  uint64_t seed = 0;
  RunVariant variant = RunVariant::Full;
  // Cycles with zero accepted molecules before the run is flagged stalled.
  int stall_cycle_limit = 200;

  void validate() const {
    if (n_frag < 1 || n_mol < 1 || g_total < 0 || g_lm_per_cycle < 0 || g_ga_per_cycle < 0 ||
        k_soft < 1 || frag_min_atoms < 1 || mol_min_atoms < 1)
      throw ConfigError("non-positive run parameter");
    if (g_lm_per_cycle + g_ga_per_cycle == 0) throw ConfigError("empty cycle");
    if (frag_min_atoms > frag_max_atoms || mol_min_atoms > mol_max_atoms)
      throw ConfigError("empty atom-count window");
    if (mutation_rate < 0.0 || mutation_rate > 1.0) throw ConfigError("bad mutation rate");
    if (delta && (*delta <= 0.0 || *delta > 1.0)) throw ConfigError("delta outside (0,1]");
  }
};

struct HistoryRecord {
  long call = 0;  // 1-based oracle call index
  std::string key;
  std::string smiles;
  double y = 0.0;
};

struct RunState {
  std::unordered_map<std::string, double> generated;  // the set M
  Population population;
  FragmentVocabulary vocab;
  long oracle_calls_used = 0;
  long budget = 0;
  std::mt19937_64 rng;
  std::vector<HistoryRecord> history;
  bool stalled = false;
  bool interrupted = false;
  // attempt accounting
  long lm_attempts = 0, lm_accepted = 0, lm_duplicates = 0, lm_size_rejected = 0,
       lm_invalid = 0;
  long ga_attempts = 0, ga_accepted = 0, ga_duplicates = 0, ga_size_rejected = 0,
       ga_invalid = 0;
};

// Alternating cycles of LM generations and GA generations over a shared
// molecule set, population, and vocabulary, stopping at the oracle budget.
class OptimizationRun {
 public:
  OptimizationRun(RunConfig cfg, const BackboneLM* lm, const InjectionModule* inj, Oracle oracle)
      : cfg_(cfg), lm_(lm), inj_(inj), oracle_(std::move(oracle)) {
    cfg_.validate();
    if (!oracle_.valid()) throw ConfigError("no oracle");
    state_.budget = cfg_.g_total;
    state_.rng.seed(cfg_.seed);
    state_.population = Population(cfg_.n_mol);
  }

  void initialize(const std::vector<std::pair<MolGraph, double>>& dataset) {
    if (cfg_.variant != RunVariant::Random) {
      VocabConfig vc{.n_frag = cfg_.n_frag,
                     .filter_delta = cfg_.delta,
                     .frag_min_atoms = cfg_.frag_min_atoms,
                     .frag_max_atoms = cfg_.frag_max_atoms};
      state_.vocab = FragmentVocabulary::build_initial(dataset, vc, state_.rng);
    }
    initialized_ = true;
  }

  // One LM generation attempt (with sampling retries). Returns true when a
  // new molecule consumed budget; failures and duplicates are free no-ops.
  bool step_lm() {
    require_budget();
    ++state_.lm_attempts;
    std::optional<GenerationResult> result;
    if (cfg_.variant == RunVariant::Random) {
      for (int r = 0; r < cfg_.sampling.max_retries && !result; ++r)
        result = sample_unconditional(*lm_, cfg_.sampling, state_.rng);
    } else {
      GenerationTask task = sample_hard(state_.vocab, state_.rng);
      std::vector<Fragment> soft;
      const InjectionModule* inj = nullptr;
      if (cfg_.variant == RunVariant::Full && inj_) {
        soft = sample_soft(task, state_.vocab, cfg_.k_soft, state_.rng);
        inj = inj_;
      }
      for (int r = 0; r < cfg_.sampling.max_retries && !result; ++r)
        result = generate_once(*lm_, inj, task.hard_input, soft, cfg_.sampling, state_.rng);
    }
    if (!result) {
      ++state_.lm_invalid;
      return false;
    }
    return accept(std::move(result->mol), &state_.lm_accepted, &state_.lm_duplicates,
                  &state_.lm_size_rejected);
  }

  bool step_ga() {
    require_budget();
    if (state_.population.size() < 2) return false;  // first cycles skip the GA
    ++state_.ga_attempts;
    GaConfig gc{.mutation_rate = cfg_.mutation_rate, .crossover_retries = cfg_.crossover_retries};
    std::optional<MolGraph> child = make_offspring(state_.population, state_.rng, gc);
    if (!child) {
      ++state_.ga_invalid;
      return false;
    }
    return accept(std::move(*child), &state_.ga_accepted, &state_.ga_duplicates,
                  &state_.ga_size_rejected);
  }

  // Full loop; `interrupt` may be polled from a signal handler.
  void run(const volatile bool* interrupt = nullptr) {
    if (!initialized_) throw ConfigError("run() before initialize()");
    int stall_cycles = 0;
    while (state_.oracle_calls_used < state_.budget) {
      if (interrupt && *interrupt) {
        state_.interrupted = true;
        return;
      }
      long used_before = state_.oracle_calls_used;
      for (int i = 0; i < cfg_.g_lm_per_cycle && state_.oracle_calls_used < state_.budget; ++i)
        step_lm();
      if (cfg_.variant != RunVariant::Random)
        for (int i = 0; i < cfg_.g_ga_per_cycle && state_.oracle_calls_used < state_.budget; ++i)
          step_ga();
      if (state_.oracle_calls_used == used_before) {
        if (++stall_cycles >= cfg_.stall_cycle_limit) {
          state_.stalled = true;
          return;
        }
      } else {
        stall_cycles = 0;
      }
    }
  }

  const RunConfig& config() const { return cfg_; }
  RunState& state() { return state_; }
  const RunState& state() const { return state_; }
  const Oracle& oracle() const { return oracle_; }

 private:
  void require_budget() const {
    if (state_.oracle_calls_used >= state_.budget)
      throw BudgetExhausted(std::to_string(state_.budget) + " oracle calls spent");
  }

  // Size gate and dedup both happen before the oracle call and are free.
  bool accept(MolGraph mol, long* accepted, long* duplicates, long* size_rejected) {
    if (mol.atom_count() < cfg_.mol_min_atoms || mol.atom_count() > cfg_.mol_max_atoms) {
      ++*size_rejected;
      return false;
    }
    std::string key = canonical_key(mol);
    if (state_.generated.count(key)) {
      ++*duplicates;
      return false;
    }
    double y = oracle_.evaluate(mol);
    ++state_.oracle_calls_used;
    state_.generated.emplace(key, y);
    state_.history.push_back(
        {state_.oracle_calls_used, key, write_smiles(mol), y});
    if (cfg_.variant != RunVariant::Random) {
      state_.vocab.update_with_molecule(mol, y, state_.rng);
      state_.population.insert(std::move(mol), y, std::move(key));
    }
    ++*accepted;
    return true;
  }

  RunConfig cfg_;
  const BackboneLM* lm_;
  const InjectionModule* inj_;
  Oracle oracle_;
  RunState state_;
  bool initialized_ = false;
};

// History CSV: one row per oracle call, deterministic formatting.
inline void write_history_csv(const std::string& path, const std::vector<HistoryRecord>& history) {
  std::ofstream os(path);
  if (!os) throw IOError("cannot write " + path);
  os << "call,smiles,y\n";
  char buf[64];
  for (const HistoryRecord& h : history) {
    std::snprintf(buf, sizeof(buf), "%.17g", h.y);
    os << h.call << "," << h.smiles << "," << buf << "\n";
  }
}

}  // namespace frag
