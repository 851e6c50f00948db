#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "frag/errors.hpp"
#include "frag/fragment.hpp"
#include "frag/vocab.hpp"

namespace frag {

enum class TaskMode : uint8_t { LinkerDesign, MotifExtension };

inline const char* mode_name(TaskMode m) {
  return m == TaskMode::LinkerDesign ? "linker_design" : "motif_extension";
}

// One generation task: the hard fragments fixed into the prompt, plus the
// kind of fragment the model is asked to produce.
struct GenerationTask {
  TaskMode mode = TaskMode::LinkerDesign;
  std::vector<Fragment> hard;   // 2 arms (linker design) or 1 combined arm (motif extension)
  std::string hard_input;       // prompt form: blocks with open %labels, trailing '.'
  FragmentKind expected_kind = FragmentKind::Linker;
};

namespace detail {

inline const FragmentRecord* uniform_draw(const std::vector<const FragmentRecord*>& pool,
                                          std::mt19937_64& rng) {
  return pool[std::uniform_int_distribution<size_t>(0, pool.size() - 1)(rng)];
}

}  // namespace detail

// Fair coin between the two task modes; hard fragments drawn uniformly (with
// replacement) from the pools. Motif extension pre-joins arm and linker.
inline GenerationTask sample_hard(const FragmentVocabulary& v, std::mt19937_64& rng) {
  std::vector<const FragmentRecord*> arms = v.pool(FragmentKind::Arm);
  std::vector<const FragmentRecord*> linkers = v.pool(FragmentKind::Linker);
  if (arms.empty()) throw EmptyPool("arm pool");
  if (linkers.empty()) throw EmptyPool("linker pool");
  GenerationTask task;
  bool linker_design = std::uniform_int_distribution<int>(0, 1)(rng) == 0;
  if (linker_design) {
    task.mode = TaskMode::LinkerDesign;
    task.expected_kind = FragmentKind::Linker;
    task.hard.push_back(detail::uniform_draw(arms, rng)->fragment);
    task.hard.push_back(detail::uniform_draw(arms, rng)->fragment);
  } else {
    task.mode = TaskMode::MotifExtension;
    task.expected_kind = FragmentKind::Arm;
    const Fragment& arm = detail::uniform_draw(arms, rng)->fragment;
    const Fragment& linker = detail::uniform_draw(linkers, rng)->fragment;
    task.hard.push_back(combine_arm_linker(arm, linker, rng));
  }
  task.hard_input = safe_prefix(task.hard);
  return task;
}

// K soft fragments of the complementary kind: linkers for linker design,
// arms for motif extension. Distinct draws when the pool allows, with
// replacement otherwise.
inline std::vector<Fragment> sample_soft(const GenerationTask& task, const FragmentVocabulary& v,
                                         int k, std::mt19937_64& rng) {
  if (k < 1) throw ConfigError("k_soft must be >= 1");
  FragmentKind kind =
      task.mode == TaskMode::LinkerDesign ? FragmentKind::Linker : FragmentKind::Arm;
  std::vector<const FragmentRecord*> pool = v.pool(kind);
  if (pool.empty()) throw EmptyPool(std::string("no ") + kind_name(kind) + "s for soft retrieval");
  std::vector<Fragment> out;
  out.reserve(k);
  if (static_cast<int>(pool.size()) >= k) {
    std::vector<size_t> idx(pool.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int j = 0; j < k; ++j) {  // partial Fisher-Yates
      size_t pick = std::uniform_int_distribution<size_t>(j, idx.size() - 1)(rng);
      std::swap(idx[j], idx[pick]);
      out.push_back(pool[idx[j]]->fragment);
    }
  } else {
    for (int j = 0; j < k; ++j) out.push_back(detail::uniform_draw(pool, rng)->fragment);
  }
  return out;
}

// Precomputed fingerprints/keys for repeated neighbor lookups over a fixed pool.
struct FragmentIndex {
  std::vector<Fragment> items;
  std::vector<Fingerprint> fps;
  std::vector<std::string> keys;

  static FragmentIndex build(std::vector<Fragment> fragments) {
    FragmentIndex idx;
    idx.items = std::move(fragments);
    idx.fps.reserve(idx.items.size());
    idx.keys.reserve(idx.items.size());
    for (const Fragment& f : idx.items) {
      idx.fps.push_back(fragment_fingerprint(f));
      idx.keys.push_back(fragment_key(f));
    }
    return idx;
  }

  size_t size() const { return items.size(); }
};

// Top-k pool entries by Tanimoto to the query, descending, ties broken by
// canonical key. One pool instance matching the query's key is excluded so a
// query drawn from the pool never retrieves itself.
inline std::vector<int> knn_indices(const Fingerprint& query_fp, const std::string& query_key,
                                    const FragmentIndex& pool, int k) {
  if (k < 1) throw ConfigError("k must be >= 1");
  std::vector<int> order;
  order.reserve(pool.size());
  int excluded = -1;
  for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
    if (excluded < 0 && pool.keys[i] == query_key) {
      excluded = i;
      continue;
    }
    order.push_back(i);
  }
  if (static_cast<int>(order.size()) < k)
    throw PoolTooSmall("need " + std::to_string(k) + " neighbors, have " +
                       std::to_string(order.size()));
  std::vector<double> sims(pool.size(), 0.0);
  for (int i : order) sims[i] = tanimoto(query_fp, pool.fps[i]);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return pool.keys[a] < pool.keys[b];
  });
  order.resize(k);
  return order;
}

inline std::vector<Fragment> knn_fragments(const Fragment& query, const std::vector<Fragment>& pool,
                                           int k) {
  FragmentIndex idx = FragmentIndex::build(pool);
  std::vector<int> top = knn_indices(fragment_fingerprint(query), fragment_key(query), idx, k);
  std::vector<Fragment> out;
  out.reserve(top.size());
  for (int i : top) out.push_back(idx.items[i]);
  return out;
}

}  // namespace frag
