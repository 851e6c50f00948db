#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "frag/errors.hpp"
#include "frag/fingerprint.hpp"
#include "frag/fragment.hpp"

namespace frag {

struct FragmentRecord {
  Fragment fragment;
  std::string key;
  double score_sum = 0.0;
  int count = 0;
  Fingerprint fp;

  double score() const { return score_sum / count; }
};

struct VocabConfig {
  int n_frag = 50;
  std::optional<double> filter_delta;  // pairwise pool similarity stays < delta
  int frag_min_atoms = 1;
  int frag_max_atoms = std::numeric_limits<int>::max();
};

// Score-ordered arm and linker pools with running mean-property statistics.
// Statistics survive pool eviction, so a fragment re-entering via a later
// molecule carries its full history (the running mean over every scoring
// molecule seen so far).
class FragmentVocabulary {
 public:
  FragmentVocabulary() = default;
  explicit FragmentVocabulary(VocabConfig cfg) : cfg_(cfg) {}

  static FragmentVocabulary build_initial(const std::vector<std::pair<MolGraph, double>>& dataset,
                                          VocabConfig cfg, std::mt19937_64& rng) {
    if (dataset.empty()) throw EmptyVocabulary("empty dataset");
    FragmentVocabulary v(cfg);
    std::vector<std::pair<std::string, FragmentKind>> seen_order;
    for (const auto& [mol, y] : dataset) {
      auto sliced = slice_arm_linker_arm(mol, rng);
      if (!sliced) continue;
      v.merge_stats(*sliced, y, &seen_order);
    }
    // Greedy admission by descending score so the delta filter keeps the
    // strongest of any similar pair.
    std::vector<const FragmentRecord*> all;
    for (const auto& [key, rec] : v.stats_) all.push_back(&rec);
    std::sort(all.begin(), all.end(), [](const FragmentRecord* a, const FragmentRecord* b) {
      if (a->score() != b->score()) return a->score() > b->score();
      return a->key < b->key;
    });
    for (const FragmentRecord* rec : all) {
      std::vector<std::string>& pool = v.pool_of(rec->fragment.kind());
      if (static_cast<int>(pool.size()) >= cfg.n_frag) continue;
      if (!v.delta_admissible(*rec, pool)) continue;
      pool.push_back(rec->key);
    }
    v.sort_pool(FragmentKind::Arm);
    v.sort_pool(FragmentKind::Linker);
    if (v.arm_pool_.empty() || v.linker_pool_.empty())
      throw EmptyVocabulary("no fragments survived filtering");
    return v;
  }

  // One Eq.-style update: slice the molecule once, merge statistics by
  // canonical key, re-truncate both pools. Undecomposable molecules are
  // no-ops.
  void update_with_molecule(const MolGraph& m, double y, std::mt19937_64& rng) {
    auto sliced = slice_arm_linker_arm(m, rng);
    if (!sliced) return;
    std::vector<std::pair<std::string, FragmentKind>> incoming;
    merge_stats(*sliced, y, &incoming);
    for (const auto& [key, kind] : incoming) {
      std::vector<std::string>& pool = pool_of(kind);
      if (std::find(pool.begin(), pool.end(), key) != pool.end()) continue;
      auto it = stats_.find(key);
      if (it == stats_.end()) continue;  // size-filtered
      if (!delta_admissible(it->second, pool)) continue;
      pool.push_back(key);
    }
    truncate_pool(FragmentKind::Arm);
    truncate_pool(FragmentKind::Linker);
  }

  std::vector<const FragmentRecord*> pool(FragmentKind kind) const {
    const std::vector<std::string>& keys = kind == FragmentKind::Arm ? arm_pool_ : linker_pool_;
    std::vector<const FragmentRecord*> out;
    out.reserve(keys.size());
    for (const std::string& k : keys) out.push_back(&stats_.at(k));
    return out;
  }

  int pool_size(FragmentKind kind) const {
    return static_cast<int>((kind == FragmentKind::Arm ? arm_pool_ : linker_pool_).size());
  }

  double min_score(FragmentKind kind) const {
    std::vector<const FragmentRecord*> p = pool(kind);
    if (p.empty()) throw EmptyPool(std::string("no ") + kind_name(kind) + "s");
    return p.back()->score();  // pools are score-descending
  }

  const FragmentRecord* record(const std::string& key) const {
    auto it = stats_.find(key);
    return it == stats_.end() ? nullptr : &it->second;
  }

  const VocabConfig& config() const { return cfg_; }

  // Dump format: one pooled fragment per line,
  //   SAFE-with-[*] <TAB> kind <TAB> score <TAB> count
  void save(std::ostream& os) const {
    os << "# fragment\tkind\tscore\tcount\n";
    for (FragmentKind kind : {FragmentKind::Arm, FragmentKind::Linker}) {
      for (const FragmentRecord* rec : pool(kind)) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", rec->score());
        os << fragment_to_smiles(rec->fragment) << "\t" << kind_name(kind) << "\t" << buf
           << "\t" << rec->count << "\n";
      }
    }
  }

  void save_file(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IOError("cannot write " + path);
    save(os);
  }

  static FragmentVocabulary load(std::istream& is, VocabConfig cfg) {
    FragmentVocabulary v(cfg);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      size_t t1 = line.find('\t');
      size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
      size_t t3 = t2 == std::string::npos ? t2 : line.find('\t', t2 + 1);
      if (t3 == std::string::npos)
        throw ParseError("vocabulary line " + std::to_string(lineno) + ": need 4 fields");
      Fragment f = fragment_from_smiles(line.substr(0, t1));
      std::string kind_str = line.substr(t1 + 1, t2 - t1 - 1);
      double score = std::stod(line.substr(t2 + 1, t3 - t2 - 1));
      int count = std::stoi(line.substr(t3 + 1));
      if (kind_str != kind_name(f.kind()))
        throw ParseError("vocabulary line " + std::to_string(lineno) + ": kind mismatch");
      if (count <= 0)
        throw ParseError("vocabulary line " + std::to_string(lineno) + ": bad count");
      FragmentRecord rec;
      rec.fragment = f;
      rec.key = fragment_key(f);
      rec.fp = fragment_fingerprint(f);
      rec.count = count;
      rec.score_sum = score * count;
      std::string key = rec.key;
      FragmentKind kind = f.kind();
      if (stats_insert(v, std::move(rec)))
        v.pool_of(kind).push_back(key);
    }
    v.sort_pool(FragmentKind::Arm);
    v.sort_pool(FragmentKind::Linker);
    v.truncate_pool(FragmentKind::Arm);
    v.truncate_pool(FragmentKind::Linker);
    if (v.arm_pool_.empty() || v.linker_pool_.empty())
      throw EmptyVocabulary("vocabulary file has an empty pool");
    return v;
  }

  static FragmentVocabulary load_file(const std::string& path, VocabConfig cfg) {
    std::ifstream is(path);
    if (!is) throw IOError("cannot read " + path);
    return load(is, cfg);
  }

 private:
  static bool stats_insert(FragmentVocabulary& v, FragmentRecord rec) {
    return v.stats_.emplace(rec.key, std::move(rec)).second;
  }

  std::vector<std::string>& pool_of(FragmentKind kind) {
    return kind == FragmentKind::Arm ? arm_pool_ : linker_pool_;
  }

  bool size_ok(const Fragment& f) const {
    return f.atom_count() >= cfg_.frag_min_atoms && f.atom_count() <= cfg_.frag_max_atoms;
  }

  bool delta_admissible(const FragmentRecord& rec, const std::vector<std::string>& pool) const {
    if (!cfg_.filter_delta) return true;
    for (const std::string& k : pool)
      if (tanimoto(rec.fp, stats_.at(k).fp) >= *cfg_.filter_delta) return false;
    return true;
  }

  // Merge one molecule's slicing into the statistics. A fragment occurring
  // twice in the same slicing contributes the molecule's property once.
  void merge_stats(const ArmLinkerArm& sliced, double y,
                   std::vector<std::pair<std::string, FragmentKind>>* incoming) {
    std::vector<const Fragment*> frags{&sliced.arm1, &sliced.linker, &sliced.arm2};
    std::vector<std::string> molecule_keys;
    for (const Fragment* f : frags) {
      if (!size_ok(*f)) continue;
      std::string key = fragment_key(*f);
      if (std::find(molecule_keys.begin(), molecule_keys.end(), key) != molecule_keys.end())
        continue;
      molecule_keys.push_back(key);
      auto it = stats_.find(key);
      if (it == stats_.end()) {
        FragmentRecord rec;
        rec.fragment = *f;
        rec.key = key;
        rec.fp = fragment_fingerprint(*f);
        rec.score_sum = y;
        rec.count = 1;
        stats_.emplace(key, std::move(rec));
      } else {
        it->second.score_sum += y;
        it->second.count += 1;
      }
      if (incoming) incoming->emplace_back(key, f->kind());
    }
  }

  void sort_pool(FragmentKind kind) {
    std::vector<std::string>& pool = pool_of(kind);
    std::sort(pool.begin(), pool.end(), [&](const std::string& a, const std::string& b) {
      double sa = stats_.at(a).score(), sb = stats_.at(b).score();
      if (sa != sb) return sa > sb;
      return a < b;
    });
  }

  void truncate_pool(FragmentKind kind) {
    sort_pool(kind);
    std::vector<std::string>& pool = pool_of(kind);
    if (static_cast<int>(pool.size()) > cfg_.n_frag) pool.resize(cfg_.n_frag);
  }

  VocabConfig cfg_;
  std::unordered_map<std::string, FragmentRecord> stats_;
  std::vector<std::string> arm_pool_;
  std::vector<std::string> linker_pool_;
};

}  // namespace frag
