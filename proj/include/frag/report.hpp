#pragma once

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "frag/config.hpp"
#include "frag/corpus.hpp"
#include "frag/metrics.hpp"
#include "frag/optimizer.hpp"

namespace frag {

inline constexpr int kManifestSchemaVersion = 1;

using Json = nlohmann::ordered_json;

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline uint64_t fnv64(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline Json oracle_spec_json(const OracleSpec& spec) {
  Json j;
  j["type"] = spec.type;
  if (!spec.target.empty()) j["target"] = spec.target;
  if (!spec.formula.empty()) j["formula"] = spec.formula;
  if (spec.type == "size_window") {
    j["min"] = spec.min_atoms;
    j["max"] = spec.max_atoms;
  }
  if (!spec.components.empty()) {
    Json arr = Json::array();
    for (const OracleSpec& c : spec.components) arr.push_back(oracle_spec_json(c));
    j["components"] = arr;
  }
  return j;
}

inline Json config_json(const AppConfig& a) {
  Json j;
  j["data"] = {{"corpus", a.corpus_path}};
  Json vocab = {{"n_frag", a.n_frag},
                {"frag_min_atoms", a.frag_min_atoms},
                {"frag_max_atoms", a.frag_max_atoms}};
  if (a.delta) vocab["delta"] = *a.delta;
  j["vocab"] = vocab;
  j["lm"] = {{"d_model", a.d_model},
             {"n_layers", a.n_layers},
             {"n_heads", a.n_heads},
             {"context", a.context},
             {"layer_l", a.layer_l},
             {"k_soft", a.k_soft},
             {"backbone", a.backbone_path},
             {"injection", a.injection_path},
             {"temperature", a.temperature},
             {"top_p", a.top_p},
             {"top_k", a.top_k},
             {"max_new_tokens", a.max_new_tokens},
             {"max_retries", a.max_retries}};
  j["ga"] = {{"mutation_rate", a.mutation_rate},
             {"n_mol", a.n_mol},
             {"crossover_retries", a.crossover_retries}};
  j["run"] = {{"budget", a.budget},
              {"g_lm_per_cycle", a.g_lm_per_cycle},
              {"g_ga_per_cycle", a.g_ga_per_cycle},
              {"seed", a.seed},
              {"variant", a.variant},
              {"mol_min_atoms", a.mol_min_atoms},
              {"mol_max_atoms", a.mol_max_atoms},
              {"stall_cycle_limit", a.stall_cycle_limit}};
  if (a.oracle) j["oracle"] = oracle_spec_json(*a.oracle);
  return j;
}

struct DatasetInfo {
  std::string path;
  uint64_t hash = 0;
  long molecules = 0;
};

// Emits history.csv, vocab.tsv, and manifest.json into out_dir.
inline std::string write_run_outputs(const std::string& out_dir, const AppConfig& app,
                                     const RunState& state, const DatasetInfo& dataset,
                                     const std::string& oracle_name, bool complete) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  write_history_csv((fs::path(out_dir) / "history.csv").string(), state.history);
  bool have_vocab = state.vocab.pool_size(FragmentKind::Arm) > 0 ||
                    state.vocab.pool_size(FragmentKind::Linker) > 0;
  if (have_vocab) state.vocab.save_file((fs::path(out_dir) / "vocab.tsv").string());

  Json cfg = config_json(app);
  std::string run_id =
      hex64(fnv64(cfg.dump() + "|" + std::to_string(app.seed) + "|" + hex64(dataset.hash)));

  Json m;
  m["schema_version"] = kManifestSchemaVersion;
  m["run_id"] = run_id;
  m["seed"] = app.seed;
  m["complete"] = complete;
  m["stalled"] = state.stalled;
  m["budget"] = state.budget;
  m["oracle_calls_used"] = state.oracle_calls_used;
  m["dataset"] = {{"path", dataset.path}, {"hash", hex64(dataset.hash)},
                  {"molecules", dataset.molecules}};
  m["oracle"] = {{"name", oracle_name}};
  m["config"] = cfg;
  m["counters"] = {{"lm_attempts", state.lm_attempts},
                   {"lm_accepted", state.lm_accepted},
                   {"lm_duplicates", state.lm_duplicates},
                   {"lm_size_rejected", state.lm_size_rejected},
                   {"lm_invalid", state.lm_invalid},
                   {"ga_attempts", state.ga_attempts},
                   {"ga_accepted", state.ga_accepted},
                   {"ga_duplicates", state.ga_duplicates},
                   {"ga_size_rejected", state.ga_size_rejected},
                   {"ga_invalid", state.ga_invalid}};
  Json hist = Json::array();
  for (const HistoryRecord& h : state.history)
    hist.push_back({{"call", h.call}, {"key", h.key}, {"smiles", h.smiles}, {"y", h.y}});
  m["history"] = hist;
  Json files;
  files["history_csv"] = "history.csv";
  if (have_vocab) files["vocabulary"] = "vocab.tsv";
  m["files"] = files;

  std::ofstream os((fs::path(out_dir) / "manifest.json").string());
  if (!os) throw IOError("cannot write manifest in " + out_dir);
  os << m.dump(2) << "\n";
  return run_id;
}

struct ManifestData {
  std::string run_id;
  uint64_t seed = 0;
  long budget = 0;
  bool complete = false;
  std::vector<HistoryRecord> history;
  std::string dataset_path;
  std::string dataset_hash;
};

inline ManifestData load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IOError("cannot read manifest " + path);
  Json m;
  try {
    is >> m;
  } catch (const std::exception& e) {
    throw SchemaError("manifest " + path + ": " + e.what());
  }
  if (!m.contains("schema_version") || m["schema_version"].get<int>() != kManifestSchemaVersion)
    throw SchemaError("manifest schema version mismatch in " + path);
  ManifestData d;
  d.run_id = m.at("run_id").get<std::string>();
  d.seed = m.at("seed").get<uint64_t>();
  d.budget = m.at("budget").get<long>();
  d.complete = m.at("complete").get<bool>();
  d.dataset_path = m.at("dataset").at("path").get<std::string>();
  d.dataset_hash = m.at("dataset").at("hash").get<std::string>();
  for (const Json& h : m.at("history")) {
    d.history.push_back({h.at("call").get<long>(), h.at("key").get<std::string>(),
                         h.at("smiles").get<std::string>(), h.at("y").get<double>()});
  }
  return d;
}

struct EvalResult {
  std::string run_id;
  double auc_top10 = 0.0;
  double auc_top100 = 0.0;
  double diversity_top100 = 0.0;
  double novelty_top100 = 0.0;
};

inline std::vector<const HistoryRecord*> top_n_records(const std::vector<HistoryRecord>& history,
                                                       int n) {
  std::vector<const HistoryRecord*> all;
  for (const HistoryRecord& h : history) all.push_back(&h);
  std::sort(all.begin(), all.end(), [](const HistoryRecord* a, const HistoryRecord* b) {
    if (a->y != b->y) return a->y > b->y;
    return a->key < b->key;
  });
  if (static_cast<int>(all.size()) > n) all.resize(n);
  return all;
}

inline EvalResult evaluate_manifest(const ManifestData& manifest,
                                    const std::vector<Fingerprint>& train_fps) {
  if (manifest.history.empty()) throw EmptyHistory("manifest has no oracle calls");
  EvalResult r;
  r.run_id = manifest.run_id;
  std::vector<double> ys;
  for (const HistoryRecord& h : manifest.history) ys.push_back(h.y);
  long budget = std::max<long>(manifest.budget, static_cast<long>(ys.size()));
  r.auc_top10 = auc_topk(ys, 10, budget);
  r.auc_top100 = auc_topk(ys, 100, budget);

  std::vector<Fingerprint> top_fps;
  for (const HistoryRecord* h : top_n_records(manifest.history, 100))
    top_fps.push_back(morgan_fingerprint(parse_smiles(h->smiles)));
  r.diversity_top100 = top_fps.size() >= 2 ? diversity(top_fps) : 0.0;
  r.novelty_top100 = novelty(top_fps, train_fps);
  return r;
}

inline void write_metrics_csv(const std::string& path, const std::vector<EvalResult>& rows) {
  std::ofstream os(path);
  if (!os) throw IOError("cannot write " + path);
  os << "run_id,auc_top10,auc_top100,diversity_top100,novelty_top100\n";
  char buf[256];
  for (const EvalResult& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g", r.run_id.c_str(), r.auc_top10,
                  r.auc_top100, r.diversity_top100, r.novelty_top100);
    os << buf << "\n";
  }
}

}  // namespace frag
