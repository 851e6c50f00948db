#pragma once

#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "frag/errors.hpp"
#include "frag/oracles.hpp"
#include "frag/optimizer.hpp"
#include "frag/smiles.hpp"

namespace frag {

// ---------------------------------------------------------------------------
// Declarative key-value config: [section] headers, key = value lines, '#'
// comments. Values: "strings", numbers, booleans, single-line inline tables
// { k = v, ... } and arrays [ v, ... ].
// ---------------------------------------------------------------------------

struct ConfigValue {
  enum class Kind { Str, Num, Bool, Table, Array } kind = Kind::Str;
  std::string str;
  double num = 0.0;
  bool boolean = false;
  std::vector<std::pair<std::string, ConfigValue>> table;
  std::vector<ConfigValue> array;
};

using ConfigSection = std::vector<std::pair<std::string, ConfigValue>>;

struct ConfigDoc {
  std::vector<std::pair<std::string, ConfigSection>> sections;

  const ConfigSection* find(const std::string& name) const {
    for (const auto& [n, s] : sections)
      if (n == name) return &s;
    return nullptr;
  }
};

namespace detail_cfg {

inline void skip_ws(const std::string& s, size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

inline std::string parse_key(const std::string& s, size_t& i, int line) {
  skip_ws(s, i);
  size_t start = i;
  while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_' ||
                          s[i] == '-'))
    ++i;
  if (i == start) throw ConfigError("line " + std::to_string(line) + ": expected key");
  return s.substr(start, i - start);
}

inline ConfigValue parse_value(const std::string& s, size_t& i, int line);

inline ConfigValue parse_table(const std::string& s, size_t& i, int line) {
  ConfigValue v;
  v.kind = ConfigValue::Kind::Table;
  ++i;  // '{'
  skip_ws(s, i);
  if (i < s.size() && s[i] == '}') {
    ++i;
    return v;
  }
  while (true) {
    std::string key = parse_key(s, i, line);
    skip_ws(s, i);
    if (i >= s.size() || s[i] != '=')
      throw ConfigError("line " + std::to_string(line) + ": expected '=' in table");
    ++i;
    v.table.emplace_back(key, parse_value(s, i, line));
    skip_ws(s, i);
    if (i < s.size() && s[i] == ',') {
      ++i;
      continue;
    }
    if (i < s.size() && s[i] == '}') {
      ++i;
      return v;
    }
    throw ConfigError("line " + std::to_string(line) + ": expected ',' or '}'");
  }
}

inline ConfigValue parse_value(const std::string& s, size_t& i, int line) {
  skip_ws(s, i);
  if (i >= s.size()) throw ConfigError("line " + std::to_string(line) + ": missing value");
  ConfigValue v;
  char c = s[i];
  if (c == '"') {
    v.kind = ConfigValue::Kind::Str;
    ++i;
    while (i < s.size() && s[i] != '"') v.str += s[i++];
    if (i >= s.size()) throw ConfigError("line " + std::to_string(line) + ": unterminated string");
    ++i;
    return v;
  }
  if (c == '{') return parse_table(s, i, line);
  if (c == '[') {
    v.kind = ConfigValue::Kind::Array;
    ++i;
    skip_ws(s, i);
    if (i < s.size() && s[i] == ']') {
      ++i;
      return v;
    }
    while (true) {
      v.array.push_back(parse_value(s, i, line));
      skip_ws(s, i);
      if (i < s.size() && s[i] == ',') {
        ++i;
        continue;
      }
      if (i < s.size() && s[i] == ']') {
        ++i;
        return v;
      }
      throw ConfigError("line " + std::to_string(line) + ": expected ',' or ']'");
    }
  }
  if (s.compare(i, 4, "true") == 0) {
    v.kind = ConfigValue::Kind::Bool;
    v.boolean = true;
    i += 4;
    return v;
  }
  if (s.compare(i, 5, "false") == 0) {
    v.kind = ConfigValue::Kind::Bool;
    v.boolean = false;
    i += 5;
    return v;
  }
  size_t start = i;
  while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' ||
                          s[i] == '-' || s[i] == '+' || s[i] == 'e' || s[i] == 'E'))
    ++i;
  if (i == start) throw ConfigError("line " + std::to_string(line) + ": bad value");
  try {
    size_t used = 0;
    std::string text = s.substr(start, i - start);
    v.num = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": bad number");
  }
  v.kind = ConfigValue::Kind::Num;
  return v;
}

}  // namespace detail_cfg

inline ConfigDoc parse_config_text(const std::string& text) {
  ConfigDoc doc;
  ConfigSection* current = nullptr;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    size_t hash = std::string::npos;
    bool in_str = false;
    for (size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"') in_str = !in_str;
      if (raw[i] == '#' && !in_str) {
        hash = i;
        break;
      }
    }
    std::string s = hash == std::string::npos ? raw : raw.substr(0, hash);
    size_t i = 0;
    detail_cfg::skip_ws(s, i);
    if (i >= s.size() || s[i] == '\r') continue;
    if (s[i] == '[') {
      size_t end = s.find(']', i);
      if (end == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": bad section");
      std::string name = s.substr(i + 1, end - i - 1);
      doc.sections.emplace_back(name, ConfigSection{});
      current = &doc.sections.back().second;
      continue;
    }
    if (!current) throw ConfigError("line " + std::to_string(line) + ": key outside any section");
    std::string key = detail_cfg::parse_key(s, i, line);
    detail_cfg::skip_ws(s, i);
    if (i >= s.size() || s[i] != '=')
      throw ConfigError("line " + std::to_string(line) + ": expected '='");
    ++i;
    ConfigValue v = detail_cfg::parse_value(s, i, line);
    detail_cfg::skip_ws(s, i);
    if (i < s.size() && s[i] != '\r')
      throw ConfigError("line " + std::to_string(line) + ": trailing characters");
    current->emplace_back(key, std::move(v));
  }
  return doc;
}

inline ConfigDoc load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IOError("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Oracle specification.
// ---------------------------------------------------------------------------

struct OracleSpec {
  std::string type;  // similarity | formula | size_window | product
  std::string target;
  std::string formula;
  int min_atoms = 0, max_atoms = 0;
  std::vector<OracleSpec> components;
};

inline OracleSpec oracle_spec_from_table(const std::vector<std::pair<std::string, ConfigValue>>& kv) {
  OracleSpec spec;
  for (const auto& [key, v] : kv) {
    if (key == "type" && v.kind == ConfigValue::Kind::Str) {
      spec.type = v.str;
    } else if (key == "target" && v.kind == ConfigValue::Kind::Str) {
      spec.target = v.str;
    } else if (key == "formula" && v.kind == ConfigValue::Kind::Str) {
      spec.formula = v.str;
    } else if (key == "min" && v.kind == ConfigValue::Kind::Num) {
      spec.min_atoms = static_cast<int>(v.num);
    } else if (key == "max" && v.kind == ConfigValue::Kind::Num) {
      spec.max_atoms = static_cast<int>(v.num);
    } else if (key == "components" && v.kind == ConfigValue::Kind::Array) {
      for (const ConfigValue& c : v.array) {
        if (c.kind != ConfigValue::Kind::Table)
          throw ConfigError("oracle components must be inline tables");
        spec.components.push_back(oracle_spec_from_table(c.table));
      }
    } else {
      throw ConfigError("unknown oracle key '" + key + "'");
    }
  }
  if (spec.type.empty()) throw ConfigError("oracle needs a type");
  if (spec.type != "similarity" && spec.type != "formula" && spec.type != "size_window" &&
      spec.type != "product")
    throw ConfigError("unknown oracle type '" + spec.type + "'");
  return spec;
}

inline Oracle build_oracle(const OracleSpec& spec) {
  if (spec.type == "similarity") {
    if (spec.target.empty()) throw ConfigError("similarity oracle needs target SMILES");
    return similarity_oracle(parse_smiles(spec.target));
  }
  if (spec.type == "formula") {
    if (spec.formula.empty()) throw ConfigError("formula oracle needs a formula");
    return formula_oracle(parse_formula(spec.formula));
  }
  if (spec.type == "size_window") return size_window_oracle(spec.min_atoms, spec.max_atoms);
  if (spec.type == "product") {
    std::vector<Oracle> parts;
    for (const OracleSpec& c : spec.components) parts.push_back(build_oracle(c));
    return product_oracle(std::move(parts));
  }
  throw ConfigError("unknown oracle type '" + spec.type + "'");
}

// ---------------------------------------------------------------------------
// Application config: every file key is mirrored by a CLI flag (flag wins).
// Unknown keys are hard errors.
// ---------------------------------------------------------------------------

struct AppConfig {
  // [data]
  std::string corpus_path;
  // [vocab]
  int n_frag = 50;
  std::optional<double> delta;
  int frag_min_atoms = 1;
  int frag_max_atoms = 100;
  // [lm]
  int d_model = 256;
  int n_layers = 6;
  int n_heads = 8;
  int context = 128;
  std::optional<int> epochs;     // per-command defaults apply when unset
  std::optional<double> lr;
  int batch_size = 16;
  int layer_l = 1;
  int k_soft = 10;
  std::string backbone_path;
  std::string injection_path;
  double temperature = 1.0;
  double top_p = 0.95;
  int top_k = 0;
  int max_new_tokens = 64;
  int max_retries = 10;
  // [ga]
  double mutation_rate = 0.1;
  int n_mol = 50;
  int crossover_retries = 20;
  // [run]
  long budget = 10000;
  int g_lm_per_cycle = 10;
  int g_ga_per_cycle = 10;
  uint64_t seed = 0;
  std::string variant = "full";
  int mol_min_atoms = 1;
  int mol_max_atoms = 100;
  int stall_cycle_limit = 200;
  // [oracle]
  std::optional<OracleSpec> oracle;
};

namespace detail_cfg {

inline double num_of(const ConfigValue& v, const std::string& key) {
  if (v.kind != ConfigValue::Kind::Num) throw ConfigError("key '" + key + "' must be a number");
  return v.num;
}

inline std::string str_of(const ConfigValue& v, const std::string& key) {
  if (v.kind != ConfigValue::Kind::Str) throw ConfigError("key '" + key + "' must be a string");
  return v.str;
}

}  // namespace detail_cfg

inline AppConfig app_config_from_doc(const ConfigDoc& doc) {
  using detail_cfg::num_of;
  using detail_cfg::str_of;
  AppConfig a;
  for (const auto& [section, kv] : doc.sections) {
    if (section == "data") {
      for (const auto& [key, v] : kv) {
        if (key == "corpus") a.corpus_path = str_of(v, key);
        else throw ConfigError("unknown [data] key '" + key + "'");
      }
    } else if (section == "vocab") {
      for (const auto& [key, v] : kv) {
        if (key == "n_frag") a.n_frag = static_cast<int>(num_of(v, key));
        else if (key == "delta") a.delta = num_of(v, key);
        else if (key == "frag_min_atoms") a.frag_min_atoms = static_cast<int>(num_of(v, key));
        else if (key == "frag_max_atoms") a.frag_max_atoms = static_cast<int>(num_of(v, key));
        else throw ConfigError("unknown [vocab] key '" + key + "'");
      }
    } else if (section == "lm") {
      for (const auto& [key, v] : kv) {
        if (key == "d_model") a.d_model = static_cast<int>(num_of(v, key));
        else if (key == "n_layers") a.n_layers = static_cast<int>(num_of(v, key));
        else if (key == "n_heads") a.n_heads = static_cast<int>(num_of(v, key));
        else if (key == "context") a.context = static_cast<int>(num_of(v, key));
        else if (key == "epochs") a.epochs = static_cast<int>(num_of(v, key));
        else if (key == "lr") a.lr = num_of(v, key);
        else if (key == "batch_size") a.batch_size = static_cast<int>(num_of(v, key));
        else if (key == "layer_l") a.layer_l = static_cast<int>(num_of(v, key));
        else if (key == "k_soft") a.k_soft = static_cast<int>(num_of(v, key));
        else if (key == "backbone") a.backbone_path = str_of(v, key);
        else if (key == "injection") a.injection_path = str_of(v, key);
        else if (key == "temperature") a.temperature = num_of(v, key);
        else if (key == "top_p") a.top_p = num_of(v, key);
        else if (key == "top_k") a.top_k = static_cast<int>(num_of(v, key));
        else if (key == "max_new_tokens") a.max_new_tokens = static_cast<int>(num_of(v, key));
        else if (key == "max_retries") a.max_retries = static_cast<int>(num_of(v, key));
        else throw ConfigError("unknown [lm] key '" + key + "'");
      }
    } else if (section == "ga") {
      for (const auto& [key, v] : kv) {
        if (key == "mutation_rate") a.mutation_rate = num_of(v, key);
        else if (key == "n_mol") a.n_mol = static_cast<int>(num_of(v, key));
        else if (key == "crossover_retries") a.crossover_retries = static_cast<int>(num_of(v, key));
        else throw ConfigError("unknown [ga] key '" + key + "'");
      }
    } else if (section == "run") {
      for (const auto& [key, v] : kv) {
        if (key == "budget") a.budget = static_cast<long>(num_of(v, key));
        else if (key == "g_lm_per_cycle") a.g_lm_per_cycle = static_cast<int>(num_of(v, key));
        else if (key == "g_ga_per_cycle") a.g_ga_per_cycle = static_cast<int>(num_of(v, key));
        else if (key == "seed") a.seed = static_cast<uint64_t>(num_of(v, key));
        else if (key == "variant") a.variant = str_of(v, key);
        else if (key == "mol_min_atoms") a.mol_min_atoms = static_cast<int>(num_of(v, key));
        else if (key == "mol_max_atoms") a.mol_max_atoms = static_cast<int>(num_of(v, key));
        else if (key == "stall_cycle_limit") a.stall_cycle_limit = static_cast<int>(num_of(v, key));
        else throw ConfigError("unknown [run] key '" + key + "'");
      }
    } else if (section == "oracle") {
      // Either bare keys (type = "...", target = "...") or oracle = { ... }.
      std::vector<std::pair<std::string, ConfigValue>> flat;
      for (const auto& [key, v] : kv) {
        if (key == "oracle" && v.kind == ConfigValue::Kind::Table) {
          a.oracle = oracle_spec_from_table(v.table);
        } else {
          flat.emplace_back(key, v);
        }
      }
      if (!flat.empty()) {
        if (a.oracle) throw ConfigError("[oracle] mixes 'oracle = {...}' with bare keys");
        a.oracle = oracle_spec_from_table(flat);
      }
    } else {
      throw ConfigError("unknown section [" + section + "]");
    }
  }
  return a;
}

inline RunConfig to_run_config(const AppConfig& a) {
  RunConfig rc;
  rc.n_frag = a.n_frag;
  rc.delta = a.delta;
  rc.frag_min_atoms = a.frag_min_atoms;
  rc.frag_max_atoms = a.frag_max_atoms;
  rc.n_mol = a.n_mol;
  rc.mutation_rate = a.mutation_rate;
  rc.crossover_retries = a.crossover_retries;
  rc.g_total = a.budget;
  rc.g_lm_per_cycle = a.g_lm_per_cycle;
  rc.g_ga_per_cycle = a.g_ga_per_cycle;
  rc.k_soft = a.k_soft;
  rc.mol_min_atoms = a.mol_min_atoms;
  rc.mol_max_atoms = a.mol_max_atoms;
  rc.sampling = {.temperature = a.temperature,
                 .top_p = a.top_p,
                 .top_k = a.top_k,
                 .max_new_tokens = a.max_new_tokens,
                 .max_retries = a.max_retries};
  rc.seed = a.seed;
  rc.variant = variant_from_name(a.variant);
  rc.stall_cycle_limit = a.stall_cycle_limit;
  return rc;
}

}  // namespace frag
