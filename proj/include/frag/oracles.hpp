#pragma once

#include <atomic>
#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "frag/errors.hpp"
#include "frag/fingerprint.hpp"
#include "frag/mol_graph.hpp"

namespace frag {

// Black-box property evaluator, y(x) in [0,1], with an exact call counter.
class Oracle {
 public:
  Oracle() = default;
  Oracle(std::string name, std::function<double(const MolGraph&)> fn)
      : name_(std::move(name)),
        fn_(std::move(fn)),
        calls_(std::make_shared<std::atomic<long>>(0)) {}

  // One budgeted call.
  double evaluate(const MolGraph& m) const {
    calls_->fetch_add(1, std::memory_order_relaxed);
    return peek(m);
  }

  // Same value, no budget accounting (internal composition).
  double peek(const MolGraph& m) const {
    double y = fn_(m);
    if (y < 0.0) y = 0.0;
    if (y > 1.0) y = 1.0;
    return y;
  }

  const std::string& name() const { return name_; }
  long calls() const { return calls_->load(std::memory_order_relaxed); }
  void reset_calls() const { calls_->store(0, std::memory_order_relaxed); }
  bool valid() const { return static_cast<bool>(fn_); }

 private:
  std::string name_;
  std::function<double(const MolGraph&)> fn_;
  std::shared_ptr<std::atomic<long>> calls_;
};

inline Oracle similarity_oracle(const MolGraph& target, std::string name = "similarity") {
  Fingerprint target_fp = morgan_fingerprint(target);
  return Oracle(std::move(name), [target_fp](const MolGraph& m) {
    return tanimoto(morgan_fingerprint(m), target_fp);
  });
}

// "C7H8N2O2" -> {C:7, H:8, N:2, O:2}; counts default to 1.
inline std::map<std::string, int> parse_formula(const std::string& text) {
  std::map<std::string, int> out;
  size_t i = 0;
  while (i < text.size()) {
    if (!std::isupper(static_cast<unsigned char>(text[i])))
      throw ConfigError("bad formula '" + text + "'");
    std::string sym(1, text[i]);
    ++i;
    if (i < text.size() && std::islower(static_cast<unsigned char>(text[i]))) {
      sym += text[i];
      ++i;
    }
    int count = 0;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      count = count * 10 + (text[i] - '0');
      ++i;
    }
    out[sym] += count == 0 ? 1 : count;
  }
  if (out.empty()) throw ConfigError("empty formula");
  return out;
}

inline std::map<std::string, int> molecular_formula(const MolGraph& m) {
  std::map<std::string, int> out;
  for (const Atom& a : m.atoms) {
    out[a.element] += 1;
    out["H"] += a.hydrogens;
  }
  if (out["H"] == 0) out.erase("H");
  return out;
}

// Exponential deviation kernel: exactly 1 iff the heavy-atom + hydrogen
// formula matches, strictly decreasing in total count deviation.
inline Oracle formula_oracle(const std::map<std::string, int>& target,
                             std::string name = "formula") {
  if (target.empty()) throw ConfigError("empty target formula");
  int target_total = 0;
  for (const auto& [e, c] : target) target_total += c;
  return Oracle(std::move(name), [target, target_total](const MolGraph& m) {
    std::map<std::string, int> have = molecular_formula(m);
    int deviation = 0;
    for (const auto& [e, c] : target) {
      auto it = have.find(e);
      deviation += std::abs((it == have.end() ? 0 : it->second) - c);
    }
    for (const auto& [e, c] : have)
      if (!target.count(e)) deviation += c;
    return std::exp(-static_cast<double>(deviation) / target_total);
  });
}

inline Oracle size_window_oracle(int min_atoms, int max_atoms, std::string name = "size_window") {
  if (min_atoms > max_atoms) throw ConfigError("size window is empty");
  return Oracle(std::move(name), [min_atoms, max_atoms](const MolGraph& m) {
    return m.atom_count() >= min_atoms && m.atom_count() <= max_atoms ? 1.0 : 0.0;
  });
}

// Product of component values; one budget call total (component counters are
// never touched).
inline Oracle product_oracle(std::vector<Oracle> components, std::string name = "product") {
  if (components.empty()) throw ConfigError("product oracle needs components");
  return Oracle(std::move(name), [components](const MolGraph& m) {
    double y = 1.0;
    for (const Oracle& c : components) y *= c.peek(m);
    return y;
  });
}

// Clamp to [lo, hi], then map affinely onto [0,1]; `invert` flips orientation
// (the docking-score / synthetic-accessibility normalization pattern).
inline double normalize_linear(double raw, double clamp_lo, double clamp_hi, bool invert) {
  if (!(clamp_lo < clamp_hi)) throw ConfigError("degenerate normalization bounds");
  double v = std::min(std::max(raw, clamp_lo), clamp_hi);
  double t = (v - clamp_lo) / (clamp_hi - clamp_lo);
  return invert ? 1.0 - t : t;
}

}  // namespace frag
