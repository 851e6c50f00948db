#pragma once

#include <algorithm>
#include <queue>
#include <vector>

#include "frag/errors.hpp"
#include "frag/fingerprint.hpp"

namespace frag {

inline constexpr double kNoveltyThreshold = 0.4;

// AUC of the running mean of the k best values seen so far versus call index,
// normalized by `budget`. Runs that stop early hold their final value to the
// end of the budget (per-call Riemann sum).
inline double auc_topk(const std::vector<double>& ys_in_call_order, int k, long budget) {
  if (ys_in_call_order.empty()) throw EmptyHistory("no oracle calls");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (budget < static_cast<long>(ys_in_call_order.size()))
    throw ConfigError("budget smaller than history");
  std::priority_queue<double, std::vector<double>, std::greater<>> top;  // min-heap of best k
  double top_sum = 0.0;
  double area = 0.0;
  double mean = 0.0;
  for (double y : ys_in_call_order) {
    if (static_cast<int>(top.size()) < k) {
      top.push(y);
      top_sum += y;
    } else if (y > top.top()) {
      top_sum += y - top.top();
      top.pop();
      top.push(y);
    }
    mean = top_sum / top.size();
    area += mean;
  }
  area += mean * (budget - static_cast<long>(ys_in_call_order.size()));
  return area / budget;
}

// Internal diversity: 1 - mean pairwise Tanimoto.
inline double diversity(const std::vector<Fingerprint>& fps) {
  const size_t n = fps.size();
  if (n < 2) throw TooFewMolecules("diversity needs at least 2 molecules");
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) sum += tanimoto(fps[i], fps[j]);
  return 1.0 - sum / (n * (n - 1) / 2.0);
}

// Fraction of generated molecules whose nearest training neighbor similarity
// is strictly below 0.4.
inline double novelty(const std::vector<Fingerprint>& generated,
                      const std::vector<Fingerprint>& train) {
  if (train.empty()) throw ConfigError("novelty needs a training set");
  if (generated.empty()) return 0.0;
  int novel = 0;
  for (const Fingerprint& g : generated) {
    double max_sim = 0.0;
    for (const Fingerprint& t : train) max_sim = std::max(max_sim, tanimoto(g, t));
    if (max_sim < kNoveltyThreshold) ++novel;
  }
  return static_cast<double>(novel) / generated.size();
}

// (v - min) / (max - min) per element; an all-equal list maps to all 0.5.
inline std::vector<double> minmax_normalize(const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("nothing to normalize");
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(lo == hi ? 0.5 : (v - lo) / (hi - lo));
  return out;
}

}  // namespace frag
