#pragma once

// Test-only statistics: paired one-sided t-test via the regularized
// incomplete beta function (continued-fraction evaluation).

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fragtest {

inline double betacf(double a, double b, double x) {
  const int kMaxIter = 300;
  const double kEps = 3e-14, kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("betacf did not converge");
}

inline double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                 b * std::log(1.0 - x);
  double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

// P(T_df > t), one-sided.
inline double student_t_sf(double t, double df) {
  double x = df / (df + t * t);
  double p = 0.5 * reg_inc_beta(df / 2.0, 0.5, x);
  return t >= 0 ? p : 1.0 - p;
}

struct PairedTest {
  double t = 0.0;
  double p_one_sided = 1.0;  // H1: mean(a - b) > 0
  double mean_diff = 0.0;
  int n = 0;
};

inline PairedTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::runtime_error("bad paired samples");
  PairedTest r;
  r.n = static_cast<int>(a.size());
  double mean = 0;
  for (int i = 0; i < r.n; ++i) mean += a[i] - b[i];
  mean /= r.n;
  double var = 0;
  for (int i = 0; i < r.n; ++i) {
    double d = a[i] - b[i] - mean;
    var += d * d;
  }
  var /= (r.n - 1);
  double se = std::sqrt(var / r.n);
  r.mean_diff = mean;
  r.t = se == 0.0 ? (mean > 0 ? 1e9 : 0.0) : mean / se;
  r.p_one_sided = student_t_sf(r.t, r.n - 1);
  return r;
}

}  // namespace fragtest
