#pragma once

// Descriptive statistics, Welch's t-test and Bonferroni correction.

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "gazeattn/error.hpp"

namespace gazeattn::stats {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw Error(ErrorKind::InsufficientData, "mean of empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Unbiased (n - 1) variance.
inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) throw Error(ErrorKind::InsufficientData, "variance needs n >= 2");
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

inline double sample_sd(std::span<const double> xs) { return std::sqrt(sample_variance(xs)); }

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `df` degrees.
inline double t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

inline double t_quantile(double p, double df) {
  boost::math::students_t dist(df);
  return boost::math::quantile(dist, p);
}

struct WelchResult {
  double t = 0.0;
  double df = std::numeric_limits<double>::quiet_NaN();
  double p = 1.0;
  /// Both groups had zero variance; p was set by the degenerate rule.
  bool degenerate = false;
};

/// Two-sided Welch (unequal variance) t-test with Satterthwaite degrees of
/// freedom. When both variances are zero the test is undefined: equal means
/// give p = 1, different means give p = 0 with `degenerate` set.
inline WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorKind::InsufficientData, "welch_t_test needs at least two values per group");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean(a), mb = mean(b);
  const double va = sample_variance(a), vb = sample_variance(b);
  const double sa = va / na, sb = vb / nb;
  const double se2 = sa + sb;

  WelchResult r;
  if (se2 == 0.0) {
    r.degenerate = true;
    if (ma == mb) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = ma > mb ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  r.p = t_two_sided_p(r.t, r.df);
  return r;
}

inline double bonferroni(double p, std::size_t comparisons) {
  if (comparisons < 1) throw Error(ErrorKind::InsufficientData, "bonferroni needs m >= 1");
  return std::min(1.0, p * static_cast<double>(comparisons));
}

/// Square matrix of raw p-values -> corrected matrix. NaN entries (the
/// diagonal, untested pairs) pass through.
inline std::vector<std::vector<double>> bonferroni(const std::vector<std::vector<double>>& p,
                                                   std::size_t comparisons) {
  auto out = p;
  for (auto& row : out) {
    for (double& v : row) {
      if (!std::isnan(v)) v = bonferroni(v, comparisons);
    }
  }
  return out;
}

}  // namespace gazeattn::stats
