#pragma once

// Accuracy-study models: outlier removal, the linear gaze-error model, the
// logistic trackability model with a cross-validated decision point, and the
// trackable-cone limit derived from it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gazeattn/error.hpp"
#include "gazeattn/statistics.hpp"

namespace gazeattn::gaze_models {

enum class Phase { Looking, Pointing };

struct GazeObservation {
  double gaze_shift = 0.0;                 // degrees
  std::optional<double> angular_error;     // degrees, present iff tracked
  bool tracked = true;
  Phase phase = Phase::Looking;
};

// ---------------------------------------------------------------- outliers

struct OutlierResult {
  std::vector<double> kept;
  std::vector<bool> kept_mask;
  double discarded_fraction = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

/// Single pass: drop values further than two sample standard deviations from
/// the mean of the original sample.
inline OutlierResult remove_outliers(std::span<const double> xs, double sd_multiple = 2.0) {
  if (xs.size() < 3) throw Error(ErrorKind::InsufficientData, "outlier removal needs n >= 3");
  OutlierResult r;
  r.mean = stats::mean(xs);
  r.sd = stats::sample_sd(xs);
  const double limit = sd_multiple * r.sd;
  r.kept_mask.reserve(xs.size());
  for (double x : xs) {
    const bool keep = std::abs(x - r.mean) <= limit;
    r.kept_mask.push_back(keep);
    if (keep) r.kept.push_back(x);
  }
  r.discarded_fraction =
      static_cast<double>(xs.size() - r.kept.size()) / static_cast<double>(xs.size());
  return r;
}

// ------------------------------------------------------ linear error model

struct LinearFitStats {
  double slope_p_value = std::numeric_limits<double>::quiet_NaN();
  double r_squared = 0.0;
  std::size_t n = 0;
};

/// error(shift) = c1 + c2 * shift, both in degrees.
struct LinearErrorModel {
  double c1 = 1.243;
  double c2 = 0.032;
  LinearFitStats fit;
};

inline double predict_error(const LinearErrorModel& m, double gaze_shift) {
  return m.c1 + m.c2 * gaze_shift;
}

/// Closed-form OLS with a two-sided t-test on the slope.
inline LinearErrorModel fit_linear(std::span<const double> shift, std::span<const double> error) {
  if (shift.size() != error.size()) {
    throw Error(ErrorKind::InsufficientData, "fit_linear: x and y differ in length");
  }
  if (shift.size() < 2) throw Error(ErrorKind::InsufficientData, "fit_linear needs n >= 2");
  const double n = static_cast<double>(shift.size());
  const double mx = stats::mean(shift), my = stats::mean(error);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < shift.size(); ++i) {
    const double dx = shift[i] - mx, dy = error[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) {
    throw Error(ErrorKind::DegenerateDesign, "all gaze shifts are equal; slope is undefined");
  }
  LinearErrorModel m;
  m.c2 = sxy / sxx;
  m.c1 = my - m.c2 * mx;
  m.fit.n = shift.size();
  double sse = 0.0;
  for (std::size_t i = 0; i < shift.size(); ++i) {
    const double r = error[i] - (m.c1 + m.c2 * shift[i]);
    sse += r * r;
  }
  m.fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  if (shift.size() > 2) {
    const double df = n - 2.0;
    const double se_slope = std::sqrt(sse / df / sxx);
    m.fit.slope_p_value =
        se_slope > 0.0 ? stats::t_two_sided_p(m.c2 / se_slope, df) : (m.c2 == 0.0 ? 1.0 : 0.0);
  }
  return m;
}

/// Fits on the tracked observations of one phase (Looking by default).
inline LinearErrorModel fit_linear(std::span<const GazeObservation> obs,
                                   Phase phase = Phase::Looking) {
  std::vector<double> x, y;
  for (const auto& o : obs) {
    if (o.phase == phase && o.tracked && o.angular_error) {
      x.push_back(o.gaze_shift);
      y.push_back(*o.angular_error);
    }
  }
  return fit_linear(x, y);
}

// ------------------------------------------------- logistic trackability

struct TrackabilityModel {
  double beta0 = 5.407;
  double beta1 = -0.177;
  double decision_point = 0.65;
  double cv_accuracy = std::numeric_limits<double>::quiet_NaN();
};

inline double logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// log(1 + exp(eta)) without overflow.
inline double softplus(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

inline double predict_tracked_prob(const TrackabilityModel& m, double gaze_shift) {
  return logistic(m.beta0 + m.beta1 * gaze_shift);
}

struct LogisticFit {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  bool separated = false;
  /// Log-likelihood after each accepted iteration (starting point first).
  std::vector<double> trace;
};

inline constexpr double kLogisticTolerance = 1e-10;
inline constexpr int kLogisticMaxIterations = 100;
inline constexpr double kSeparationMagnitude = 1e4;

inline double logistic_log_likelihood(std::span<const double> x, std::span<const int> y, double b0,
                                      double b1) {
  double ll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eta = b0 + b1 * x[i];
    ll += y[i] * eta - softplus(eta);
  }
  return ll;
}

/// True when one class lies entirely on one side of the other (complete or
/// quasi-complete separation); the MLE then does not exist.
inline bool is_separable(std::span<const double> x, std::span<const int> y) {
  double min0 = INFINITY, max0 = -INFINITY, min1 = INFINITY, max1 = -INFINITY;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y[i]) {
      min1 = std::min(min1, x[i]);
      max1 = std::max(max1, x[i]);
    } else {
      min0 = std::min(min0, x[i]);
      max0 = std::max(max0, x[i]);
    }
  }
  return max0 <= min1 || max1 <= min0;
}

/// Newton-Raphson / IRLS maximum likelihood for P(y=1|x) = logistic(b0 + b1 x).
/// Never throws on separation; it reports it. Steps are halved whenever the
/// log-likelihood would drop, so the trace is non-decreasing.
inline LogisticFit fit_logistic_irls(std::span<const double> x, std::span<const int> y) {
  if (x.size() != y.size() || x.empty()) {
    throw Error(ErrorKind::InsufficientData, "fit_logistic: empty or mismatched input");
  }
  const std::size_t n = x.size();
  const double positives = static_cast<double>(std::count(y.begin(), y.end(), 1));
  if (positives == 0.0 || positives == static_cast<double>(n)) {
    throw Error(ErrorKind::InsufficientData, "fit_logistic needs both tracked classes");
  }

  LogisticFit fit;
  fit.beta0 = logit(positives / static_cast<double>(n));
  fit.beta1 = 0.0;
  fit.log_likelihood = logistic_log_likelihood(x, y, fit.beta0, fit.beta1);
  fit.trace.push_back(fit.log_likelihood);

  for (int it = 0; it < kLogisticMaxIterations; ++it) {
    double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = logistic(fit.beta0 + fit.beta1 * x[i]);
      const double w = p * (1.0 - p);
      const double r = y[i] - p;
      g0 += r;
      g1 += r * x[i];
      h00 += w;
      h01 += w * x[i];
      h11 += w * x[i] * x[i];
    }
    const double det = h00 * h11 - h01 * h01;
    if (!(det > 0.0)) {
      fit.separated = true;
      break;
    }
    double d0 = (h11 * g0 - h01 * g1) / det;
    double d1 = (h00 * g1 - h01 * g0) / det;

    double b0 = fit.beta0 + d0, b1 = fit.beta1 + d1;
    double ll = logistic_log_likelihood(x, y, b0, b1);
    for (int halving = 0; halving < 50 && ll < fit.log_likelihood; ++halving) {
      d0 *= 0.5;
      d1 *= 0.5;
      b0 = fit.beta0 + d0;
      b1 = fit.beta1 + d1;
      ll = logistic_log_likelihood(x, y, b0, b1);
    }
    if (ll < fit.log_likelihood) {
      fit.converged = true;  // no ascent direction left at machine precision
      break;
    }
    const double change = ll - fit.log_likelihood;
    fit.beta0 = b0;
    fit.beta1 = b1;
    fit.log_likelihood = ll;
    fit.trace.push_back(ll);
    fit.iterations = it + 1;
    if (std::abs(fit.beta0) > kSeparationMagnitude || std::abs(fit.beta1) > kSeparationMagnitude) {
      fit.separated = true;
      break;
    }
    if (change < kLogisticTolerance) {
      fit.converged = true;
      break;
    }
  }
  if (is_separable(x, y)) fit.separated = true;
  return fit;
}

/// Maximum-likelihood fit; throws on separated data.
inline LogisticFit fit_logistic(std::span<const double> x, std::span<const int> y) {
  LogisticFit fit = fit_logistic_irls(x, y);
  if (fit.separated) {
    throw Error(ErrorKind::Separation,
                "tracked classes are perfectly separable; coefficients diverge");
  }
  return fit;
}

inline void split_tracking(std::span<const GazeObservation> obs, Phase phase,
                           std::vector<double>& x, std::vector<int>& y) {
  for (const auto& o : obs) {
    if (o.phase != phase) continue;
    x.push_back(o.gaze_shift);
    y.push_back(o.tracked ? 1 : 0);
  }
}

inline LogisticFit fit_logistic(std::span<const GazeObservation> obs,
                                Phase phase = Phase::Looking) {
  std::vector<double> x;
  std::vector<int> y;
  split_tracking(obs, phase, x, y);
  return fit_logistic(x, y);
}

// ------------------------------------------------------ cross-validation

struct ThresholdGrid {
  double low = 0.25;
  double high = 0.75;
  double step = 0.01;

  std::vector<double> values() const {
    std::vector<double> v;
    const auto count = static_cast<long>(std::llround((high - low) / step));
    for (long i = 0; i <= count; ++i) v.push_back(low + static_cast<double>(i) * step);
    return v;
  }
};

struct CrossValidationResult {
  double decision_point = 0.5;
  /// Mean held-out accuracy over folds at the chosen threshold.
  double accuracy = 0.0;
  /// Accuracy of the model refit on all data, at the chosen threshold.
  double refit_accuracy = 0.0;
  std::vector<double> thresholds;
  std::vector<double> fold_mean_accuracy;
};

/// k-fold CV over the probability grid. Folds come from a seeded uniform
/// shuffle with near-equal sizes. Prediction is "tracked" when P > threshold.
/// Ties between thresholds go to the larger one.
inline CrossValidationResult cross_validate_threshold(std::span<const double> x,
                                                      std::span<const int> y, std::size_t k,
                                                      std::uint64_t seed,
                                                      ThresholdGrid grid = {}) {
  if (x.size() != y.size()) throw Error(ErrorKind::InsufficientData, "mismatched input");
  if (k < 2 || x.size() < k) {
    throw Error(ErrorKind::InsufficientData, "cross-validation needs n >= k >= 2");
  }
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  CrossValidationResult out;
  out.thresholds = grid.values();
  out.fold_mean_accuracy.assign(out.thresholds.size(), 0.0);

  // Probability predictor for a training subset; single-class training
  // data collapses to the constant class indicator.
  auto train = [](const std::vector<double>& tx, const std::vector<int>& ty) {
    const auto pos = std::count(ty.begin(), ty.end(), 1);
    if (pos == 0 || pos == static_cast<long>(ty.size())) {
      const double c = pos == 0 ? 0.0 : 1.0;
      return std::pair<bool, LogisticFit>{false, LogisticFit{.beta0 = c, .trace = {}}};
    }
    return std::pair<bool, LogisticFit>{true, fit_logistic_irls(tx, ty)};
  };
  auto prob = [](const std::pair<bool, LogisticFit>& m, double xv) {
    return m.first ? logistic(m.second.beta0 + m.second.beta1 * xv) : m.second.beta0;
  };

  for (std::size_t fold = 0; fold < k; ++fold) {
    std::vector<double> tx, vx;
    std::vector<int> ty, vy;
    for (std::size_t pos = 0; pos < n; ++pos) {
      const std::size_t i = order[pos];
      if (pos % k == fold) {
        vx.push_back(x[i]);
        vy.push_back(y[i]);
      } else {
        tx.push_back(x[i]);
        ty.push_back(y[i]);
      }
    }
    const auto model = train(tx, ty);
    for (std::size_t t = 0; t < out.thresholds.size(); ++t) {
      std::size_t correct = 0;
      for (std::size_t i = 0; i < vx.size(); ++i) {
        const int predicted = prob(model, vx[i]) > out.thresholds[t] ? 1 : 0;
        if (predicted == vy[i]) ++correct;
      }
      out.fold_mean_accuracy[t] += static_cast<double>(correct) / static_cast<double>(vx.size());
    }
  }
  std::size_t best = 0;
  for (std::size_t t = 0; t < out.thresholds.size(); ++t) {
    out.fold_mean_accuracy[t] /= static_cast<double>(k);
    if (out.fold_mean_accuracy[t] >= out.fold_mean_accuracy[best] - 1e-12) best = t;
  }
  out.decision_point = out.thresholds[best];
  out.accuracy = out.fold_mean_accuracy[best];

  const auto full = train(std::vector<double>(x.begin(), x.end()),
                          std::vector<int>(y.begin(), y.end()));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if ((prob(full, x[i]) > out.decision_point ? 1 : 0) == y[i]) ++correct;
  }
  out.refit_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return out;
}

inline CrossValidationResult cross_validate_threshold(std::span<const GazeObservation> obs,
                                                      std::size_t k, std::uint64_t seed,
                                                      Phase phase = Phase::Looking,
                                                      ThresholdGrid grid = {}) {
  std::vector<double> x;
  std::vector<int> y;
  split_tracking(obs, phase, x, y);
  return cross_validate_threshold(x, y, k, seed, grid);
}

/// Largest gaze shift (degrees) for which P(tracked) stays above the
/// decision point. The trackable cone's tip angle is twice this.
inline double trackable_limit(const TrackabilityModel& m) {
  if (!(m.beta1 < 0.0)) {
    throw Error(ErrorKind::InvalidModel, "trackable limit needs a negative slope");
  }
  return (logit(m.decision_point) - m.beta0) / m.beta1;
}

inline double trackable_cone_angle(const TrackabilityModel& m) { return 2.0 * trackable_limit(m); }

// ---------------------------------------------------- pointing summary

struct SummaryStats {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
};

/// Mean with a Student-t confidence interval.
inline SummaryStats summarize_pointing_error(std::span<const double> errors,
                                             double confidence = 0.95) {
  if (errors.size() < 2) throw Error(ErrorKind::InsufficientData, "summary needs n >= 2");
  SummaryStats s;
  s.n = errors.size();
  s.mean = stats::mean(errors);
  const double se = stats::sample_sd(errors) / std::sqrt(static_cast<double>(s.n));
  const double half =
      se > 0.0 ? stats::t_quantile(0.5 + 0.5 * confidence, static_cast<double>(s.n - 1)) * se
               : 0.0;
  s.ci_low = s.mean - half;
  s.ci_high = s.mean + half;
  return s;
}

inline SummaryStats summarize_pointing_error(std::span<const GazeObservation> obs,
                                             double confidence = 0.95) {
  std::vector<double> e;
  for (const auto& o : obs) {
    if (o.phase == Phase::Pointing && o.tracked && o.angular_error) e.push_back(*o.angular_error);
  }
  return summarize_pointing_error(e, confidence);
}

// ------------------------------------------------------- full analysis

struct SubsetCounts {
  std::size_t looking_tracked = 0;
  std::size_t looking_untracked = 0;
  std::size_t pointing_tracked = 0;
  std::size_t pointing_untracked = 0;
};

/// Everything `fit-gaze` reports. Parts that cannot be fitted on the given
/// data stay empty and leave a note in `warnings`.
struct GazeModelReport {
  SubsetCounts counts;
  std::optional<LinearErrorModel> linear;
  double linear_discarded_fraction = 0.0;
  std::optional<LogisticFit> logistic;
  std::optional<CrossValidationResult> cv;
  std::optional<TrackabilityModel> trackability;
  std::optional<double> trackable_limit;
  std::optional<double> error_at_limit;
  std::optional<SummaryStats> pointing;
  double pointing_discarded_fraction = 0.0;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

namespace detail {

// Angular errors of one tracked subset with 2-SD outliers dropped.
inline std::vector<std::size_t> kept_error_rows(std::span<const GazeObservation> obs, Phase phase,
                                                double& discarded) {
  std::vector<std::size_t> rows;
  std::vector<double> err;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].phase == phase && obs[i].tracked && obs[i].angular_error) {
      rows.push_back(i);
      err.push_back(*obs[i].angular_error);
    }
  }
  discarded = 0.0;
  if (err.size() < 3) return rows;
  const OutlierResult r = remove_outliers(err);
  discarded = r.discarded_fraction;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (r.kept_mask[i]) kept.push_back(rows[i]);
  }
  return kept;
}

}  // namespace detail

/// Outliers are removed inside each error subset (looking, pointing)
/// separately; the trackability fit uses every looking observation.
inline GazeModelReport analyze_observations(std::span<const GazeObservation> obs,
                                            std::size_t folds = 5, std::uint64_t seed = 1) {
  GazeModelReport rep;
  rep.folds = folds;
  rep.seed = seed;
  for (const auto& o : obs) {
    const bool look = o.phase == Phase::Looking;
    auto& c = rep.counts;
    ++(look ? (o.tracked ? c.looking_tracked : c.looking_untracked)
            : (o.tracked ? c.pointing_tracked : c.pointing_untracked));
  }
  auto note = [&rep](const char* what, const std::exception& e) {
    rep.warnings.push_back(std::string(what) + ": " + e.what());
  };

  try {
    std::vector<double> x, y;
    for (std::size_t i : detail::kept_error_rows(obs, Phase::Looking, rep.linear_discarded_fraction)) {
      x.push_back(obs[i].gaze_shift);
      y.push_back(*obs[i].angular_error);
    }
    rep.linear = fit_linear(x, y);
  } catch (const Error& e) {
    note("linear model", e);
  }

  std::vector<double> lx;
  std::vector<int> ly;
  split_tracking(obs, Phase::Looking, lx, ly);
  try {
    rep.logistic = fit_logistic(lx, ly);
    if (!(rep.logistic->beta1 < 0.0)) {
      rep.warnings.push_back("trackability slope is not negative; tracking does not degrade with shift");
    }
  } catch (const Error& e) {
    note("trackability model", e);
  }
  try {
    rep.cv = cross_validate_threshold(lx, ly, folds, seed);
  } catch (const Error& e) {
    note("cross-validation", e);
  }
  if (rep.logistic && rep.cv) {
    rep.trackability = TrackabilityModel{rep.logistic->beta0, rep.logistic->beta1,
                                         rep.cv->decision_point, rep.cv->accuracy};
    try {
      rep.trackable_limit = trackable_limit(*rep.trackability);
      if (rep.linear) rep.error_at_limit = predict_error(*rep.linear, *rep.trackable_limit);
    } catch (const Error& e) {
      note("trackable limit", e);
    }
  }

  try {
    std::vector<double> e;
    for (std::size_t i : detail::kept_error_rows(obs, Phase::Pointing, rep.pointing_discarded_fraction)) {
      e.push_back(*obs[i].angular_error);
    }
    rep.pointing = summarize_pointing_error(e);
  } catch (const Error& e) {
    note("pointing summary", e);
  }
  return rep;
}

// ---------------------------------------------------- data generator

/// Stand-in for the accuracy study: looking samples with uniform gaze shift,
/// tracked with the logistic probability and carrying a linear-model error
/// plus Gaussian noise; pointing samples at zero shift.
struct StudyGenerator {
  std::size_t looking = 330;
  std::size_t pointing = 331;
  double max_shift = 60.0;
  TrackabilityModel trackability;
  LinearErrorModel error;
  double error_sd = 0.8;
  double pointing_mean = 1.99;
  double pointing_sd = 1.53;
};

inline std::vector<GazeObservation> synthesize_observations(const StudyGenerator& g,
                                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> shift(0.0, g.max_shift);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<GazeObservation> out;
  out.reserve(g.looking + g.pointing);
  for (std::size_t i = 0; i < g.looking; ++i) {
    GazeObservation o;
    o.gaze_shift = shift(rng);
    o.tracked = unit(rng) < predict_tracked_prob(g.trackability, o.gaze_shift);
    const double e = std::abs(predict_error(g.error, o.gaze_shift) + g.error_sd * noise(rng));
    if (o.tracked) o.angular_error = e;
    out.push_back(o);
  }
  for (std::size_t i = 0; i < g.pointing; ++i) {
    GazeObservation o;
    o.phase = Phase::Pointing;
    o.angular_error = std::abs(g.pointing_mean + g.pointing_sd * noise(rng));
    out.push_back(o);
  }
  return out;
}

}  // namespace gazeattn::gaze_models
