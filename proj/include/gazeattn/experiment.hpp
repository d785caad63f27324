#pragma once

// Seeded multi-trial experiments across behaviour modes, speed-range
// binning, per-trial performance and pairwise Welch tests with Bonferroni
// correction.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gazeattn/mode.hpp"
#include "gazeattn/simulation.hpp"
#include "gazeattn/statistics.hpp"

namespace gazeattn::experiment {

using game::TargetSample;

/// SplitMix64 finaliser; turns structured seed material into well-mixed seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c) {
  return mix_seed(mix_seed(mix_seed(mix_seed(base) ^ a) ^ b) ^ c);
}

struct ExperimentPlan {
  std::vector<BehaviorMode> modes{kAllModes.begin(), kAllModes.end()};
  int trials_per_mode = 3;
  int participants = 15;
  std::uint64_t base_seed = 2018;
  sim::SimulationParams params;
  /// 0 = hardware concurrency.
  unsigned threads = 0;
};

inline void validate(const ExperimentPlan& plan) {
  if (plan.modes.empty()) throw Error(ErrorKind::ConfigInvalid, "plan has no modes");
  if (plan.trials_per_mode < 1 || plan.participants < 1) {
    throw Error(ErrorKind::ConfigInvalid, "plan needs at least one participant and trial");
  }
  sim::validate(plan.params);
}

/// Deterministic trial list ordered by participant, mode, repetition. The
/// game seed depends only on (participant, repetition), so every mode faces
/// the same target sequences; the user seed also depends on the mode.
inline std::vector<sim::TrialSpec> expand_plan(const ExperimentPlan& plan) {
  std::vector<sim::TrialSpec> out;
  std::uint64_t id = 0;
  for (int p = 0; p < plan.participants; ++p) {
    for (BehaviorMode m : plan.modes) {
      for (int r = 0; r < plan.trials_per_mode; ++r) {
        sim::TrialSpec s;
        s.trial_id = id++;
        s.mode = m;
        s.participant = p;
        s.repetition = r;
        s.game_seed = derive_seed(plan.base_seed, 0x67616D65ULL, static_cast<std::uint64_t>(p),
                                  static_cast<std::uint64_t>(r));
        s.user_seed = derive_seed(plan.base_seed,
                                  0x75736572ULL + (static_cast<std::uint64_t>(m) << 32),
                                  static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(r));
        out.push_back(s);
      }
    }
  }
  return out;
}

struct ExperimentResult {
  std::vector<sim::TrialResult> trials;  // in plan order

  std::vector<TargetSample> samples() const {
    std::vector<TargetSample> all;
    for (const auto& t : trials) all.insert(all.end(), t.samples.begin(), t.samples.end());
    return all;
  }
};

/// Trials are independent and run on a small thread pool; results land in
/// plan order regardless of scheduling.
inline ExperimentResult run_experiment(const ExperimentPlan& plan, bool keep_logs = false) {
  validate(plan);
  const auto specs = expand_plan(plan);
  ExperimentResult result;
  result.trials.resize(specs.size());

  unsigned workers = plan.threads ? plan.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, specs.size())));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      result.trials[i] = sim::run_trial(specs[i], plan.params, keep_logs);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return result;
}

// --------------------------------------------------------- speed ranges

struct SpeedRange {
  std::string label;
  double low;
  double high;
  bool closed_high;

  bool contains(double v) const { return v >= low && (closed_high ? v <= high : v < high); }
};

inline const std::array<SpeedRange, 3>& speed_ranges() {
  static const std::array<SpeedRange, 3> ranges{{{"R1", 70.0, 200.0, false},
                                                 {"R2", 200.0, 330.0, false},
                                                 {"R3", 330.0, 490.0, true}}};
  return ranges;
}

struct SpeedBins {
  std::array<std::vector<TargetSample>, 3> groups;
  std::size_t discarded = 0;
  double discarded_fraction = 0.0;
};

inline std::optional<std::size_t> range_index(double speed) {
  const auto& r = speed_ranges();
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i].contains(speed)) return i;
  }
  return std::nullopt;
}

inline SpeedBins bin_by_speed(std::span<const TargetSample> samples) {
  SpeedBins b;
  for (const auto& s : samples) {
    if (auto i = range_index(s.speed)) {
      b.groups[*i].push_back(s);
    } else {
      ++b.discarded;
    }
  }
  b.discarded_fraction =
      samples.empty() ? 0.0 : static_cast<double>(b.discarded) / static_cast<double>(samples.size());
  return b;
}

// ---------------------------------------------------------------- report

struct CellStats {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double standard_error = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;  // trials contributing
  std::vector<double> per_trial;
};

struct RangeComparison {
  /// Indexed by position in StatsReport::modes; NaN on the diagonal.
  std::vector<std::vector<double>> raw_p;
  std::vector<std::vector<double>> corrected_p;
  std::vector<std::vector<bool>> degenerate;
};

struct StatsReport {
  std::vector<BehaviorMode> modes;
  /// cells[mode][range]
  std::vector<std::array<CellStats, 3>> cells;
  std::array<RangeComparison, 3> comparisons;
  std::size_t comparisons_per_range = 0;
  double discarded_fraction = 0.0;

  std::size_t mode_index(BehaviorMode m) const {
    for (std::size_t i = 0; i < modes.size(); ++i) {
      if (modes[i] == m) return i;
    }
    throw Error(ErrorKind::InsufficientData, "mode not present in report");
  }
  const CellStats& cell(BehaviorMode m, std::size_t range) const { return cells[mode_index(m)][range]; }
  double corrected_p(BehaviorMode a, BehaviorMode b, std::size_t range) const {
    return comparisons[range].corrected_p[mode_index(a)][mode_index(b)];
  }
};

/// Unit of analysis is the trial: each trial contributes its completed
/// fraction within a speed range (trials with no targets in that range are
/// skipped). Modes appear in `kAllModes` order.
inline StatsReport report(std::span<const TargetSample> samples) {
  StatsReport rep;
  for (BehaviorMode m : kAllModes) {
    if (std::any_of(samples.begin(), samples.end(), [m](const TargetSample& s) { return s.mode == m; })) {
      rep.modes.push_back(m);
    }
  }
  if (rep.modes.empty()) throw Error(ErrorKind::InsufficientData, "report of an empty sample set");

  const SpeedBins bins = bin_by_speed(samples);
  rep.discarded_fraction = bins.discarded_fraction;
  rep.cells.resize(rep.modes.size());

  for (std::size_t mi = 0; mi < rep.modes.size(); ++mi) {
    std::map<std::uint64_t, bool> trials_of_mode;
    for (const auto& s : samples) {
      if (s.mode == rep.modes[mi]) trials_of_mode[s.trial_id] = true;
    }
    if (trials_of_mode.size() < 2) {
      throw Error(ErrorKind::InsufficientData,
                  "mode " + std::string(to_string(rep.modes[mi])) + " has fewer than two trials");
    }
    for (std::size_t r = 0; r < 3; ++r) {
      std::map<std::uint64_t, std::pair<std::size_t, std::size_t>> per_trial;  // done, total
      for (const auto& s : bins.groups[r]) {
        if (s.mode != rep.modes[mi]) continue;
        auto& c = per_trial[s.trial_id];
        c.first += s.completed ? 1 : 0;
        c.second += 1;
      }
      CellStats& cell = rep.cells[mi][r];
      for (const auto& [id, c] : per_trial) {
        cell.per_trial.push_back(static_cast<double>(c.first) / static_cast<double>(c.second));
      }
      cell.n = cell.per_trial.size();
      if (cell.n >= 1) cell.mean = stats::mean(cell.per_trial);
      if (cell.n >= 2) {
        cell.standard_error = stats::sample_sd(cell.per_trial) / std::sqrt(static_cast<double>(cell.n));
      }
    }
  }

  const std::size_t k = rep.modes.size();
  rep.comparisons_per_range = std::max<std::size_t>(1, k * (k - 1) / 2);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t r = 0; r < 3; ++r) {
    RangeComparison& cmp = rep.comparisons[r];
    cmp.raw_p.assign(k, std::vector<double>(k, nan));
    cmp.degenerate.assign(k, std::vector<bool>(k, false));
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        const auto& a = rep.cells[i][r].per_trial;
        const auto& b = rep.cells[j][r].per_trial;
        if (a.size() < 2 || b.size() < 2) continue;
        const auto w = stats::welch_t_test(a, b);
        cmp.raw_p[i][j] = cmp.raw_p[j][i] = w.p;
        cmp.degenerate[i][j] = cmp.degenerate[j][i] = w.degenerate;
      }
    }
    cmp.corrected_p = stats::bonferroni(cmp.raw_p, rep.comparisons_per_range);
  }
  return rep;
}

}  // namespace gazeattn::experiment
