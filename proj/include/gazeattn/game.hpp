#pragma once

// The falling-target validation game: spawning (random and scripted
// scenarios), the virtual laser, fixed-timestep update and outcome samples.
//
// Screen coordinates are millimetres from the screen centre, x right and
// y up. Targets enter at the top edge (y = +height/2) and fail when they
// reach the bottom line (y = -height/2).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "gazeattn/error.hpp"
#include "gazeattn/geometry.hpp"
#include "gazeattn/mode.hpp"

namespace gazeattn::game {

using geometry::Vec2;
using TargetId = std::uint32_t;

enum class TargetKind { Task, Distractor };
enum class TargetState { Falling, Completed, Failed };

inline std::string_view to_string(TargetKind k) {
  return k == TargetKind::Task ? "task" : "distractor";
}

inline std::string_view to_string(TargetState s) {
  switch (s) {
    case TargetState::Falling: return "falling";
    case TargetState::Completed: return "completed";
    case TargetState::Failed: return "failed";
  }
  return "falling";
}

struct Target {
  TargetId id = 0;
  TargetKind kind = TargetKind::Task;
  Vec2 position = Vec2::Zero();
  double speed = 0.0;  // mm/s, downward
  double required_lase_time = 0.0;
  double accumulated_lase = 0.0;
  TargetState state = TargetState::Falling;
  bool scenario = false;

  bool is_open_task() const { return kind == TargetKind::Task && state == TargetState::Falling; }
  double remaining_lase() const { return required_lase_time - accumulated_lase; }
  double time_to_bottom(double bottom_y) const {
    return speed > 0.0 ? std::max(0.0, (position.y() - bottom_y) / speed) : INFINITY;
  }
};

/// tau(v) = reference_time * reference_speed / v, clamped to [min_time, max_time].
struct LaseTimeLaw {
  double reference_time = 1.2;
  double reference_speed = 200.0;
  double min_time = 0.3;
  double max_time = 2.0;
};

struct GameConfig {
  double screen_width = 915.0;
  double screen_height = 515.0;
  double trial_duration = 80.0;
  double tick_rate = 60.0;
  double laser_range = 100.0;
  double target_radius = 30.0;
  /// Mean seconds between task targets, and between distractors.
  double task_spawn_interval = 2.2;
  double distractor_spawn_interval = 3.0;
  double min_speed = 70.0;
  double max_speed = 490.0;
  LaseTimeLaw lase;
  /// Share of task targets that belong to scripted scenarios.
  double scenario_fraction = 0.5;

  double dt() const { return 1.0 / tick_rate; }
  std::int64_t total_ticks() const { return std::llround(trial_duration * tick_rate); }
  double top() const { return 0.5 * screen_height; }
  double bottom() const { return -0.5 * screen_height; }
};

inline double required_lase_time(double speed, const GameConfig& cfg) {
  if (!(speed > 0.0)) throw Error(ErrorKind::ConfigInvalid, "target speed must be positive");
  const auto& law = cfg.lase;
  return std::clamp(law.reference_time * law.reference_speed / speed, law.min_time, law.max_time);
}

/// Throws ConfigInvalid unless every field is usable and every spawnable
/// speed leaves enough fall time to finish lasing.
inline void validate(const GameConfig& c) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::ConfigInvalid, std::string(name) + " must be positive");
    }
  };
  positive(c.screen_width, "screen_width");
  positive(c.screen_height, "screen_height");
  positive(c.tick_rate, "tick_rate");
  positive(c.laser_range, "laser_range");
  positive(c.target_radius, "target_radius");
  positive(c.task_spawn_interval, "task_spawn_interval");
  positive(c.distractor_spawn_interval, "distractor_spawn_interval");
  positive(c.min_speed, "min_speed");
  positive(c.lase.reference_time, "lase.reference_time");
  positive(c.lase.reference_speed, "lase.reference_speed");
  positive(c.lase.min_time, "lase.min_time");
  if (!(c.trial_duration >= 0.0)) {
    throw Error(ErrorKind::ConfigInvalid, "trial_duration must be non-negative");
  }
  if (!(c.max_speed >= c.min_speed)) throw Error(ErrorKind::ConfigInvalid, "max_speed < min_speed");
  if (!(c.lase.max_time >= c.lase.min_time)) {
    throw Error(ErrorKind::ConfigInvalid, "lase.max_time < lase.min_time");
  }
  if (!(c.scenario_fraction >= 0.0 && c.scenario_fraction <= 1.0)) {
    throw Error(ErrorKind::ConfigInvalid, "scenario_fraction must lie in [0, 1]");
  }
  if (2.0 * c.target_radius >= c.screen_width) {
    throw Error(ErrorKind::ConfigInvalid, "targets do not fit on the screen");
  }
  // v * tau(v) is piecewise increasing/constant, so its maximum over the
  // spawn range sits at the upper end or a clamp breakpoint.
  const double k = c.lase.reference_time * c.lase.reference_speed;
  for (double v : {c.min_speed, c.max_speed, k / c.lase.max_time, k / c.lase.min_time}) {
    if (v < c.min_speed || v > c.max_speed) continue;
    if (required_lase_time(v, c) * v > c.screen_height) {
      throw Error(ErrorKind::ConfigInvalid,
                  "lase time exceeds the fall time at speed " + std::to_string(v) + " mm/s");
    }
  }
}

// ------------------------------------------------------------ scenarios

enum class ScenarioKind { TriangleFormation, LineFormation, Overtake };

struct ScriptedSpawn {
  double x = 0.0;
  double speed = 0.0;
  double delay = 0.0;  // seconds after the scenario starts
};

inline constexpr double kFormationSpacing = 120.0;
inline constexpr int kLineMin = 3;
inline constexpr int kLineMax = 5;

/// Average number of task targets in a scenario when the kind is uniform:
/// triangle 3, line 3..5, overtake 2.
inline constexpr double kMeanScenarioSize = (3.0 + 0.5 * (kLineMin + kLineMax) + 2.0) / 3.0;

inline std::vector<ScriptedSpawn> scenario_generate(ScenarioKind kind, std::mt19937_64& rng,
                                                    const GameConfig& cfg) {
  auto uniform = [&rng](double lo, double hi) {
    return lo >= hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const double half_w = 0.5 * cfg.screen_width - cfg.target_radius;
  std::vector<ScriptedSpawn> out;
  switch (kind) {
    case ScenarioKind::LineFormation: {
      const int n = std::uniform_int_distribution<int>(kLineMin, kLineMax)(rng);
      const double spacing = std::min(kFormationSpacing, 2.0 * half_w / (n - 1));
      const double span = spacing * (n - 1);
      const double centre = uniform(-half_w + 0.5 * span, half_w - 0.5 * span);
      const double speed = uniform(cfg.min_speed, cfg.max_speed);
      for (int i = 0; i < n; ++i) {
        out.push_back({centre - 0.5 * span + spacing * i, speed, 0.0});
      }
      break;
    }
    case ScenarioKind::TriangleFormation: {
      const double half_base = std::min(0.5 * kFormationSpacing, half_w);
      const double centre = uniform(-half_w + half_base, half_w - half_base);
      const double speed = uniform(cfg.min_speed, cfg.max_speed);
      const double apex_height = half_base * std::sqrt(3.0);
      out.push_back({centre - half_base, speed, 0.0});
      out.push_back({centre + half_base, speed, 0.0});
      out.push_back({centre, speed, apex_height / speed});
      break;
    }
    case ScenarioKind::Overtake: {
      const double third = (cfg.max_speed - cfg.min_speed) / 3.0;
      const double x = uniform(-half_w, half_w);
      const double slow = uniform(cfg.min_speed, cfg.min_speed + third);
      const double fast = uniform(slow + third, cfg.max_speed);
      // The fast target starts later on the same column and must pass the
      // slow one before it reaches the bottom: delay < H (vf - vs) / (vs vf).
      const double delay = 0.5 * cfg.screen_height * (fast - slow) / (slow * fast);
      out.push_back({x, slow, 0.0});
      out.push_back({x, fast, delay});
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------- state

struct TargetSample {
  double speed = 0.0;
  BehaviorMode mode = BehaviorMode::Manual;
  bool completed = false;
  std::uint64_t trial_id = 0;
  double timestamp = 0.0;
  TargetId target_id = 0;
};

struct ScoreCounters {
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::size_t total_spawned = 0;  // task targets only
  std::size_t scenario_spawned = 0;
  std::size_t distractors_spawned = 0;
};

struct PendingSpawn {
  std::int64_t due_tick = 0;
  double x = 0.0;
  double speed = 0.0;
};

struct GameState {
  std::int64_t tick = 0;
  double time = 0.0;
  std::vector<Target> targets;
  std::vector<PendingSpawn> pending;
  std::mt19937_64 rng;
  TargetId next_id = 1;
  ScoreCounters score;
  std::uint64_t trial_id = 0;
  BehaviorMode mode = BehaviorMode::Manual;

  const Target* find(TargetId id) const {
    for (const auto& t : targets) {
      if (t.id == id) return &t;
    }
    return nullptr;
  }
  std::size_t falling_tasks() const {
    return static_cast<std::size_t>(
        std::count_if(targets.begin(), targets.end(), [](const Target& t) { return t.is_open_task(); }));
  }
};

inline GameState new_game(const GameConfig& cfg, std::uint64_t seed, std::uint64_t trial_id = 0,
                          BehaviorMode mode = BehaviorMode::Manual) {
  validate(cfg);
  GameState s;
  s.rng.seed(seed);
  s.trial_id = trial_id;
  s.mode = mode;
  return s;
}

inline TargetId add_target(GameState& s, const GameConfig& cfg, TargetKind kind, double x,
                           double speed, bool scenario) {
  Target t;
  t.id = s.next_id++;
  t.kind = kind;
  t.position = Vec2(x, cfg.top());
  t.speed = speed;
  t.scenario = scenario;
  if (kind == TargetKind::Task) {
    t.required_lase_time = required_lase_time(speed, cfg);
    ++s.score.total_spawned;
    if (scenario) ++s.score.scenario_spawned;
  } else {
    ++s.score.distractors_spawned;
  }
  s.targets.push_back(t);
  return t.id;
}

/// Probability that a task spawn event starts a scenario, chosen so that the
/// expected share of scenario *targets* equals the configured fraction.
inline double scenario_event_probability(double fraction) {
  if (fraction >= 1.0) return 1.0;
  return fraction / (fraction + kMeanScenarioSize * (1.0 - fraction));
}

/// Per-tick spawning: due scripted targets, then Bernoulli task and
/// distractor events. Returns ids spawned this tick.
inline std::vector<TargetId> spawn_step(GameState& s, const GameConfig& cfg) {
  std::vector<TargetId> spawned;
  const double dt = cfg.dt();
  auto unit = [&s] { return std::uniform_real_distribution<double>(0.0, 1.0)(s.rng); };
  const double half_w = 0.5 * cfg.screen_width - cfg.target_radius;

  for (auto it = s.pending.begin(); it != s.pending.end();) {
    if (it->due_tick <= s.tick) {
      spawned.push_back(add_target(s, cfg, TargetKind::Task, it->x, it->speed, true));
      it = s.pending.erase(it);
    } else {
      ++it;
    }
  }

  const double q = scenario_event_probability(cfg.scenario_fraction);
  const double targets_per_event = (1.0 - q) + q * kMeanScenarioSize;
  if (unit() < dt / (cfg.task_spawn_interval * targets_per_event)) {
    if (unit() < q) {
      const auto kind = static_cast<ScenarioKind>(std::uniform_int_distribution<int>(0, 2)(s.rng));
      for (const auto& sp : scenario_generate(kind, s.rng, cfg)) {
        const auto delay_ticks = static_cast<std::int64_t>(std::llround(sp.delay * cfg.tick_rate));
        if (delay_ticks == 0) {
          spawned.push_back(add_target(s, cfg, TargetKind::Task, sp.x, sp.speed, true));
        } else {
          s.pending.push_back({s.tick + delay_ticks, sp.x, sp.speed});
        }
      }
    } else {
      const double x = std::uniform_real_distribution<double>(-half_w, half_w)(s.rng);
      const double v = std::uniform_real_distribution<double>(cfg.min_speed, cfg.max_speed)(s.rng);
      spawned.push_back(add_target(s, cfg, TargetKind::Task, x, v, false));
    }
  }
  if (unit() < dt / cfg.distractor_spawn_interval) {
    const double x = std::uniform_real_distribution<double>(-half_w, half_w)(s.rng);
    const double v = std::uniform_real_distribution<double>(cfg.min_speed, cfg.max_speed)(s.rng);
    spawned.push_back(add_target(s, cfg, TargetKind::Distractor, x, v, false));
  }
  return spawned;
}

struct TickInput {
  Vec2 tip_point = Vec2::Zero();
  bool trigger = false;
  bool laser_override = false;
  std::optional<TargetId> locked_target;
};

/// Which target the laser would hit: the locked one if set (and in range),
/// otherwise the nearest open task target strictly inside laser range.
inline std::optional<TargetId> laser_target(const GameState& s, const TickInput& in,
                                            const GameConfig& cfg) {
  if (in.locked_target) {
    const Target* t = s.find(*in.locked_target);
    if (t && t->is_open_task() && (t->position - in.tip_point).norm() < cfg.laser_range) {
      return t->id;
    }
    return std::nullopt;
  }
  std::optional<TargetId> best;
  double best_d = cfg.laser_range;
  for (const auto& t : s.targets) {
    if (!t.is_open_task()) continue;
    const double d = (t.position - in.tip_point).norm();
    if (d < best_d) {
      best_d = d;
      best = t.id;
    }
  }
  return best;
}

inline constexpr double kLaseEpsilon = 1e-9;

/// Advances the game by one fixed step. Finished targets from the previous
/// tick are purged first; samples are emitted on Completed/Failed.
inline std::vector<TargetSample> tick(GameState& s, const TickInput& in, const GameConfig& cfg) {
  std::erase_if(s.targets, [](const Target& t) { return t.state != TargetState::Falling; });
  const double dt = cfg.dt();
  ++s.tick;
  s.time = static_cast<double>(s.tick) * dt;

  for (auto& t : s.targets) t.position.y() -= t.speed * dt;

  std::vector<TargetSample> samples;
  if (in.trigger || in.laser_override) {
    if (auto id = laser_target(s, in, cfg)) {
      for (auto& t : s.targets) {
        if (t.id != *id) continue;
        t.accumulated_lase = std::min(t.required_lase_time, t.accumulated_lase + dt);
        if (t.accumulated_lase >= t.required_lase_time - kLaseEpsilon) {
          t.accumulated_lase = t.required_lase_time;
          t.state = TargetState::Completed;
          ++s.score.completed;
          samples.push_back({t.speed, s.mode, true, s.trial_id, s.time, t.id});
        }
      }
    }
  }
  const double bottom = cfg.bottom();
  for (auto& t : s.targets) {
    if (t.state != TargetState::Falling || t.position.y() > bottom) continue;
    if (t.kind == TargetKind::Task) {
      t.state = TargetState::Failed;
      ++s.score.failed;
      samples.push_back({t.speed, s.mode, false, s.trial_id, s.time, t.id});
    }
  }
  // Distractors leave silently.
  std::erase_if(s.targets, [bottom](const Target& t) {
    return t.kind == TargetKind::Distractor && t.position.y() <= bottom;
  });
  return samples;
}

/// One full game step: update, then spawn for the next tick.
inline std::vector<TargetSample> step(GameState& s, const TickInput& in, const GameConfig& cfg) {
  auto samples = tick(s, in, cfg);
  spawn_step(s, cfg);
  return samples;
}

/// Completed task targets over all task targets in the samples.
inline double performance(std::span<const TargetSample> samples) {
  if (samples.empty()) throw Error(ErrorKind::EmptySample, "performance of an empty sample set");
  const auto done = std::count_if(samples.begin(), samples.end(),
                                  [](const TargetSample& s) { return s.completed; });
  return static_cast<double>(done) / static_cast<double>(samples.size());
}

}  // namespace gazeattn::game
