#pragma once

// A simulated player. Each tick it decides which target it is working on,
// where its eyes are, where it points the handle and whether it pulls the
// trigger. Gaze reaches the robot only through a noisy, intermittently
// tracked measurement.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "gazeattn/game.hpp"
#include "gazeattn/gaze_models.hpp"
#include "gazeattn/geometry.hpp"
#include "gazeattn/mode.hpp"
#include "gazeattn/scene.hpp"

namespace gazeattn::user {

using game::GameConfig;
using game::GameState;
using game::Target;
using game::TargetId;
using geometry::Vec2;

/// Two-state tracker dropout chain (per tick transition probabilities).
struct DropoutParams {
  double to_untracked = 0.333584;
  double to_tracked = 0.334921;

  double stationary_untracked() const {
    const double s = to_untracked + to_tracked;
    return s > 0.0 ? to_untracked / s : 0.0;
  }
};

struct UserParams {
  double reaction_delay = 0.15;  // saccade latency
  double lookahead_lead = 0.4;
  /// Look ahead in every mode, not only when the robot holds a lock.
  bool lookahead_in_all_modes = true;
  double handle_speed_limit = 450.0;
  /// The hand starts moving toward a target this long after the eyes land on it.
  double hand_lag = 0.3;
  /// Chance that a newly appeared object draws a brief glance.
  double onset_glance_probability = 1.0;
  double glance_duration = 0.4;
  /// With a task-aware robot the user expects the tip to cover this much
  /// more than the handle alone.
  double assisted_reach = 150.0;
  /// Re-pick the earliest-deadline target every tick instead of finishing
  /// the current one first.
  bool preemptive_triage = true;
  double aim_jitter = 5.0;  // mm, per axis
  gaze_models::LinearErrorModel noise_model{};
  double noise_sd = 0.5;  // degrees
  double eye_distance = 700.0;
  DropoutParams dropout;
  /// Slave mode: how strongly the moving tip drags the user's gaze.
  double slave_gaze_pull = 0.3;
  std::uint64_t seed = 1;
};

inline void validate(const UserParams& p) {
  auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!prob(p.dropout.to_untracked) || !prob(p.dropout.to_tracked) || !prob(p.slave_gaze_pull) ||
      !prob(p.onset_glance_probability)) {
    throw Error(ErrorKind::ConfigInvalid, "user probabilities must lie in [0, 1]");
  }
  if (p.reaction_delay < 0.0 || p.lookahead_lead < 0.0 || p.aim_jitter < 0.0 || p.noise_sd < 0.0 ||
      p.hand_lag < 0.0 || p.glance_duration < 0.0 || p.assisted_reach < 0.0) {
    throw Error(ErrorKind::ConfigInvalid, "user delays and spreads must be non-negative");
  }
  if (!(p.handle_speed_limit > 0.0) || !(p.eye_distance > 0.0)) {
    throw Error(ErrorKind::ConfigInvalid, "handle speed and eye distance must be positive");
  }
}

struct UserTickOutput {
  Vec2 true_gaze_point = Vec2::Zero();
  std::optional<geometry::GazeRay> measured_gaze;
  /// Where the measured ray meets the screen plane (may lie off-screen).
  std::optional<Vec2> measured_point;
  Vec2 handle_aim_point = Vec2::Zero();
  bool trigger = false;
};

struct UserState {
  std::mt19937_64 rng;
  bool tracked = true;
  double time = 0.0;

  std::optional<TargetId> intent;
  std::optional<TargetId> fixated;
  Vec2 fixation_point = Vec2::Zero();

  bool saccade_pending = false;
  std::optional<TargetId> saccade_target;
  double saccade_since = 0.0;

  std::optional<TargetId> looked_ahead_for;
  double lookahead_until = 0.0;

  std::optional<TargetId> glance_target;
  double glance_start = 0.0;
  double glance_until = 0.0;
  TargetId noticed_up_to = 0;  // ids below this were already considered for a glance

  /// First fixation time per target.
  std::vector<std::pair<TargetId, double>> seen;
  Vec2 handle = Vec2::Zero();

  explicit UserState(std::uint64_t seed = 1) : rng(seed) {}

  std::optional<double> seen_at(TargetId id) const {
    for (const auto& [sid, t] : seen) {
      if (sid == id) return t;
    }
    return std::nullopt;
  }
  bool has_seen(TargetId id) const { return seen_at(id).has_value(); }
  /// Seen long enough ago for the hand to act on it.
  bool ready_to_act(TargetId id, double hand_lag) const {
    const auto t = seen_at(id);
    return t && time - *t >= hand_lag - 1e-9;
  }
};

// ------------------------------------------------------------- dropout

inline bool dropout_step(UserState& s, const DropoutParams& p) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(s.rng);
  s.tracked = s.tracked ? !(u < p.to_untracked) : (u < p.to_tracked);
  return s.tracked;
}

/// Closed form for the chain: share of all ticks that sit inside untracked
/// runs of at least `min_run` ticks. A tick's run length is size-biased
/// geometric, so P(run >= k) = (1-b)^(k-1) (1 + (k-1) b).
inline double long_gap_share(const DropoutParams& p, int min_run) {
  const double b = p.to_tracked;
  const double k = static_cast<double>(min_run);
  return p.stationary_untracked() * std::pow(1.0 - b, k - 1.0) * (1.0 + (k - 1.0) * b);
}

// ----------------------------------------------------------- gaze noise

struct NoisyGaze {
  geometry::GazeRay ray;
  std::optional<Vec2> point;
  double error_deg = 0.0;
};

/// Rotates the true gaze ray by |Normal(predict_error(shift), sd)| degrees in
/// a uniformly random direction and re-projects it onto the screen plane.
/// `gaze_shift` is the angle between the gaze and the ray to the robot tip.
inline NoisyGaze apply_gaze_noise(const Vec2& true_point, double gaze_shift,
                                  const UserParams& params, const Scene& scene,
                                  std::mt19937_64& rng) {
  const double mu = gaze_models::predict_error(params.noise_model, gaze_shift);
  double eps = mu;
  if (params.noise_sd > 0.0) eps = std::normal_distribution<double>(mu, params.noise_sd)(rng);
  eps = std::abs(eps);
  const double psi = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);

  const geometry::GazeRay truth = scene.ray_to(true_point);
  const geometry::Vec3 d = truth.direction;
  const geometry::Vec3 helper =
      std::abs(d.x()) < 0.9 ? geometry::Vec3::UnitX() : geometry::Vec3::UnitY();
  const geometry::Vec3 u = d.cross(helper).normalized();
  const geometry::Vec3 w = d.cross(u);
  const double e = geometry::deg_to_rad(eps);
  const geometry::Vec3 dir =
      (std::cos(e) * d + std::sin(e) * (std::cos(psi) * u + std::sin(psi) * w)).normalized();

  NoisyGaze out{geometry::GazeRay{truth.origin, dir, truth.frame}, std::nullopt, eps};
  out.point = geometry::ray_plane_intersection(out.ray, scene.screen, false);
  return out;
}

// ------------------------------------------------------------ decisions

/// `reach` is how far beyond the laser range the user expects the tip to
/// get without moving the handle.
inline double handle_travel_time(const Target& t, const Vec2& handle, const UserParams& p,
                                 const GameConfig& cfg, double reach = 0.0) {
  return std::max(0.0, (t.position - handle).norm() - cfg.laser_range - reach) /
         p.handle_speed_limit;
}

inline bool user_can_complete(const Target& t, const Vec2& handle, const UserParams& p,
                              const GameConfig& cfg, double reach = 0.0) {
  return t.is_open_task() && t.remaining_lase() <= t.time_to_bottom(cfg.bottom()) -
                                                       handle_travel_time(t, handle, p, cfg, reach);
}

/// The user's triage: earliest deadline among targets they can still finish.
inline std::optional<TargetId> choose_intent(const GameState& g, const Vec2& handle,
                                             const UserParams& p, const GameConfig& cfg,
                                             std::optional<TargetId> exclude = std::nullopt,
                                             double reach = 0.0) {
  const Target* best = nullptr;
  double best_deadline = 0.0, best_dist = 0.0;
  for (const auto& t : g.targets) {
    if (exclude && t.id == *exclude) continue;
    if (!user_can_complete(t, handle, p, cfg, reach)) continue;
    const double deadline = t.time_to_bottom(cfg.bottom());
    const double dist = (t.position - handle).norm();
    if (!best || deadline < best_deadline ||
        (deadline == best_deadline && (dist < best_dist || (dist == best_dist && t.id < best->id)))) {
      best = &t;
      best_deadline = deadline;
      best_dist = dist;
    }
  }
  return best ? std::optional<TargetId>(best->id) : std::nullopt;
}

inline constexpr double kDelayEpsilon = 1e-9;

/// One tick of the simulated player. `tip_point` is the robot tip as the
/// user sees it (last tick's position).
inline UserTickOutput user_step(const GameState& g, const Vec2& tip_point, BehaviorMode mode,
                                const UserParams& p, UserState& s, const GameConfig& cfg,
                                const Scene& scene, double dt) {
  s.time += dt;
  const bool task_aware_robot =
      mode == BehaviorMode::Autonomous || mode == BehaviorMode::Cooperative;
  const double reach = task_aware_robot ? p.assisted_reach : 0.0;

  // Intent: keep working on the current target while it is still doable,
  // unless the user re-triages every tick.
  if (s.intent) {
    const Target* t = g.find(*s.intent);
    if (!t || !user_can_complete(*t, s.handle, p, cfg, reach)) s.intent.reset();
  }
  if (!s.intent || p.preemptive_triage) s.intent = choose_intent(g, s.handle, p, cfg, std::nullopt, reach);
  const Target* intent = s.intent ? g.find(*s.intent) : nullptr;

  // Where the eyes should be.
  std::optional<TargetId> desired = s.intent;
  const bool lookahead = p.lookahead_in_all_modes || mode == BehaviorMode::Cooperative;
  if (lookahead && intent && s.looked_ahead_for != s.intent && intent->accumulated_lase > 0.0 &&
      intent->remaining_lase() <= p.lookahead_lead) {
    if (auto next = choose_intent(g, s.handle, p, cfg, s.intent, reach)) {
      // Anticipatory saccade: planned, so no reaction delay.
      s.looked_ahead_for = s.intent;
      s.lookahead_until = s.time + intent->remaining_lase();
      s.fixated = next;
      s.saccade_pending = false;
    }
  }
  if (intent && s.looked_ahead_for == s.intent && s.fixated != s.intent) {
    const bool next_alive = s.fixated && g.find(*s.fixated);
    if (s.time < s.lookahead_until + kDelayEpsilon && next_alive) desired = s.fixated;
  }

  // Onset glances: every new object gets one draw, in id order.
  for (const auto& t : g.targets) {
    if (t.id < s.noticed_up_to) continue;
    s.noticed_up_to = t.id + 1;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(s.rng);
    if (u < p.onset_glance_probability && !s.glance_target && t.id != s.intent) {
      s.glance_target = t.id;
      s.glance_start = s.time + p.reaction_delay;
      s.glance_until = s.glance_start + p.glance_duration;
    }
  }
  if (s.glance_target) {
    if (s.time >= s.glance_until - kDelayEpsilon || !g.find(*s.glance_target)) {
      s.glance_target.reset();
    } else if (s.time >= s.glance_start - kDelayEpsilon) {
      // The saccade latency was paid when the glance was scheduled.
      desired = s.glance_target;
      s.fixated = desired;
      s.saccade_pending = false;
    }
  }

  if (desired != s.fixated) {
    if (!s.saccade_pending || s.saccade_target != desired) {
      s.saccade_pending = true;
      s.saccade_target = desired;
      s.saccade_since = s.time;
    }
    if (s.time - s.saccade_since >= p.reaction_delay - kDelayEpsilon) {
      s.fixated = desired;
      s.saccade_pending = false;
      if (!desired) s.fixation_point = Vec2::Zero();
    }
  } else {
    s.saccade_pending = false;
  }
  if (s.fixated) {
    if (const Target* f = g.find(*s.fixated)) {
      s.fixation_point = f->position;
      if (!s.has_seen(f->id)) s.seen.emplace_back(f->id, s.time);
    }
  }

  UserTickOutput out;
  out.true_gaze_point = s.fixation_point;
  if (mode == BehaviorMode::Slave) {
    out.true_gaze_point += p.slave_gaze_pull * (tip_point - out.true_gaze_point);
  }

  if (dropout_step(s, p.dropout)) {
    const double shift = geometry::angular_shift(scene.ray_to(out.true_gaze_point).direction,
                                                 scene.ray_to(tip_point).direction);
    NoisyGaze noisy = apply_gaze_noise(out.true_gaze_point, shift, p, scene, s.rng);
    out.measured_gaze = noisy.ray;
    out.measured_point = noisy.point;
  }

  // The hand follows the eyes: aim only at targets looked at a while ago.
  const bool act = intent && s.ready_to_act(intent->id, p.hand_lag);
  if (act) {
    const Vec2 delta = intent->position - s.handle;
    const double dist = delta.norm();
    const double step = std::min(dist, p.handle_speed_limit * dt);
    if (dist > 0.0) s.handle += delta * (step / dist);
  }
  out.handle_aim_point = s.handle;
  if (p.aim_jitter > 0.0) {
    std::normal_distribution<double> jitter(0.0, p.aim_jitter);
    out.handle_aim_point += Vec2(jitter(s.rng), jitter(s.rng));
  }

  out.trigger = act && (intent->position - tip_point).norm() < cfg.laser_range;
  return out;
}

}  // namespace gazeattn::user
