#pragma once

// Attention estimation and the four behaviour modes.
//
// Attention is the intersection of where the user looks and which objects
// matter to the task: a gaze point near an open task target focuses it,
// distractors never do. Behaviour modes map the estimate, the robot's task
// knowledge and its own state to a per-tick command.

#include <cmath>
#include <optional>
#include <span>

#include "gazeattn/game.hpp"
#include "gazeattn/gaze_models.hpp"
#include "gazeattn/geometry.hpp"
#include "gazeattn/mode.hpp"

namespace gazeattn::attention {

using game::GameConfig;
using game::GameState;
using game::Target;
using game::TargetId;
using geometry::Vec2;

/// Screen-projected radius of the predicted gaze error at the trackable
/// limit: d * tan(error(27 deg)).
inline double default_association_radius(double eye_distance = 700.0) {
  const gaze_models::LinearErrorModel model{};
  return eye_distance * std::tan(geometry::deg_to_rad(gaze_models::predict_error(model, 27.0)));
}

struct AttentionConfig {
  /// Tolerance added to the target radius when associating gaze with a target.
  double association_radius = default_association_radius();
  /// How long an untracked gaze keeps the previous estimate alive.
  double hold_window = 0.15;
};

struct AttentionEstimate {
  std::optional<Vec2> gaze_screen_point;
  std::optional<TargetId> focused_target;
  double focus_age = 0.0;
  double untracked_time = 0.0;
  /// The tracker saw the eyes but the gaze ray missed the screen.
  bool off_screen = false;
};

inline constexpr double kTimeEpsilon = 1e-9;

/// `radius` is the largest gaze-to-target-centre distance that still counts
/// as looking at the target.
inline AttentionEstimate estimate_attention(const std::optional<geometry::GazeRay>& gaze,
                                            const geometry::ScreenPlane& screen,
                                            std::span<const Target> targets, double radius,
                                            const AttentionEstimate& previous, double dt,
                                            double hold_window = 0.15) {
  auto is_open = [&targets](TargetId id) {
    for (const auto& t : targets) {
      if (t.id == id) return t.is_open_task();
    }
    return false;
  };

  AttentionEstimate next;
  if (!gaze) {
    next.untracked_time = previous.untracked_time + dt;
    if (next.untracked_time <= hold_window + kTimeEpsilon) {
      next.gaze_screen_point = previous.gaze_screen_point;
      next.off_screen = previous.off_screen;
      if (previous.focused_target && is_open(*previous.focused_target)) {
        next.focused_target = previous.focused_target;
        next.focus_age = previous.focus_age + dt;
      }
    }
    return next;
  }

  next.gaze_screen_point = geometry::ray_plane_intersection(*gaze, screen, true);
  if (!next.gaze_screen_point) {
    next.off_screen = true;
    return next;
  }
  double best = radius;
  for (const auto& t : targets) {
    if (!t.is_open_task()) continue;
    const double d = (t.position - *next.gaze_screen_point).norm();
    if (d <= best) {
      if (d == best && next.focused_target && *next.focused_target < t.id) continue;
      best = d;
      next.focused_target = t.id;
    }
  }
  if (next.focused_target) {
    next.focus_age = previous.focused_target == next.focused_target ? previous.focus_age + dt : 0.0;
  }
  return next;
}

// ---------------------------------------------------------------- robot

struct RobotParams {
  double tip_speed_limit = 1200.0;
  double workspace_radius = 150.0;
  /// Cooperative aiming: 1 snaps the tip onto the locked target, 0 leaves it
  /// on the gaze point.
  double aim_blend = 1.0;
};

struct RobotState {
  Vec2 handle_point = Vec2::Zero();
  Vec2 tip_point = Vec2::Zero();
  double tip_speed_limit = 1200.0;
  double workspace_radius = 150.0;
  std::optional<TargetId> locked_target;

  static RobotState at(const Vec2& handle, const RobotParams& p) {
    return RobotState{handle, handle, p.tip_speed_limit, p.workspace_radius, std::nullopt};
  }
};

struct RobotCommand {
  /// Empty means hold: the tip keeps its pose relative to the handle.
  std::optional<Vec2> tip_screen_target;
  bool laser_override = false;
  std::optional<TargetId> locked_target;
};

/// The tip is carried with the handle.
inline RobotState carry(RobotState r, const Vec2& handle) {
  r.tip_point += handle - r.handle_point;
  r.handle_point = handle;
  return r;
}

inline Vec2 clamp_to_disk(const Vec2& p, const Vec2& centre, double radius) {
  const Vec2 d = p - centre;
  const double n = d.norm();
  return n <= radius ? p : Vec2(centre + d * (radius / n));
}

/// Time the tip needs to bring a target inside laser range.
inline double tip_travel_time(const Target& t, const RobotState& r, const GameConfig& cfg) {
  return std::max(0.0, (t.position - r.tip_point).norm() - cfg.laser_range) / r.tip_speed_limit;
}

/// Remaining lase time fits in the time left after the tip gets there.
inline bool robot_can_complete(const Target& t, const RobotState& r, const GameConfig& cfg) {
  return t.is_open_task() &&
         t.remaining_lase() <= t.time_to_bottom(cfg.bottom()) - tip_travel_time(t, r, cfg);
}

/// Earliest deadline first over open, still-completable task targets.
/// Ties: nearer to the tip, then lower id.
inline std::optional<TargetId> select_target_autonomous(const GameState& g, const RobotState& r,
                                                        const GameConfig& cfg) {
  const Target* best = nullptr;
  double best_deadline = 0.0, best_dist = 0.0;
  for (const auto& t : g.targets) {
    if (!robot_can_complete(t, r, cfg)) continue;
    const double deadline = t.time_to_bottom(cfg.bottom());
    const double dist = (t.position - r.tip_point).norm();
    if (!best || deadline < best_deadline ||
        (deadline == best_deadline &&
         (dist < best_dist || (dist == best_dist && t.id < best->id)))) {
      best = &t;
      best_deadline = deadline;
      best_dist = dist;
    }
  }
  return best ? std::optional<TargetId>(best->id) : std::nullopt;
}

inline RobotCommand behavior_step(BehaviorMode mode, const AttentionEstimate& attention,
                                  const GameState& g, const RobotState& robot,
                                  const GameConfig& cfg, double aim_blend = 1.0) {
  RobotCommand cmd;
  auto in_workspace = [&robot](const Vec2& p) {
    return clamp_to_disk(p, robot.handle_point, robot.workspace_radius);
  };
  switch (mode) {
    case BehaviorMode::Manual:
      return cmd;

    case BehaviorMode::Slave:
      if (attention.gaze_screen_point) cmd.tip_screen_target = in_workspace(*attention.gaze_screen_point);
      return cmd;

    case BehaviorMode::Autonomous: {
      std::optional<TargetId> plan;
      if (robot.locked_target) {
        const Target* t = g.find(*robot.locked_target);
        if (t && robot_can_complete(*t, robot, cfg)) plan = t->id;
      }
      if (!plan) plan = select_target_autonomous(g, robot, cfg);
      if (!plan) return cmd;
      const Target* t = g.find(*plan);
      cmd.locked_target = plan;
      cmd.tip_screen_target = in_workspace(t->position);
      cmd.laser_override = (t->position - robot.tip_point).norm() < cfg.laser_range;
      return cmd;
    }

    case BehaviorMode::Cooperative: {
      auto aim_at = [&](const Target& t) {
        Vec2 aim = t.position;
        if (attention.gaze_screen_point) {
          aim = *attention.gaze_screen_point + aim_blend * (t.position - *attention.gaze_screen_point);
        }
        cmd.tip_screen_target = in_workspace(aim);
        cmd.locked_target = t.id;
        cmd.laser_override = true;
      };
      if (robot.locked_target) {
        const Target* t = g.find(*robot.locked_target);
        if (t && robot_can_complete(*t, robot, cfg)) {
          aim_at(*t);
          return cmd;
        }
      }
      if (attention.focused_target) {
        const Target* t = g.find(*attention.focused_target);
        if (t && robot_can_complete(*t, robot, cfg)) {
          aim_at(*t);
          return cmd;
        }
      }
      if (attention.gaze_screen_point) cmd.tip_screen_target = in_workspace(*attention.gaze_screen_point);
      return cmd;
    }
  }
  return cmd;
}

/// Velocity-limited pursuit of the commanded point, kept inside the
/// workspace disk around the handle. The lock is taken from the command.
inline RobotState move_tip(const RobotState& robot, const RobotCommand& cmd, double dt) {
  RobotState next = robot;
  next.locked_target = cmd.locked_target;
  if (!cmd.tip_screen_target) {
    next.tip_point = clamp_to_disk(robot.tip_point, robot.handle_point, robot.workspace_radius);
    return next;
  }
  const Vec2 delta = *cmd.tip_screen_target - robot.tip_point;
  const double dist = delta.norm();
  if (dist == 0.0) return next;
  const Vec2 dir = delta / dist;
  double step = std::min(dist, robot.tip_speed_limit * dt);

  // Stop where the segment leaves the workspace disk.
  const Vec2 rel = robot.tip_point - robot.handle_point;
  const double R = robot.workspace_radius;
  if ((rel + step * dir).norm() > R) {
    const double b = rel.dot(dir);
    const double c = rel.squaredNorm() - R * R;
    const double disc = b * b - c;
    if (c <= 0.0 && disc >= 0.0) {
      step = std::clamp(-b + std::sqrt(disc), 0.0, step);
      next.tip_point = robot.tip_point + step * dir;
    } else {
      next.tip_point = clamp_to_disk(robot.tip_point + step * dir, robot.handle_point, R);
    }
    return next;
  }
  next.tip_point = robot.tip_point + step * dir;
  return next;
}

}  // namespace gazeattn::attention
