#pragma once

// Couples user input, attention, behaviour, robot and game into one fixed
// tick. Headless trials and live sessions both go through `advance`.

#include <cstdint>
#include <optional>
#include <vector>

#include "gazeattn/attention.hpp"
#include "gazeattn/game.hpp"
#include "gazeattn/mode.hpp"
#include "gazeattn/scene.hpp"
#include "gazeattn/synthetic_user.hpp"

namespace gazeattn::sim {

using geometry::Vec2;

struct SimulationParams {
  game::GameConfig game;
  user::UserParams user;
  attention::AttentionConfig attention;
  attention::RobotParams robot;
};

inline void validate(const SimulationParams& p) {
  game::validate(p.game);
  user::validate(p.user);
  if (!(p.attention.association_radius > 0.0) || p.attention.hold_window < 0.0) {
    throw Error(ErrorKind::ConfigInvalid, "attention radius must be positive, hold window >= 0");
  }
  if (!(p.robot.tip_speed_limit > 0.0) || p.robot.workspace_radius < 0.0 ||
      p.robot.aim_blend < 0.0 || p.robot.aim_blend > 1.0) {
    throw Error(ErrorKind::ConfigInvalid, "robot parameters out of range");
  }
}

/// Everything the outside world feeds into one tick.
struct UserInput {
  Vec2 handle_point = Vec2::Zero();
  std::optional<geometry::GazeRay> gaze;  // empty: tracker lost the eyes
  bool trigger = false;
};

struct CoupledState {
  game::GameState game;
  attention::RobotState robot;
  attention::AttentionEstimate attention;
  BehaviorMode mode = BehaviorMode::Manual;
};

inline CoupledState start_state(const SimulationParams& p, BehaviorMode mode,
                                std::uint64_t game_seed, std::uint64_t trial_id) {
  CoupledState s;
  s.game = game::new_game(p.game, game_seed, trial_id, mode);
  s.robot = attention::RobotState::at(Vec2::Zero(), p.robot);
  s.mode = mode;
  return s;
}

struct TickOutcome {
  game::TickInput game_input;
  attention::RobotCommand command;
  std::vector<game::TargetSample> samples;
};

inline TickOutcome advance(CoupledState& s, const UserInput& in, const SimulationParams& p,
                           const Scene& scene) {
  const double dt = p.game.dt();
  s.robot = attention::carry(s.robot, in.handle_point);
  s.attention = attention::estimate_attention(
      in.gaze, scene.screen, s.game.targets, p.game.target_radius + p.attention.association_radius,
      s.attention, dt, p.attention.hold_window);

  TickOutcome out;
  out.command =
      attention::behavior_step(s.mode, s.attention, s.game, s.robot, p.game, p.robot.aim_blend);
  s.robot = attention::move_tip(s.robot, out.command, dt);
  out.game_input = game::TickInput{s.robot.tip_point, in.trigger, out.command.laser_override,
                                   out.command.locked_target};
  out.samples = game::step(s.game, out.game_input, p.game);
  return out;
}

// ---------------------------------------------------------------- trials

struct TrialSpec {
  std::uint64_t trial_id = 0;
  BehaviorMode mode = BehaviorMode::Manual;
  std::uint64_t game_seed = 0;
  std::uint64_t user_seed = 0;
  int participant = 0;
  int repetition = 0;
};

/// Per-tick record of what the game saw; enough to replay the game exactly.
struct TickRecord {
  std::int64_t tick = 0;
  game::TickInput input;
  Vec2 handle_point = Vec2::Zero();
  std::optional<Vec2> gaze_point;
  bool tracked = false;
};

struct TrialResult {
  TrialSpec spec;
  std::vector<game::TargetSample> samples;
  game::ScoreCounters score;
  std::int64_t ticks = 0;
  std::int64_t untracked_ticks = 0;
  std::vector<TickRecord> log;
};

inline TrialResult run_trial(const TrialSpec& spec, const SimulationParams& p,
                             bool keep_log = false) {
  validate(p);
  const Scene scene = Scene::for_game(p.game, p.user.eye_distance);
  CoupledState s = start_state(p, spec.mode, spec.game_seed, spec.trial_id);
  user::UserState us(spec.user_seed);

  TrialResult r;
  r.spec = spec;
  const std::int64_t n = p.game.total_ticks();
  if (keep_log) r.log.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const user::UserTickOutput u =
        user::user_step(s.game, s.robot.tip_point, spec.mode, p.user, us, p.game, scene, p.game.dt());
    const UserInput in{u.handle_aim_point, u.measured_gaze, u.trigger};
    TickOutcome o = advance(s, in, p, scene);
    if (!u.measured_gaze) ++r.untracked_ticks;
    if (keep_log) {
      r.log.push_back({s.game.tick, o.game_input, u.handle_aim_point, u.measured_point,
                       u.measured_gaze.has_value()});
    }
    r.samples.insert(r.samples.end(), o.samples.begin(), o.samples.end());
  }
  r.ticks = n;
  r.score = s.game.score;
  return r;
}

/// Re-runs only the game from its seed and the logged per-tick inputs.
inline std::vector<game::TargetSample> replay_game(const game::GameConfig& cfg,
                                                   std::uint64_t game_seed, std::uint64_t trial_id,
                                                   BehaviorMode mode,
                                                   const std::vector<TickRecord>& log,
                                                   game::ScoreCounters* final_score = nullptr) {
  game::GameState g = game::new_game(cfg, game_seed, trial_id, mode);
  std::vector<game::TargetSample> samples;
  for (const auto& rec : log) {
    auto s = game::step(g, rec.input, cfg);
    samples.insert(samples.end(), s.begin(), s.end());
  }
  if (final_score) *final_score = g.score;
  return samples;
}

}  // namespace gazeattn::sim
