#pragma once

// Live sessions for human play. A session owns one coupled simulation and a
// latest-wins input mailbox; whoever drives the clock calls `step` at the
// tick rate. Pointer input arrives in normalised screen coordinates.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gazeattn/experiment.hpp"
#include "gazeattn/simulation.hpp"

namespace gazeattn::realtime {

using geometry::Vec2;

enum class GazeSource { PointerProxy, DwellProxy };

inline const char* to_string(GazeSource g) {
  return g == GazeSource::PointerProxy ? "pointer-proxy" : "dwell-proxy";
}

inline GazeSource parse_gaze_source(const std::string& s) {
  if (s == "pointer-proxy") return GazeSource::PointerProxy;
  if (s == "dwell-proxy") return GazeSource::DwellProxy;
  throw Error(ErrorKind::ConfigInvalid, "unknown gaze source '" + s + "'");
}

struct SessionConfig {
  BehaviorMode mode = BehaviorMode::Cooperative;
  sim::SimulationParams params;
  GazeSource gaze_source = GazeSource::PointerProxy;
  /// Dwell proxy: the pointer counts as a fixation once it rests inside
  /// `dwell_radius` for `dwell_time`.
  double dwell_time = 0.3;
  double dwell_radius = 20.0;
  double snapshot_rate = 30.0;
  /// Pass proxy gaze through the tracker dropout and noise models.
  bool emulate_tracker = false;
  std::uint64_t seed = 1;
};

inline void validate(const SessionConfig& c) {
  sim::validate(c.params);
  if (!(c.snapshot_rate > 0.0) || c.snapshot_rate > c.params.game.tick_rate) {
    throw Error(ErrorKind::ConfigInvalid, "snapshot rate must lie in (0, tick rate]");
  }
  if (c.dwell_time < 0.0 || !(c.dwell_radius > 0.0)) {
    throw Error(ErrorKind::ConfigInvalid, "dwell time must be >= 0 and dwell radius > 0");
  }
}

/// Client input. Points are normalised: (0,0) top-left, (1,1) bottom-right.
/// `timestamp` is the sender's reading of the session clock in seconds.
struct InputMessage {
  double timestamp = 0.0;
  Vec2 handle_point = Vec2(0.5, 0.5);
  std::optional<Vec2> gaze_point;
  bool trigger = false;
};

inline Vec2 clamp_unit(const Vec2& p) {
  return Vec2(std::clamp(std::isfinite(p.x()) ? p.x() : 0.5, 0.0, 1.0),
              std::clamp(std::isfinite(p.y()) ? p.y() : 0.5, 0.0, 1.0));
}

inline InputMessage clamped(InputMessage m) {
  m.handle_point = clamp_unit(m.handle_point);
  if (m.gaze_point) m.gaze_point = clamp_unit(*m.gaze_point);
  return m;
}

/// Normalised pointer coordinates to screen millimetres (origin at centre, y up).
inline Vec2 to_screen_mm(const Vec2& uv, const game::GameConfig& cfg) {
  return Vec2((uv.x() - 0.5) * cfg.screen_width, (0.5 - uv.y()) * cfg.screen_height);
}

inline Vec2 to_normalised(const Vec2& mm, const game::GameConfig& cfg) {
  return Vec2(mm.x() / cfg.screen_width + 0.5, 0.5 - mm.y() / cfg.screen_height);
}

enum class SessionStatus { Paused, Running, Ended };

inline const char* to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Paused: return "paused";
    case SessionStatus::Running: return "running";
    case SessionStatus::Ended: return "ended";
  }
  return "?";
}

struct TargetView {
  game::TargetId id = 0;
  game::TargetKind kind = game::TargetKind::Task;
  Vec2 position = Vec2::Zero();
  double progress = 0.0;  // accumulated / required lase time
  game::TargetState state = game::TargetState::Falling;

  bool operator==(const TargetView&) const = default;
};

struct Snapshot {
  std::int64_t tick = 0;
  double time = 0.0;
  std::vector<TargetView> targets;
  Vec2 tip = Vec2::Zero();
  Vec2 handle = Vec2::Zero();
  std::optional<game::TargetId> locked_target;
  std::optional<Vec2> gaze_marker;
  std::optional<game::TargetId> focused_target;
  bool laser_active = false;
  game::ScoreCounters score;
  BehaviorMode mode = BehaviorMode::Manual;
  SessionStatus status = SessionStatus::Paused;

  bool operator==(const Snapshot& o) const {
    return tick == o.tick && time == o.time && targets == o.targets && tip == o.tip &&
           handle == o.handle && locked_target == o.locked_target && gaze_marker == o.gaze_marker &&
           focused_target == o.focused_target && laser_active == o.laser_active &&
           score.completed == o.score.completed && score.failed == o.score.failed &&
           score.total_spawned == o.score.total_spawned &&
           score.scenario_spawned == o.score.scenario_spawned &&
           score.distractors_spawned == o.score.distractors_spawned && mode == o.mode &&
           status == o.status;
  }
};

inline constexpr double kStaleAfter = 0.2;  // seconds

using SessionId = std::uint64_t;

/// One live game. `submit` may be called from any thread; everything else
/// belongs to the thread running the tick loop.
class LiveSession {
 public:
  LiveSession(SessionId id, SessionConfig cfg)
      : id_(id),
        cfg_((validate(cfg), std::move(cfg))),
        scene_(Scene::for_game(cfg_.params.game, cfg_.params.user.eye_distance)),
        state_(sim::start_state(cfg_.params, cfg_.mode, cfg_.seed, id)),
        tracker_(experiment::mix_seed(cfg_.seed ^ 0x747261636BULL)) {
    last_input_.handle_point = Vec2(0.5, 0.5);
  }

  SessionId id() const { return id_; }
  const SessionConfig& config() const { return cfg_; }
  const Scene& scene() const { return scene_; }

  SessionStatus status() const {
    std::lock_guard lock(mutex_);
    return status_;
  }

  void start() {
    std::lock_guard lock(mutex_);
    if (status_ == SessionStatus::Ended) throw Error(ErrorKind::InvalidState, "session has ended");
    status_ = SessionStatus::Running;
  }

  /// Ends the session early (or again; idempotent).
  void end() {
    std::lock_guard lock(mutex_);
    status_ = SessionStatus::Ended;
  }

  /// Latest-wins mailbox. Inputs stamped more than `kStaleAfter` behind the
  /// session clock are dropped and counted.
  void submit(const InputMessage& msg) {
    std::lock_guard lock(mutex_);
    if (status_ != SessionStatus::Running) {
      throw Error(ErrorKind::InvalidState, "session is not running");
    }
    if (session_time_ - msg.timestamp > kStaleAfter) {
      ++stale_inputs_;
      return;
    }
    mailbox_ = clamped(msg);
  }

  std::size_t stale_inputs() const {
    std::lock_guard lock(mutex_);
    return stale_inputs_;
  }

  /// Advances one tick using the newest input (or the last one applied when
  /// nothing new arrived). Returns the post-tick snapshot.
  Snapshot step() {
    InputMessage in;
    {
      std::lock_guard lock(mutex_);
      if (status_ != SessionStatus::Running) {
        throw Error(ErrorKind::InvalidState, "session is not running");
      }
      if (mailbox_) {
        last_input_ = *mailbox_;
        mailbox_.reset();
      }
      in = last_input_;
    }
    apply(in);
    {
      std::lock_guard lock(mutex_);
      session_time_ = state_.game.time;
      if (state_.game.tick >= cfg_.params.game.total_ticks()) status_ = SessionStatus::Ended;
    }
    return snapshot();
  }

  /// Same pipeline without the mailbox; used for replays.
  void apply(const InputMessage& raw) {
    const InputMessage in = clamped(raw);
    const auto& gcfg = cfg_.params.game;
    sim::UserInput ui;
    ui.handle_point = to_screen_mm(in.handle_point, gcfg);
    ui.trigger = in.trigger;

    std::optional<Vec2> gaze;
    if (cfg_.gaze_source == GazeSource::PointerProxy) {
      if (in.gaze_point) gaze = to_screen_mm(*in.gaze_point, gcfg);
    } else {
      gaze = dwell(ui.handle_point, gcfg.dt());
    }
    std::optional<Vec2> marker = gaze;
    if (gaze) {
      ui.gaze = scene_.ray_to(*gaze);
      if (cfg_.emulate_tracker) {
        const auto& up = cfg_.params.user;
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(tracker_);
        tracked_ = tracked_ ? !(u < up.dropout.to_untracked) : (u < up.dropout.to_tracked);
        if (!tracked_) {
          ui.gaze.reset();
          marker.reset();
        } else {
          const double shift = geometry::angular_shift(ui.gaze->direction,
                                                       scene_.ray_to(state_.robot.tip_point).direction);
          auto noisy = user::apply_gaze_noise(*gaze, shift, up, scene_, tracker_);
          ui.gaze = noisy.ray;
          marker = noisy.point;
        }
      }
    }

    const sim::TickOutcome out = sim::advance(state_, ui, cfg_.params, scene_);
    inputs_.push_back(in);
    log_.push_back({state_.game.tick, out.game_input, ui.handle_point, marker, ui.gaze.has_value()});
    samples_.insert(samples_.end(), out.samples.begin(), out.samples.end());
    laser_active_ = out.game_input.trigger || out.game_input.laser_override;
    gaze_marker_ = marker;
  }

  Snapshot snapshot() const {
    Snapshot s;
    s.tick = state_.game.tick;
    s.time = state_.game.time;
    for (const auto& t : state_.game.targets) {
      s.targets.push_back({t.id, t.kind, t.position,
                           t.required_lase_time > 0.0 ? t.accumulated_lase / t.required_lase_time : 0.0,
                           t.state});
    }
    s.tip = state_.robot.tip_point;
    s.handle = state_.robot.handle_point;
    s.locked_target = state_.robot.locked_target;
    s.gaze_marker = gaze_marker_;
    s.focused_target = state_.attention.focused_target;
    s.laser_active = laser_active_;
    s.score = state_.game.score;
    s.mode = cfg_.mode;
    s.status = status();
    return s;
  }

  /// Emit a snapshot after this tick? Decimates the tick rate to the
  /// snapshot rate; the final tick always gets one.
  bool snapshot_due(std::int64_t tick) const {
    const auto& g = cfg_.params.game;
    if (tick >= g.total_ticks()) return true;
    const double per = g.tick_rate / cfg_.snapshot_rate;
    const auto k = static_cast<std::int64_t>(std::floor(tick / per + 1e-9));
    const auto k_prev = static_cast<std::int64_t>(std::floor((tick - 1) / per + 1e-9));
    return k != k_prev;
  }

  const std::vector<InputMessage>& input_log() const { return inputs_; }
  const std::vector<sim::TickRecord>& tick_log() const { return log_; }
  const std::vector<game::TargetSample>& samples() const { return samples_; }
  const game::ScoreCounters& score() const { return state_.game.score; }
  const sim::CoupledState& state() const { return state_; }

  /// The session in headless form, for the trial-log writer.
  sim::TrialResult trial_result() const {
    sim::TrialResult r;
    r.spec.trial_id = id_;
    r.spec.mode = cfg_.mode;
    r.spec.game_seed = cfg_.seed;
    r.samples = samples_;
    r.score = state_.game.score;
    r.ticks = state_.game.tick;
    r.untracked_ticks = std::count_if(log_.begin(), log_.end(), [](const auto& t) { return !t.tracked; });
    r.log = log_;
    return r;
  }

 private:
  std::optional<Vec2> dwell(const Vec2& pointer, double dt) {
    if (!dwell_anchor_ || (pointer - *dwell_anchor_).norm() > cfg_.dwell_radius) {
      dwell_anchor_ = pointer;
      dwell_for_ = 0.0;
    } else {
      dwell_for_ += dt;
    }
    if (dwell_for_ + 1e-9 >= cfg_.dwell_time) return dwell_anchor_;
    return std::nullopt;
  }

  SessionId id_;
  SessionConfig cfg_;
  Scene scene_;
  sim::CoupledState state_;
  std::mt19937_64 tracker_;
  bool tracked_ = true;

  std::optional<Vec2> dwell_anchor_;
  double dwell_for_ = 0.0;

  mutable std::mutex mutex_;
  SessionStatus status_ = SessionStatus::Paused;
  std::optional<InputMessage> mailbox_;
  InputMessage last_input_;
  double session_time_ = 0.0;
  std::size_t stale_inputs_ = 0;

  std::vector<InputMessage> inputs_;
  std::vector<sim::TickRecord> log_;
  std::vector<game::TargetSample> samples_;
  bool laser_active_ = false;
  std::optional<Vec2> gaze_marker_;
};

/// Re-runs a session headlessly from its config and per-tick input log.
inline std::unique_ptr<LiveSession> replay_inputs(SessionId id, const SessionConfig& cfg,
                                                  const std::vector<InputMessage>& inputs) {
  auto s = std::make_unique<LiveSession>(id, cfg);
  for (const auto& in : inputs) s->apply(in);
  return s;
}

// ------------------------------------------------------------- registry

class SessionRegistry {
 public:
  SessionId open_session(const SessionConfig& cfg) {
    validate(cfg);
    std::lock_guard lock(mutex_);
    const SessionId id = next_id_++;
    sessions_.emplace(id, std::make_shared<LiveSession>(id, cfg));
    return id;
  }

  std::shared_ptr<LiveSession> get(SessionId id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) {
      throw Error(ErrorKind::UnknownSession, "no session " + std::to_string(id));
    }
    return it->second;
  }

  void ingest_input(SessionId id, const InputMessage& msg) { get(id)->submit(msg); }

  Snapshot step_and_broadcast(SessionId id) { return get(id)->step(); }

  void close(SessionId id) {
    std::lock_guard lock(mutex_);
    if (sessions_.erase(id) == 0) {
      throw Error(ErrorKind::UnknownSession, "no session " + std::to_string(id));
    }
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::map<SessionId, std::shared_ptr<LiveSession>> sessions_;
  SessionId next_id_ = 1;
};

// ---------------------------------------------------------------- pacing

/// Wall-clock pacing for a fixed-step loop. A late wake-up runs at most
/// `kMaxCatchUp` ticks back to back; the rest carry to the next wake-up.
/// Ticks are never skipped.
class FixedStepPacer {
 public:
  using Clock = std::chrono::steady_clock;
  static constexpr int kMaxCatchUp = 5;

  FixedStepPacer(double tick_rate, Clock::time_point start)
      : period_(std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / tick_rate))),
        start_(start) {}

  /// Ticks owed at `now`, capped.
  int due(Clock::time_point now) const {
    if (now < start_) return 0;
    const auto owed = (now - start_) / period_ + 1 - done_;
    return static_cast<int>(std::clamp<std::int64_t>(owed, 0, kMaxCatchUp));
  }

  void consumed(int n) { done_ += n; }
  std::int64_t done() const { return done_; }

  Clock::time_point next_deadline() const { return start_ + period_ * done_; }

 private:
  Clock::duration period_;
  Clock::time_point start_;
  std::int64_t done_ = 0;
};

}  // namespace gazeattn::realtime
