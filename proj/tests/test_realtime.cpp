#include <gtest/gtest.h>

#include <random>

#include "gazeattn/realtime.hpp"

using namespace gazeattn;
using namespace gazeattn::realtime;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Protocol;
}

SessionConfig config(BehaviorMode mode, double duration = 80.0) {
  SessionConfig c;
  c.mode = mode;
  c.params.game.trial_duration = duration;
  return c;
}

InputMessage input(double t, Vec2 handle, std::optional<Vec2> gaze = std::nullopt, bool trigger = false) {
  InputMessage m;
  m.timestamp = t;
  m.handle_point = handle;
  m.gaze_point = gaze;
  m.trigger = trigger;
  return m;
}

}  // namespace

TEST(Coordinates, NormalisedRoundTrip) {
  game::GameConfig g;
  EXPECT_EQ(to_screen_mm(Vec2(0.5, 0.5), g), Vec2(0, 0));
  EXPECT_EQ(to_screen_mm(Vec2(0, 0), g), Vec2(-457.5, 257.5));
  EXPECT_EQ(to_screen_mm(Vec2(1, 1), g), Vec2(457.5, -257.5));
  const Vec2 p(123.0, -45.0);
  EXPECT_NEAR((to_screen_mm(to_normalised(p, g), g) - p).norm(), 0.0, 1e-9);
  EXPECT_EQ(clamp_unit(Vec2(-1, 2)), Vec2(0, 1));
  EXPECT_EQ(clamp_unit(Vec2(std::nan(""), 0.2)), Vec2(0.5, 0.2));
}

TEST(Registry, OpensPausedSessionsWithFreshIds) {
  SessionRegistry reg;
  const auto a = reg.open_session(config(BehaviorMode::Manual));
  const auto b = reg.open_session(config(BehaviorMode::Slave));
  EXPECT_NE(a, b);
  EXPECT_EQ(reg.size(), 2u);
  EXPECT_EQ(reg.get(a)->status(), SessionStatus::Paused);
  EXPECT_EQ(kind_of([&] { reg.step_and_broadcast(a); }), ErrorKind::InvalidState);
  EXPECT_EQ(kind_of([&] { reg.ingest_input(a, input(0, Vec2(0.5, 0.5))); }), ErrorKind::InvalidState);
  reg.close(a);
  EXPECT_EQ(kind_of([&] { reg.get(a); }), ErrorKind::UnknownSession);
  EXPECT_EQ(kind_of([&] { reg.close(a); }), ErrorKind::UnknownSession);
  EXPECT_EQ(kind_of([&] { reg.ingest_input(42, input(0, Vec2(0.5, 0.5))); }), ErrorKind::UnknownSession);
}

TEST(Registry, RejectsInvalidSnapshotRate) {
  SessionRegistry reg;
  auto c = config(BehaviorMode::Manual);
  c.snapshot_rate = 0.0;
  EXPECT_EQ(kind_of([&] { reg.open_session(c); }), ErrorKind::ConfigInvalid);
  c.snapshot_rate = 120.0;
  EXPECT_EQ(kind_of([&] { reg.open_session(c); }), ErrorKind::ConfigInvalid);
  EXPECT_EQ(reg.size(), 0u);
}

TEST(Session, LatestInputWins) {
  SessionRegistry reg;
  const auto id = reg.open_session(config(BehaviorMode::Manual));
  auto s = reg.get(id);
  s->start();
  reg.ingest_input(id, input(0.0, Vec2(0.1, 0.1)));
  reg.ingest_input(id, input(0.0, Vec2(0.75, 0.25)));
  const auto snap = reg.step_and_broadcast(id);
  const Vec2 expected = to_screen_mm(Vec2(0.75, 0.25), s->config().params.game);
  EXPECT_EQ(snap.handle, expected);
  EXPECT_EQ(snap.tip, expected);  // manual: the tip rides on the handle
  EXPECT_EQ(s->input_log().size(), 1u);
  // Nothing new: the last input is held.
  EXPECT_EQ(reg.step_and_broadcast(id).handle, expected);
}

TEST(Session, StaleInputsAreCountedAndDropped) {
  LiveSession s(1, config(BehaviorMode::Manual));
  s.start();
  for (int i = 0; i < 30; ++i) s.step();  // session clock 0.5 s
  s.submit(input(0.0, Vec2(0.9, 0.9)));
  EXPECT_EQ(s.stale_inputs(), 1u);
  EXPECT_EQ(s.step().handle, Vec2(0, 0));
  s.submit(input(0.45, Vec2(0.9, 0.9)));
  EXPECT_EQ(s.stale_inputs(), 1u);
  EXPECT_NE(s.step().handle, Vec2(0, 0));
}

TEST(Session, AutonomousPlaysWithoutInput) {
  LiveSession s(1, config(BehaviorMode::Autonomous));
  s.start();
  while (s.status() == SessionStatus::Running) s.step();
  EXPECT_GT(s.score().completed, 0u);
  EXPECT_EQ(s.state().game.tick, 4800);
}

TEST(Session, ManualWithoutInputCompletesNothingOffCentre) {
  LiveSession s(1, config(BehaviorMode::Manual, 20.0));
  s.start();
  while (s.status() == SessionStatus::Running) {
    const auto snap = s.step();
    EXPECT_EQ(snap.tip, snap.handle);
    EXPECT_FALSE(snap.laser_active);
  }
  EXPECT_EQ(s.score().completed, 0u);
}

TEST(Session, EndsAutomaticallyAtTrialDuration) {
  LiveSession s(1, config(BehaviorMode::Cooperative, 1.0));
  s.start();
  Snapshot last;
  int steps = 0;
  while (s.status() == SessionStatus::Running) {
    last = s.step();
    ++steps;
  }
  EXPECT_EQ(steps, 60);
  EXPECT_EQ(last.status, SessionStatus::Ended);
  EXPECT_EQ(kind_of([&] { s.step(); }), ErrorKind::InvalidState);
  EXPECT_EQ(kind_of([&] { s.start(); }), ErrorKind::InvalidState);
  s.end();
  EXPECT_EQ(s.status(), SessionStatus::Ended);
}

TEST(Session, SnapshotDecimation) {
  auto c = config(BehaviorMode::Manual, 1.0);
  LiveSession half(1, c);
  int due = 0;
  for (std::int64_t t = 1; t <= 60; ++t) due += half.snapshot_due(t);
  EXPECT_EQ(due, 30);
  c.snapshot_rate = 60.0;
  LiveSession full(2, c);
  for (std::int64_t t = 1; t <= 60; ++t) EXPECT_TRUE(full.snapshot_due(t));
  c.snapshot_rate = 7.0;
  LiveSession odd(3, c);
  EXPECT_TRUE(odd.snapshot_due(60));  // the final tick always reports
}

TEST(Session, ReplayReproducesTheGame) {
  auto c = config(BehaviorMode::Cooperative, 30.0);
  c.emulate_tracker = true;
  c.seed = 17;
  LiveSession live(3, c);
  live.start();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec2 hand(0.5, 0.5);
  while (live.status() == SessionStatus::Running) {
    hand = clamp_unit(hand + Vec2(u(rng) - 0.5, u(rng) - 0.5) * 0.02);
    const double t = live.state().game.time;
    live.submit(input(t, hand, Vec2(u(rng), u(rng) * 0.5), u(rng) < 0.5));
    live.step();
  }
  auto replay = replay_inputs(3, c, live.input_log());
  EXPECT_EQ(replay->score().completed, live.score().completed);
  EXPECT_EQ(replay->score().failed, live.score().failed);
  ASSERT_EQ(replay->samples().size(), live.samples().size());
  for (std::size_t i = 0; i < live.samples().size(); ++i) {
    EXPECT_EQ(replay->samples()[i].target_id, live.samples()[i].target_id);
    EXPECT_EQ(replay->samples()[i].completed, live.samples()[i].completed);
  }
  ASSERT_EQ(replay->tick_log().size(), live.tick_log().size());
  for (std::size_t i = 0; i < live.tick_log().size(); ++i) {
    EXPECT_EQ(replay->tick_log()[i].gaze_point, live.tick_log()[i].gaze_point);
  }
}

TEST(Session, EmulatedTrackerDropsGaze) {
  auto c = config(BehaviorMode::Slave, 20.0);
  c.emulate_tracker = true;
  LiveSession s(1, c);
  s.start();
  std::size_t lost = 0;
  while (s.status() == SessionStatus::Running) {
    s.submit(input(s.state().game.time, Vec2(0.5, 0.5), Vec2(0.3, 0.3)));
    lost += !s.step().gaze_marker.has_value();
  }
  const double share = double(lost) / 1200.0;
  EXPECT_NEAR(share, c.params.user.dropout.stationary_untracked(), 0.06);
}

TEST(Session, DwellProxyNeedsAStillPointer) {
  auto c = config(BehaviorMode::Slave, 5.0);
  c.gaze_source = GazeSource::DwellProxy;
  c.dwell_time = 0.25;
  LiveSession s(1, c);
  s.start();
  int first_marker = -1;
  for (int i = 0; i < 60; ++i) {
    s.submit(input(s.state().game.time, Vec2(0.3, 0.4)));
    if (s.step().gaze_marker && first_marker < 0) first_marker = i;
  }
  EXPECT_EQ(first_marker, 15);
  // A sweeping pointer never settles.
  LiveSession m(2, c);
  m.start();
  for (int i = 0; i < 60; ++i) {
    m.submit(input(m.state().game.time, Vec2(0.1 + 0.013 * i, 0.5)));
    EXPECT_FALSE(m.step().gaze_marker);
  }
}

TEST(Session, TrialResultMirrorsSession) {
  LiveSession s(9, config(BehaviorMode::Autonomous, 10.0));
  s.start();
  while (s.status() == SessionStatus::Running) s.step();
  const auto r = s.trial_result();
  EXPECT_EQ(r.spec.trial_id, 9u);
  EXPECT_EQ(r.ticks, 600);
  EXPECT_EQ(r.log.size(), 600u);
  const auto samples = sim::replay_game(s.config().params.game, r.spec.game_seed, 9,
                                        BehaviorMode::Autonomous, r.log);
  EXPECT_EQ(samples.size(), r.samples.size());
}

TEST(Pacer, CatchUpIsCappedAndNothingIsSkipped) {
  using Clock = FixedStepPacer::Clock;
  const auto t0 = Clock::now();
  FixedStepPacer p(60.0, t0);
  EXPECT_EQ(p.due(t0 - std::chrono::milliseconds(5)), 0);
  EXPECT_EQ(p.due(t0), 1);
  p.consumed(1);
  EXPECT_EQ(p.due(t0 + std::chrono::milliseconds(10)), 0);
  const auto late = t0 + std::chrono::milliseconds(200);  // 12 ticks owed
  EXPECT_EQ(p.due(late), FixedStepPacer::kMaxCatchUp);
  int total = 1;
  for (int round = 0; round < 5; ++round) {
    const int n = p.due(late);
    p.consumed(n);
    total += n;
  }
  EXPECT_EQ(total, 13);  // ticks 0..12 inclusive
  EXPECT_EQ(p.due(late), 0);
  EXPECT_GT(p.next_deadline(), late);
}
