#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "gazeattn/game.hpp"

using namespace gazeattn;
using namespace gazeattn::game;

namespace {

GameConfig quiet() {
  GameConfig c;
  c.task_spawn_interval = 1e9;
  c.distractor_spawn_interval = 1e9;
  return c;
}

}  // namespace

TEST(LaseTime, Law) {
  GameConfig c;
  EXPECT_DOUBLE_EQ(required_lase_time(200.0, c), 1.2);
  EXPECT_DOUBLE_EQ(required_lase_time(300.0, c), 0.8);
  EXPECT_DOUBLE_EQ(required_lase_time(150.0, c), 2.0 * required_lase_time(300.0, c));
  EXPECT_DOUBLE_EQ(required_lase_time(1000.0, c), 0.3);  // clamped
  EXPECT_DOUBLE_EQ(required_lase_time(70.0, c), 2.0);
  EXPECT_THROW(required_lase_time(0.0, c), Error);
}

TEST(LaseTime, FastestTargetStillCompletable) {
  GameConfig c;
  const double tau = required_lase_time(490.0, c);
  EXPECT_NEAR(tau, 0.4898, 1e-4);
  EXPECT_LT(tau, c.screen_height / 490.0);
}

TEST(GameConfig, ValidationRejectsImpossibleLaseTimes) {
  GameConfig c;
  c.lase.reference_time = 5.0;
  try {
    validate(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigInvalid);
  }
  GameConfig bad;
  bad.scenario_fraction = 1.5;
  EXPECT_THROW(validate(bad), Error);
  GameConfig neg;
  neg.tick_rate = 0;
  EXPECT_THROW(validate(neg), Error);
}

TEST(GameConfig, DefaultsMatchScreen) {
  GameConfig c;
  // 16:9 at 1050 mm diagonal
  EXPECT_NEAR(std::hypot(c.screen_width, c.screen_height), 1050.0, 5.0);
  EXPECT_EQ(c.total_ticks(), 4800);
}

TEST(Scenario, LineFormation) {
  GameConfig c;
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    auto s = scenario_generate(ScenarioKind::LineFormation, rng, c);
    ASSERT_GE(s.size(), 3u);
    ASSERT_LE(s.size(), 5u);
    const double gap = s[1].x - s[0].x;
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_DOUBLE_EQ(s[i].speed, s[0].speed);
      EXPECT_EQ(s[i].delay, 0.0);
      if (i > 0) {
        EXPECT_NEAR(s[i].x - s[i - 1].x, gap, 1e-9);
      }
      EXPECT_LE(std::abs(s[i].x), 0.5 * c.screen_width - c.target_radius + 1e-9);
    }
  }
}

TEST(Scenario, TriangleFormation) {
  GameConfig c;
  std::mt19937_64 rng(2);
  auto s = scenario_generate(ScenarioKind::TriangleFormation, rng, c);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_DOUBLE_EQ(s[0].speed, s[2].speed);
  EXPECT_DOUBLE_EQ(s[1].speed, s[2].speed);
  EXPECT_NEAR(s[2].x, 0.5 * (s[0].x + s[1].x), 1e-9);
  EXPECT_NEAR(s[2].delay * s[2].speed, 0.5 * (s[1].x - s[0].x) * std::sqrt(3.0), 1e-9);
}

TEST(Scenario, OvertakeCrossesBeforeBottom) {
  GameConfig c;
  std::mt19937_64 rng(3);
  for (int k = 0; k < 200; ++k) {
    auto s = scenario_generate(ScenarioKind::Overtake, rng, c);
    ASSERT_EQ(s.size(), 2u);
    const double vs = s[0].speed, vf = s[1].speed;
    ASSERT_GT(vf, vs);
    EXPECT_EQ(s[0].x, s[1].x);
    // At the fast one's spawn the slow one is vs*delay below the top.
    const double gap = vs * s[1].delay;
    const double crossing = gap / (vf - vs);
    const double slow_remaining = (c.screen_height - gap) / vs;
    EXPECT_LT(crossing, slow_remaining);
  }
}

TEST(Spawn, ZeroFractionIsAllRandom) {
  GameConfig c;
  c.scenario_fraction = 0.0;
  GameState s = new_game(c, 4);
  for (int i = 0; i < 20000; ++i) step(s, {}, c);
  EXPECT_GT(s.score.total_spawned, 0u);
  EXPECT_EQ(s.score.scenario_spawned, 0u);
}

TEST(Spawn, DeterministicPerSeed) {
  GameConfig c;
  GameState a = new_game(c, 5), b = new_game(c, 5);
  for (int i = 0; i < 3000; ++i) {
    step(a, {}, c);
    step(b, {}, c);
  }
  ASSERT_EQ(a.targets.size(), b.targets.size());
  for (std::size_t i = 0; i < a.targets.size(); ++i) {
    EXPECT_EQ(a.targets[i].id, b.targets[i].id);
    EXPECT_EQ(a.targets[i].position, b.targets[i].position);
    EXPECT_EQ(a.targets[i].speed, b.targets[i].speed);
  }
}

TEST(Spawn, ScenarioShareMatchesFraction) {
  GameConfig c;
  GameState s = new_game(c, 6);
  while (s.score.total_spawned < 10000) step(s, {}, c);
  const double share = double(s.score.scenario_spawned) / double(s.score.total_spawned);
  // Scenario targets arrive in clumps of ~3, which inflates the variance
  // over a plain binomial; the bound below still covers it.
  EXPECT_NEAR(share, 0.5, 0.02);
}

TEST(Spawn, SpeedsWithinContract) {
  GameConfig c;
  GameState s = new_game(c, 7);
  for (int i = 0; i < 20000; ++i) {
    step(s, {}, c);
    for (const auto& t : s.targets) {
      EXPECT_GE(t.speed, c.min_speed);
      EXPECT_LE(t.speed, c.max_speed);
    }
  }
}

TEST(Spawn, MeanTaskRate) {
  GameConfig c;
  GameState s = new_game(c, 8);
  const int trials = 40;
  for (int i = 0; i < trials * 4800; ++i) step(s, {}, c);
  const double per_trial = double(s.score.total_spawned) / trials;
  EXPECT_NEAR(per_trial, 80.0 / 2.2, 4.0);
}

TEST(Tick, LaserOutOfRangeDoesNothing) {
  GameConfig c = quiet();
  GameState s = new_game(c, 1);
  add_target(s, c, TargetKind::Task, 150.0, 100.0, false);
  tick(s, {Vec2(0, c.top()), true, false, std::nullopt}, c);
  EXPECT_EQ(s.targets[0].accumulated_lase, 0.0);
}

TEST(Tick, BottomCrossingFails) {
  GameConfig c = quiet();
  GameState s = new_game(c, 1);
  add_target(s, c, TargetKind::Task, 0.0, 490.0, false);
  std::vector<TargetSample> all;
  for (int i = 0; i < 200 && all.empty(); ++i) all = tick(s, {}, c);
  ASSERT_EQ(all.size(), 1u);
  EXPECT_FALSE(all[0].completed);
  EXPECT_EQ(s.score.failed, 1u);
}

TEST(Tick, OverrideCompletesLockedTarget) {
  GameConfig c = quiet();
  GameState s = new_game(c, 1);
  const double v = 300.0;
  const auto id = add_target(s, c, TargetKind::Task, 0.0, v, false);
  const int need = static_cast<int>(std::ceil(required_lase_time(v, c) / c.dt() - 1e-9));
  std::vector<TargetSample> out;
  int ticks = 0;
  while (out.empty()) {
    const Vec2 tip = s.targets[0].position - Vec2(0, v * c.dt());
    out = tick(s, {tip, false, true, id}, c);
    ++ticks;
  }
  EXPECT_EQ(ticks, need);
  EXPECT_TRUE(out[0].completed);
  EXPECT_EQ(out[0].target_id, id);
}

TEST(Tick, LaserHitsOnlyOneTarget) {
  GameConfig c = quiet();
  GameState s = new_game(c, 1);
  add_target(s, c, TargetKind::Task, 0.0, 100.0, false);
  add_target(s, c, TargetKind::Task, 30.0, 100.0, false);
  tick(s, {Vec2(5, c.top()), true, false, std::nullopt}, c);
  int lased = 0;
  for (const auto& t : s.targets) lased += t.accumulated_lase > 0.0;
  EXPECT_EQ(lased, 1);
  EXPECT_GT(s.targets[0].accumulated_lase, 0.0);  // the nearer one
}

TEST(Tick, DistractorsLeaveSilently) {
  GameConfig c = quiet();
  GameState s = new_game(c, 1);
  add_target(s, c, TargetKind::Distractor, 0.0, 490.0, false);
  for (int i = 0; i < 200; ++i) EXPECT_TRUE(tick(s, {Vec2(0, 0), true, false, std::nullopt}, c).empty());
  EXPECT_TRUE(s.targets.empty());
  EXPECT_EQ(s.score.completed + s.score.failed, 0u);
}

TEST(Tick, InvariantsUnderRandomPlay) {
  GameConfig c;
  GameState s = new_game(c, 9);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-400, 400);
  std::map<TargetId, double> last_lase;
  std::map<TargetId, int> emitted;
  for (int i = 0; i < 4800; ++i) {
    TickInput in{Vec2(u(rng), u(rng) * 0.6), i % 3 != 0, false, std::nullopt};
    for (const auto& smp : step(s, in, c)) ++emitted[smp.target_id];
    EXPECT_EQ(s.score.total_spawned, s.score.completed + s.score.failed + s.falling_tasks());
    for (const auto& t : s.targets) {
      EXPECT_GE(t.accumulated_lase, last_lase[t.id]);
      EXPECT_LE(t.accumulated_lase, t.required_lase_time);
      if (t.kind == TargetKind::Distractor) {
        EXPECT_NE(t.state, TargetState::Completed);
      }
      last_lase[t.id] = t.accumulated_lase;
    }
  }
  for (const auto& [id, n] : emitted) EXPECT_EQ(n, 1) << "target " << id;
}

TEST(Tick, ContinuousLasingFromSpawnAlwaysCompletes) {
  GameConfig c = quiet();
  for (double v = c.min_speed; v <= c.max_speed; v += 10.0) {
    GameState s = new_game(c, 1);
    const auto id = add_target(s, c, TargetKind::Task, 0.0, v, false);
    bool done = false;
    for (int i = 0; i < 2000 && !done && !s.targets.empty(); ++i) {
      for (const auto& smp : tick(s, {s.targets[0].position, false, true, id}, c)) done = smp.completed;
    }
    EXPECT_TRUE(done) << "speed " << v;
  }
}

TEST(Performance, Fractions) {
  std::vector<TargetSample> s(20);
  for (int i = 0; i < 17; ++i) s[i].completed = true;
  EXPECT_DOUBLE_EQ(performance(s), 0.85);
  for (auto& x : s) x.completed = true;
  EXPECT_DOUBLE_EQ(performance(s), 1.0);
  for (auto& x : s) x.completed = false;
  EXPECT_DOUBLE_EQ(performance(s), 0.0);
  EXPECT_THROW(performance(std::vector<TargetSample>{}), Error);
}

TEST(Determinism, SameSeedSameInputsSameTrajectory) {
  GameConfig c;
  auto run = [&c] {
    GameState s = new_game(c, 77, 3, BehaviorMode::Slave);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-300, 300);
    std::vector<TargetSample> all;
    for (int i = 0; i < 4800; ++i) {
      auto out = step(s, {Vec2(u(rng), u(rng)), true, false, std::nullopt}, c);
      all.insert(all.end(), out.begin(), out.end());
    }
    return all;
  };
  auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].target_id, b[i].target_id);
    EXPECT_EQ(a[i].timestamp, b[i].timestamp);
    EXPECT_EQ(a[i].completed, b[i].completed);
  }
}
