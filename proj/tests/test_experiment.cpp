#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gazeattn/experiment.hpp"

using namespace gazeattn;
using namespace gazeattn::experiment;

namespace {

TargetSample smp(double speed, BehaviorMode m, bool done, std::uint64_t trial) {
  TargetSample s;
  s.speed = speed;
  s.mode = m;
  s.completed = done;
  s.trial_id = trial;
  return s;
}

ExperimentPlan small_plan() {
  ExperimentPlan p;
  p.participants = 2;
  p.trials_per_mode = 1;
  p.params.game.trial_duration = 15.0;
  p.threads = 1;
  return p;
}

}  // namespace

TEST(Seeds, MixMatchesSplitMix64) {
  // First output of the reference SplitMix64 generator seeded with 0.
  EXPECT_EQ(mix_seed(0), 0xE220A8397B1DCDAFULL);
  EXPECT_NE(derive_seed(1, 2, 3, 4), derive_seed(1, 2, 4, 3));
}

TEST(Plan, DefaultExpandsToFullDesign) {
  ExperimentPlan p;
  auto specs = expand_plan(p);
  ASSERT_EQ(specs.size(), 180u);
  std::set<std::uint64_t> user_seeds;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    EXPECT_EQ(specs[i].trial_id, i);
    user_seeds.insert(specs[i].user_seed);
  }
  EXPECT_EQ(user_seeds.size(), 180u);
  EXPECT_EQ(specs[0].participant, 0);
  EXPECT_EQ(specs[179].participant, 14);
}

TEST(Plan, ModesShareGameSeedsPerParticipantAndRepetition) {
  ExperimentPlan p;
  auto specs = expand_plan(p);
  for (const auto& a : specs) {
    for (const auto& b : specs) {
      const bool same_slot = a.participant == b.participant && a.repetition == b.repetition;
      EXPECT_EQ(a.game_seed == b.game_seed, same_slot);
    }
  }
}

TEST(Plan, ValidationRejectsEmptyPlans) {
  ExperimentPlan p;
  p.modes.clear();
  try {
    validate(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigInvalid);
  }
  ExperimentPlan q;
  q.participants = 0;
  EXPECT_THROW(validate(q), Error);
}

TEST(Run, DeterministicAcrossThreadCounts) {
  auto p = small_plan();
  auto a = run_experiment(p).samples();
  p.threads = 3;
  auto b = run_experiment(p).samples();
  ASSERT_EQ(a.size(), b.size());
  ASSERT_FALSE(a.empty());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].trial_id, b[i].trial_id);
    EXPECT_EQ(a[i].target_id, b[i].target_id);
    EXPECT_EQ(a[i].completed, b[i].completed);
    EXPECT_EQ(a[i].speed, b[i].speed);
    EXPECT_EQ(a[i].timestamp, b[i].timestamp);
  }
}

TEST(Run, TrialsCarryTheirSpecs) {
  auto p = small_plan();
  auto r = run_experiment(p, true);
  ASSERT_EQ(r.trials.size(), 8u);
  for (const auto& t : r.trials) {
    EXPECT_EQ(t.ticks, 900);
    EXPECT_EQ(t.log.size(), 900u);
    for (const auto& s : t.samples) {
      EXPECT_EQ(s.trial_id, t.spec.trial_id);
      EXPECT_EQ(s.mode, t.spec.mode);
    }
  }
}

TEST(Run, ZeroDurationYieldsNoSamples) {
  auto p = small_plan();
  p.params.game.trial_duration = 0.0;
  auto r = run_experiment(p);
  EXPECT_TRUE(r.samples().empty());
  auto samples = r.samples();
  EXPECT_THROW(report(samples), Error);
}

TEST(Bins, BoundariesFollowHalfOpenRanges) {
  EXPECT_EQ(range_index(70.0), 0u);
  EXPECT_EQ(range_index(199.999), 0u);
  EXPECT_EQ(range_index(200.0), 1u);
  EXPECT_EQ(range_index(330.0), 2u);
  EXPECT_EQ(range_index(490.0), 2u);
  EXPECT_FALSE(range_index(500.0));
  EXPECT_FALSE(range_index(69.9));

  std::vector<TargetSample> s = {smp(100, BehaviorMode::Manual, true, 0),
                                 smp(500, BehaviorMode::Manual, true, 0),
                                 smp(300, BehaviorMode::Manual, false, 0),
                                 smp(20, BehaviorMode::Manual, true, 0)};
  auto b = bin_by_speed(s);
  EXPECT_EQ(b.discarded, 2u);
  EXPECT_DOUBLE_EQ(b.discarded_fraction, 0.5);
  EXPECT_EQ(b.groups[0].size(), 1u);
  EXPECT_EQ(b.groups[1].size(), 1u);
}

TEST(Report, PerTrialFractionsAndWelch) {
  std::vector<TargetSample> s;
  // Manual: trial 0 completes 1/2, trial 1 completes 2/2 in R1.
  s.push_back(smp(100, BehaviorMode::Manual, true, 0));
  s.push_back(smp(100, BehaviorMode::Manual, false, 0));
  s.push_back(smp(150, BehaviorMode::Manual, true, 1));
  s.push_back(smp(150, BehaviorMode::Manual, true, 1));
  // Cooperative: 1/4 and 3/4.
  for (int i = 0; i < 4; ++i) s.push_back(smp(100, BehaviorMode::Cooperative, i == 0, 2));
  for (int i = 0; i < 4; ++i) s.push_back(smp(100, BehaviorMode::Cooperative, i != 0, 3));
  auto rep = report(s);
  ASSERT_EQ(rep.modes.size(), 2u);
  EXPECT_EQ(rep.comparisons_per_range, 1u);
  const auto& m = rep.cell(BehaviorMode::Manual, 0);
  EXPECT_EQ(m.n, 2u);
  EXPECT_DOUBLE_EQ(m.mean, 0.75);
  EXPECT_NEAR(m.standard_error, 0.25, 1e-12);
  const auto& c = rep.cell(BehaviorMode::Cooperative, 0);
  EXPECT_DOUBLE_EQ(c.mean, 0.5);
  EXPECT_EQ(rep.cell(BehaviorMode::Manual, 1).n, 0u);
  EXPECT_TRUE(std::isnan(rep.cell(BehaviorMode::Manual, 1).mean));
  // Welch on {0.5, 1} vs {0.25, 0.75}: t = 0.25 / sqrt(0.125/2 + 0.125/2) = 0.7071, df = 2.
  const double t = 0.25 / std::sqrt(0.125);
  const double p_expected = 1.0 - 2.0 * (0.5 + t / (2.0 * std::sqrt(2.0 + t * t)) - 0.5);
  EXPECT_NEAR(rep.corrected_p(BehaviorMode::Manual, BehaviorMode::Cooperative, 0), p_expected, 1e-9);
  EXPECT_TRUE(std::isnan(rep.corrected_p(BehaviorMode::Manual, BehaviorMode::Cooperative, 2)));
}

TEST(Report, IdenticalModesGiveUnitP) {
  std::vector<TargetSample> s;
  for (BehaviorMode m : kAllModes) {
    for (std::uint64_t t = 0; t < 3; ++t) {
      const std::uint64_t id = static_cast<std::uint64_t>(m) * 10 + t;
      for (int i = 0; i < 4; ++i) s.push_back(smp(250, m, i <= static_cast<int>(t), id));
    }
  }
  auto rep = report(s);
  EXPECT_EQ(rep.comparisons_per_range, 6u);
  for (BehaviorMode a : kAllModes) {
    for (BehaviorMode b : kAllModes) {
      if (a == b) continue;
      EXPECT_NEAR(rep.corrected_p(a, b, 1), 1.0, 1e-12);
    }
  }
}

TEST(Report, SingleTrialModeIsInsufficient) {
  std::vector<TargetSample> s = {smp(100, BehaviorMode::Manual, true, 0),
                                 smp(100, BehaviorMode::Slave, true, 1),
                                 smp(100, BehaviorMode::Slave, true, 2)};
  try {
    report(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
  }
}
