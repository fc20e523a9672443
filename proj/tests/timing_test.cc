/*
 * Copyright 2026 The asyncfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "asyncfl/errors.h"
#include "asyncfl/timing.h"
#include "test_util.h"

namespace asyncfl {
namespace {

using testing::scalar_fleet;

Fleet taus(const std::vector<double>& t) {
  return scalar_fleet(std::vector<double>(t.size(), 0.0), t);
}

TEST(Scheduler, SynchronousWaitsForSlowest) {
  Fleet fleet = taus({1.0, 2.0});
  Scheduler s(fleet, WaitPolicy::synchronous(), {});
  FleetState st = s.initial_state();
  for (int n = 0; n < 5; ++n) {
    RoundOutcome out = s.advance(st);
    EXPECT_DOUBLE_EQ(out.dt, 2.0);
    EXPECT_EQ(out.participants, (std::vector<int>{0, 1}));
  }
  EXPECT_DOUBLE_EQ(s.clock_time(st), 10.0);
}

TEST(Scheduler, AsynchronousFastClientTwiceAsOften) {
  Fleet fleet = taus({1.0, 2.0});
  Scheduler s(fleet, WaitPolicy::asynchronous(), {});
  FleetState st = s.initial_state();
  std::vector<int> count(2, 0);
  double elapsed = 0.0;
  for (int n = 0; n < 30; ++n) {
    RoundOutcome out = s.advance(st);
    ASSERT_EQ(out.participants.size(), 1u);
    ++count[out.participants[0]];
    elapsed += out.dt;
  }
  EXPECT_EQ(count[0], 20);
  EXPECT_EQ(count[1], 10);
  EXPECT_DOUBLE_EQ(elapsed, 20.0);
}

TEST(Scheduler, AsynchronousMergedTiesJoinOneRound) {
  Fleet fleet = taus({1.0, 2.0});
  Scheduler s(fleet, WaitPolicy::asynchronous(TieBreak::kMerge), {});
  FleetState st = s.initial_state();
  for (int n = 0; n < 6; ++n) {
    RoundOutcome out = s.advance(st);
    EXPECT_DOUBLE_EQ(out.dt, 1.0);
    EXPECT_EQ(out.participants.size(), n % 2 == 1 ? 2u : 1u);
  }
}

TEST(Scheduler, FedBuffInitialRound) {
  Fleet fleet = taus({1.0, 2.0, 3.0});
  Scheduler s(fleet, WaitPolicy::fedbuff(2), {});
  FleetState st = s.initial_state();
  RoundOutcome out = s.advance(st);
  EXPECT_DOUBLE_EQ(out.dt, 2.0);
  EXPECT_EQ(out.participants, (std::vector<int>{0, 1}));
}

TEST(Scheduler, FedFixFixedIntervalAndDegeneracy) {
  Fleet fleet = taus({1.0, 2.0, 3.0});
  Scheduler s(fleet, WaitPolicy::fedfix(2.0), {});
  FleetState st = s.initial_state();
  for (int n = 0; n < 6; ++n) EXPECT_DOUBLE_EQ(s.advance(st).dt, 2.0);

  Scheduler wide(fleet, WaitPolicy::fedfix(3.0), {});
  FleetState ws = wide.initial_state();
  for (int n = 0; n < 6; ++n) {
    EXPECT_EQ(wide.advance(ws).participants, (std::vector<int>{0, 1, 2}));
  }
}

TEST(Scheduler, FedFixAllowsEmptyRounds) {
  Fleet fleet = taus({5.0, 5.0});
  Scheduler s(fleet, WaitPolicy::fedfix(1.0), {});
  FleetState st = s.initial_state();
  int empty = 0;
  for (int n = 0; n < 10; ++n) empty += s.advance(st).participants.empty();
  EXPECT_EQ(empty, 8);
}

TEST(Scheduler, ClockConservation) {
  Fleet fleet = taus({1.5, 2.5, 4.0});
  for (WaitPolicy pol : {WaitPolicy::asynchronous(), WaitPolicy::fedbuff(2),
                         WaitPolicy::fedfix(1.0)}) {
    Scheduler s(fleet, pol, {});
    FleetState st = s.initial_state();
    for (int n = 0; n < 50; ++n) {
      FleetState before = st;
      RoundOutcome out = s.advance(st);
      const double dt_ticks = s.scale().to_ticks(out.dt);
      for (int i = 0; i < 3; ++i) {
        if (std::find(out.participants.begin(), out.participants.end(), i) !=
            out.participants.end()) {
          continue;
        }
        EXPECT_DOUBLE_EQ(st.remaining[i], before.remaining[i] - dt_ticks);
        // A serialized tie leaves a finisher at zero; it joins the very next
        // round (which takes no time unless a buffer still has to fill).
        EXPECT_GE(st.remaining[i], 0.0);
        if (st.remaining[i] == 0.0) {
          FleetState peek = st;
          RoundOutcome next = s.advance(peek);
          EXPECT_NE(std::find(next.participants.begin(), next.participants.end(), i),
                    next.participants.end());
          if (pol.kind == PolicyKind::kAsynchronous) EXPECT_EQ(next.dt, 0.0);
        }
      }
    }
  }
}

TEST(Scheduler, LcmCycleContributionCounts) {
  Fleet fleet = taus({2.0, 3.0, 4.0});
  Scheduler s(fleet, WaitPolicy::asynchronous(), {});
  FleetState st = s.initial_state();
  // nu = 12: clients contribute 6, 4 and 3 times per cycle.
  std::vector<int> count(3, 0);
  for (int n = 0; n < 13; ++n) {
    for (int i : s.advance(st).participants) ++count[i];
  }
  EXPECT_EQ(count, (std::vector<int>{6, 4, 3}));
  EXPECT_DOUBLE_EQ(s.clock_time(st), 12.0);
}

TEST(Scheduler, MergedTiesKeepClocksPositive) {
  Fleet fleet = taus({1.5, 2.5, 4.0});
  Scheduler s(fleet, WaitPolicy::asynchronous(TieBreak::kMerge), {});
  FleetState st = s.initial_state();
  for (int n = 0; n < 50; ++n) {
    RoundOutcome out = s.advance(st);
    for (int i = 0; i < 3; ++i) {
      if (std::find(out.participants.begin(), out.participants.end(), i) ==
          out.participants.end()) {
        EXPECT_GT(st.remaining[i], 0.0);
      }
    }
  }
}

TEST(Scheduler, RationalComputeTimesStayExact) {
  Fleet fleet = taus({0.1, 0.3});
  Scheduler s(fleet, WaitPolicy::asynchronous(), {});
  EXPECT_TRUE(s.scale().exact());
  FleetState st = s.initial_state();
  std::vector<int> count(2, 0);
  for (int n = 0; n < 4000; ++n) {
    for (int i : s.advance(st).participants) ++count[i];
  }
  EXPECT_EQ(count[0], 3000);
  EXPECT_EQ(count[1], 1000);
}

TEST(Scheduler, DeterministicUnderSeeds) {
  Fleet fleet = taus({1.0, 2.0, 3.0, 4.0});
  for (WaitPolicy pol : {WaitPolicy::sample_uniform(2), WaitPolicy::sample_md(2),
                         WaitPolicy::asynchronous()}) {
    Scheduler a(fleet, pol, {HardwareMode::kExponential, 3}, 8);
    Scheduler b(fleet, pol, {HardwareMode::kExponential, 3}, 8);
    FleetState sa = a.initial_state(), sb = b.initial_state();
    for (int n = 0; n < 100; ++n) {
      RoundOutcome oa = a.advance(sa), ob = b.advance(sb);
      EXPECT_EQ(oa.participants, ob.participants);
      EXPECT_EQ(oa.dt, ob.dt);
    }
  }
}

TEST(Scheduler, UniformSamplingInclusionFrequency) {
  Fleet fleet = taus({1.0, 1.0, 1.0, 1.0});
  Scheduler s(fleet, WaitPolicy::sample_uniform(2), {}, 17);
  FleetState st = s.initial_state();
  std::vector<int> count(4, 0);
  const int rounds = 20000;
  for (int n = 0; n < rounds; ++n) {
    RoundOutcome out = s.advance(st);
    ASSERT_EQ(out.participants.size(), 2u);
    for (int i : out.participants) ++count[i];
  }
  // Inclusion probability m / M = 1/2, sd sqrt(n p (1-p)) ~ 71.
  for (int c : count) EXPECT_NEAR(c, rounds / 2, 5 * 71);
}

TEST(Scheduler, BiasedFastestPicksFastClients) {
  Fleet fleet = taus({3.0, 1.0, 2.0});
  Scheduler s(fleet, WaitPolicy::sample_biased(2, BiasCriterion::kFastest), {});
  FleetState st = s.initial_state();
  EXPECT_EQ(s.advance(st).participants, (std::vector<int>{1, 2}));
}

TEST(StalenessBound, Examples) {
  EXPECT_EQ(staleness_bound(taus({1.0, 2.0}), WaitPolicy::synchronous()), 0);
  EXPECT_EQ(staleness_bound(taus({1.0, 3.0}), WaitPolicy::fedfix(2.0)), 2);
  EXPECT_EQ(staleness_bound(taus({1.0, 2.0}), WaitPolicy::asynchronous()), 2);
  EXPECT_THROW(staleness_bound(taus({1.0, 2.0}), WaitPolicy::asynchronous(),
                               HardwareMode::kExponential),
               UnsupportedError);
}

TEST(StalenessBound, AsyncWithinOrderBound) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> tau(1, 8), size(2, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> t(size(rng));
    for (double& v : t) v = tau(rng);
    const double ratio = *std::max_element(t.begin(), t.end()) /
                         *std::min_element(t.begin(), t.end());
    const int bound = staleness_bound(taus(t), WaitPolicy::asynchronous());
    EXPECT_LE(bound, std::ceil(ratio) * (t.size() - 1) + t.size());
    EXPECT_GE(bound, 1);
  }
}

TEST(SamplerCovariance, Examples) {
  Vector d = {0.75, 1.5}, p = {0.5, 0.5};
  auto sync = sampler_covariance(WaitPolicy::synchronous(), d, p);
  EXPECT_EQ(sync.alpha, 1.0);
  EXPECT_EQ(sync.beta, 0.0);
  auto async = sampler_covariance(WaitPolicy::asynchronous(), d, p);
  EXPECT_EQ(async.alpha, 0.0);
  EXPECT_EQ(async.beta, 1.5);
  auto fix = sampler_covariance(WaitPolicy::fedfix(1.0), d, p);
  EXPECT_EQ(fix.alpha, 1.0);
  EXPECT_EQ(fix.beta, 0.0);
  auto biased = sampler_covariance(
      WaitPolicy::sample_biased(1, BiasCriterion::kFastest), d, p);
  EXPECT_TRUE(biased.biased);
  EXPECT_EQ(biased.alpha, 1.0);
  EXPECT_EQ(biased.beta, 0.0);
}

TEST(WaitPolicy, ValidationErrors) {
  EXPECT_THROW(WaitPolicy::fedbuff(3).validate(2), ConfigError);
  EXPECT_THROW(WaitPolicy::fedfix(0.0).validate(2), ConfigError);
  EXPECT_THROW(WaitPolicy::sample_uniform(0).validate(2), ConfigError);
}

TEST(ComputeTimeLcm, RationalAndIrrational) {
  auto l = compute_time_lcm(taus({1.0, 2.0, 3.0}));
  ASSERT_TRUE(l.has_value());
  EXPECT_DOUBLE_EQ(*l, 6.0);
  auto half = compute_time_lcm(taus({0.5, 0.75}));
  ASSERT_TRUE(half.has_value());
  EXPECT_DOUBLE_EQ(*half, 1.5);
}

}  // namespace
}  // namespace asyncfl
