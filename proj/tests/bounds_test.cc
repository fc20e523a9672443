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

#include <cmath>
#include <vector>

#include "asyncfl/bounds.h"
#include "asyncfl/errors.h"
#include "test_util.h"

namespace asyncfl::bounds {
namespace {

using testing::scalar_fleet;

BoundInputs active() {
  BoundInputs in;
  in.num_clients = 4;
  in.local_steps = 3;
  in.rounds = 1000;
  in.local_lr = 0.01;
  in.staleness = 2;
  in.window = 4;
  in.alpha = 1;
  in.beta = 0.5;
  in.sigma = 0.3;
  in.sigma1 = 0.2;
  in.residual = 0.1;
  in.max_q = 0.4;
  in.init_dist_sq = 2.0;
  return in;
}

TEST(EpsilonTerms, OnlyInitTermWhenOthersVanish) {
  BoundInputs in;
  in.alpha = 0;
  in.beta = 0;
  in.local_steps = 1;
  in.window = 1;
  in.residual = 0;
  in.init_dist_sq = 3.0;
  in.rounds = 50;
  EpsilonTerms t = epsilon_terms(in);
  EXPECT_GT(t.init, 0.0);
  EXPECT_EQ(t.total, t.init);
}

TEST(EpsilonTerms, TotalIsSumOfTerms) {
  EpsilonTerms t = epsilon_terms(active());
  EXPECT_DOUBLE_EQ(t.total, t.init + t.local + t.alpha + t.beta + t.window);
}

TEST(EpsilonTerms, DoublingStalenessIncreasesTotal) {
  BoundInputs in = active();
  const double base = epsilon_terms(in).total;
  in.staleness *= 2;
  EXPECT_GT(epsilon_terms(in).total, base);
}

TEST(EpsilonTerms, MonotoneInEachInput) {
  double BoundInputs::*fields[] = {&BoundInputs::staleness, &BoundInputs::window,
                                   &BoundInputs::alpha,     &BoundInputs::beta,
                                   &BoundInputs::sigma,     &BoundInputs::sigma1,
                                   &BoundInputs::residual};
  for (auto f : fields) {
    BoundInputs in = active();
    double prev = epsilon_terms(in).total;
    for (int step = 0; step < 10; ++step) {
      in.*f += 0.5;
      const double now = epsilon_terms(in).total;
      EXPECT_GE(now, prev);
      prev = now;
    }
  }
}

TEST(EpsilonTerms, InitTermVanishesWithRounds) {
  BoundInputs in = active();
  in.rounds = 1e12;
  EpsilonTerms t = epsilon_terms(in);
  EXPECT_LT(t.init, 1e-6);
  EXPECT_GT(t.alpha, 0.0);
}

TEST(EpsilonTerms, InvalidInputsRejected) {
  BoundInputs in = active();
  in.local_steps = 0;
  EXPECT_THROW(epsilon_terms(in), ConfigError);
  in = active();
  in.alpha = -1;
  EXPECT_THROW(epsilon_terms(in), ConfigError);
}

TEST(LrConstraint, Examples) {
  EXPECT_DOUBLE_EQ(lr_constraint(1, 1, 1, 1, 0), 1.0 / 144.0);
  EXPECT_LT(lr_constraint(1, 1, 1, 1, 1e6), 1e-8);
  EXPECT_DOUBLE_EQ(lr_constraint(4, 2, 1, 1, 3), 2 * lr_constraint(8, 2, 1, 1, 3));
  EXPECT_THROW(lr_constraint(1, 0, 1, 1, 0), ConfigError);
}

TEST(LrConstraint, NonincreasingInEachArgument) {
  const double base = lr_constraint(2, 1.5, 1.0, 0.5, 1.0);
  EXPECT_LE(lr_constraint(3, 1.5, 1.0, 0.5, 1.0), base);
  EXPECT_LE(lr_constraint(2, 2.5, 1.0, 0.5, 1.0), base);
  EXPECT_LE(lr_constraint(2, 1.5, 2.0, 0.5, 1.0), base);
  EXPECT_LE(lr_constraint(2, 1.5, 1.0, 1.5, 1.0), base);
  EXPECT_LE(lr_constraint(2, 1.5, 1.0, 0.5, 4.0), base);
}

TEST(Presets, Synchronous) {
  Fleet fleet = scalar_fleet({0.0, 2.0}, {1.0, 2.0});
  WeightPlan plan = plan_weights(WeightScheme::kFedAvg, fleet, WaitPolicy::synchronous());
  Preset p = scheme_presets(fleet, WaitPolicy::synchronous(), plan, 10.0);
  EXPECT_EQ(p.inputs.alpha, 1.0);
  EXPECT_EQ(p.inputs.beta, 0.0);
  EXPECT_EQ(p.inputs.staleness, 0.0);
  EXPECT_EQ(p.inputs.window, 1.0);
  EXPECT_NEAR(p.inputs.residual, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(p.inputs.rounds, 5.0);
}

TEST(Presets, AsyncTwoClients) {
  Fleet fleet = scalar_fleet({0.0, 2.0}, {1.0, 2.0});
  WeightPlan plan = plan_weights(WeightScheme::kAsyncTimeBased, fleet,
                                 WaitPolicy::asynchronous());
  Preset p = scheme_presets(fleet, WaitPolicy::asynchronous(), plan, 10.0);
  EXPECT_EQ(p.inputs.alpha, 0.0);
  EXPECT_DOUBLE_EQ(p.inputs.beta, 1.5);
  EXPECT_EQ(p.inputs.staleness, 2.0);
  EXPECT_EQ(p.inputs.window, 3.0);
  EXPECT_NEAR(p.inputs.residual, 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(p.inputs.rounds, 15.0);
  EXPECT_TRUE(p.residual_exact);
}

TEST(Presets, FedFixWindowFromLcm) {
  Fleet fleet = scalar_fleet({0.0, 2.0, 1.0}, {1.0, 2.0, 3.0});
  WaitPolicy pol = WaitPolicy::fedfix(2.0);
  WeightPlan plan = plan_weights(WeightScheme::kFedFixTimeBased, fleet, pol);
  Preset p = scheme_presets(fleet, pol, plan, 20.0);
  EXPECT_EQ(p.inputs.window, 2.0);
  EXPECT_EQ(p.inputs.staleness, 2.0);
  EXPECT_DOUBLE_EQ(p.inputs.rounds, 10.0);
}

TEST(Presets, OrderingAtEqualRounds) {
  Fleet fleet = scalar_fleet({0.0, 2.0, 1.0, -1.0}, {1.0, 2.0, 3.0, 4.0});
  BoundInputs base;
  base.rounds = 1e4;
  base.local_lr = 0.005;
  base.local_steps = 2;
  base.init_dist_sq = 1.0;
  auto total = [&](WaitPolicy pol, WeightScheme s) {
    WeightPlan plan = plan_weights(s, fleet, pol);
    Preset p = scheme_presets(fleet, pol, plan, 0.0, base);
    return epsilon_terms(p.inputs).total;
  };
  const double sync = total(WaitPolicy::synchronous(), WeightScheme::kFedAvg);
  const double async = total(WaitPolicy::asynchronous(), WeightScheme::kAsyncTimeBased);
  for (double dt : {1.0, 2.0, 3.0}) {
    const double fix = total(WaitPolicy::fedfix(dt), WeightScheme::kFedFixTimeBased);
    EXPECT_LE(sync, fix) << dt;
    EXPECT_LE(fix, async) << dt;
  }
}

TEST(ExponentCheck, TruthTable) {
  EXPECT_TRUE(exponent_check(0, 0, 0.5));
  EXPECT_FALSE(exponent_check(1, 0, 0.5));
  EXPECT_FALSE(exponent_check(0.3, 0.4, 0.4));
  EXPECT_FALSE(exponent_check(0, 0, 1.0));
  EXPECT_TRUE(exponent_check(0.2, 0.1, 0.9));
}

TEST(ClosedForm, SyncThreeTermShape) {
  ClosedFormInputs in;
  in.local_steps = 4;
  in.rounds = 100;
  in.num_clients = 5;
  in.init_dist_sq = 2;
  in.sigma = 1;
  const double root = 1 / std::sqrt(400.0);
  EXPECT_NEAR(closed_form_epsilon("sync", in), root * 2 + 3.0 / 100 + root / 5, 1e-15);
  EXPECT_THROW(closed_form_epsilon("bogus", in), UnsupportedError);
}

TEST(QuadraticSigma, NoiseFreeHeterogeneousFleet) {
  Fleet fleet = scalar_fleet({0.0, 2.0}, {1.0, 1.0});
  EXPECT_NEAR(quadratic_sigma(fleet, Vector{0.5, 0.5}), 1.0, 1e-14);
  Fleet noisy = scalar_fleet({1.0, 1.0}, {1.0, 1.0}, 0.5);
  EXPECT_NEAR(quadratic_sigma(noisy, Vector{0.5, 0.5}), 0.25, 1e-14);
}

TEST(Report, FlatKeyValueBlock) {
  BoundInputs in = active();
  std::string r = format_report("asynchronous", in, epsilon_terms(in), {"x"});
  EXPECT_NE(r.find("convention=big_O_constants_set_to_1\n"), std::string::npos);
  EXPECT_NE(r.find("\ntau=2\n"), std::string::npos);
  EXPECT_NE(r.find("\nnote=x\n"), std::string::npos);
}

}  // namespace
}  // namespace asyncfl::bounds
