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
#include <numeric>
#include <random>
#include <vector>

#include "asyncfl/errors.h"
#include "asyncfl/oracle.h"

namespace asyncfl::oracle {
namespace {

SchemeSpec spec(Scheme s, int m, int sample = 0, double window = 0.0) {
  SchemeSpec out;
  out.scheme = s;
  out.num_clients = m;
  out.sample_size = sample;
  out.window = window;
  return out;
}

TEST(Phi, Examples) {
  EXPECT_DOUBLE_EQ(phi(0.5, 1), 0.5);
  EXPECT_NEAR(phi(0.1, 3), 0.271, 1e-15);
  for (double lr : {1e-2, 1e-3, 1e-4}) {
    for (int k : {1, 3, 10}) {
      EXPECT_LE(std::abs(phi(lr, k) - lr * k), (lr * k) * (lr * k));
    }
  }
}

TEST(StalenessLaw, Examples) {
  Vector sync = staleness_law(spec(Scheme::kSync, 3), 4);
  EXPECT_EQ(sync[4], 1.0);
  Vector async = staleness_law(spec(Scheme::kAsync, 2), 2);
  ASSERT_EQ(async.size(), 3u);
  EXPECT_DOUBLE_EQ(async[0], 0.25);
  EXPECT_DOUBLE_EQ(async[1], 0.25);
  EXPECT_DOUBLE_EQ(async[2], 0.5);
  Vector hybrid = staleness_law(spec(Scheme::kHybrid, 2, 0, std::log(2.0)), 1);
  EXPECT_NEAR(hybrid[0], 0.5, 1e-15);
  EXPECT_NEAR(hybrid[1], 0.5, 1e-15);
}

TEST(StalenessLaw, SumsToOne) {
  for (int n = 0; n <= 200; ++n) {
    EXPECT_EQ(exact_async_staleness_sum(3, n), "1");
    for (Scheme s : {Scheme::kAsync, Scheme::kHybrid}) {
      Vector q = staleness_law(spec(s, 4, 0, 0.3), n);
      EXPECT_NEAR(std::accumulate(q.begin(), q.end(), 0.0), 1.0, 1e-12);
    }
  }
}

TEST(StalenessLaw, ExactRationalsMatchFloatingPoint) {
  std::vector<std::string> exact = exact_async_staleness_law(2, 2);
  EXPECT_EQ(exact, (std::vector<std::string>{"1/4", "1/4", "1/2"}));
}

TEST(StalenessLaw, EvolvingWindowSumsToOne) {
  SchemeSpec s = spec(Scheme::kHybridEvo, 3);
  for (int n = 0; n < 30; ++n) s.windows.push_back(0.2 + 0.05 * (n % 4));
  for (int n = 0; n < 30; ++n) {
    Vector q = staleness_law(s, n);
    EXPECT_NEAR(std::accumulate(q.begin(), q.end(), 0.0), 1.0, 1e-12) << n;
  }
}

TEST(Expectation, SynchronousClosedForm) {
  const double ph = 0.3, star = 2.0, theta0 = -1.0;
  Expectation e = expectation_recursion(spec(Scheme::kSync, 3), ph, 1.0, star, 40);
  for (int n = 0; n <= 40; ++n) {
    EXPECT_NEAR(e.a[n], std::pow(1 - ph, n), 1e-14);
    EXPECT_NEAR(e.b[n], (1 - std::pow(1 - ph, n)) * star, 1e-14);
    EXPECT_NEAR(e.mean(n, theta0) - star, std::pow(1 - ph, n) * (theta0 - star), 1e-13);
  }
}

TEST(Expectation, ZeroPhiIsIdentity) {
  Expectation e = expectation_recursion(spec(Scheme::kAsync, 3), 0.0, 1.0, 2.0, 10);
  for (int n = 0; n <= 10; ++n) {
    EXPECT_EQ(e.a[n], 1.0);
    EXPECT_EQ(e.b[n], 0.0);
  }
}

// Direct simulation of the scalar memoryless models: async delivers one
// uniformly chosen client per round; the windowed model lets each client
// finish independently with probability 1 - e^{-T}.
double simulate_mean(Scheme scheme, const std::vector<double>& optima, double ph,
                     double window, double theta0, int rounds, int runs,
                     double* se) {
  const int m = static_cast<int>(optima.size());
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pick(0, m - 1);
  const double finish = 1 - std::exp(-window);
  std::bernoulli_distribution done(finish);
  double sum = 0.0, sq = 0.0;
  for (int r = 0; r < runs; ++r) {
    std::vector<double> hist = {theta0};
    std::vector<int> anchor(m, 0);
    for (int n = 0; n < rounds; ++n) {
      double next = hist.back();
      if (scheme == Scheme::kAsync) {
        const int i = pick(rng);
        next += ph * (optima[i] - hist[anchor[i]]);
        anchor[i] = n + 1;
      } else {
        std::vector<int> arrived;
        for (int i = 0; i < m; ++i) {
          if (done(rng)) arrived.push_back(i);
        }
        for (int i : arrived) {
          next += ph / (finish * m) * (optima[i] - hist[anchor[i]]);
          anchor[i] = n + 1;
        }
      }
      hist.push_back(next);
    }
    sum += hist.back();
    sq += hist.back() * hist.back();
  }
  const double mean = sum / runs;
  *se = std::sqrt((sq / runs - mean * mean) / (runs - 1));
  return mean;
}

TEST(Expectation, AsyncMatchesDirectSimulation) {
  const std::vector<double> optima = {0.0, 2.0};
  Expectation e = expectation_recursion(spec(Scheme::kAsync, 2), 0.5, 1.0, 1.0, 3);
  for (int n = 1; n <= 3; ++n) {
    double se = 0.0;
    const double mc = simulate_mean(Scheme::kAsync, optima, 0.5, 0.0, 4.0, n, 100000, &se);
    EXPECT_LE(std::abs(mc - e.mean(n, 4.0)), 3 * se) << "n=" << n;
  }
}

TEST(Expectation, HybridMatchesDirectSimulation) {
  const std::vector<double> optima = {0.0, 1.0, 5.0};
  const double window = 0.7;
  Expectation e =
      expectation_recursion(spec(Scheme::kHybrid, 3, 0, window), 0.4, 1.0, 2.0, 6);
  for (int n : {2, 6}) {
    double se = 0.0;
    const double mc =
        simulate_mean(Scheme::kHybrid, optima, 0.4, window, -3.0, n, 50000, &se);
    EXPECT_LE(std::abs(mc - e.mean(n, -3.0)), 3 * se) << "n=" << n;
  }
}

TEST(Variance, SynchronousContractsBySquare) {
  const double ph = 0.4;
  SecondMoment s = variance_recursion(spec(Scheme::kSync, 2), ph,
                                      Vector{0.0, 2.0}, 3.0, 20);
  for (int n = 0; n <= 20; ++n) {
    EXPECT_NEAR(s.second_moment[n], std::pow((1 - ph) * (1 - ph), n) * 4.0, 1e-13);
  }
}

TEST(Variance, FullUniformSampleReducesToSync) {
  SecondMoment u = variance_recursion(spec(Scheme::kSyncUniform, 3, 3), 0.3,
                                      Vector{0.0, 1.0, 5.0}, -1.0, 15);
  SecondMoment s = variance_recursion(spec(Scheme::kSync, 3), 0.3,
                                      Vector{0.0, 1.0, 5.0}, -1.0, 15);
  EXPECT_NEAR(u.gamma[0], 0.0, 1e-15);
  for (int n = 0; n <= 15; ++n) EXPECT_NEAR(u.second_moment[n], s.second_moment[n], 1e-13);
}

TEST(Variance, UniformSingleSampleFixedPoint) {
  SecondMoment s = variance_recursion(spec(Scheme::kSyncUniform, 2, 1), 0.5,
                                      Vector{0.0, 2.0}, 1.0, 60);
  EXPECT_NEAR(s.second_moment[60], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.second_moment[1], 0.25, 1e-15);
}

TEST(Variance, AsyncDiagonalMatchesSecondMoment) {
  SecondMoment s = variance_recursion(spec(Scheme::kAsync, 3), 0.3,
                                      Vector{0.0, 1.0, 2.0}, 4.0, 40);
  for (int n = 0; n <= 40; ++n) EXPECT_NEAR(s.inner(n, n), s.second_moment[n], 1e-10);
}

TEST(Variance, SampleLargerThanFleetRejected) {
  EXPECT_THROW(variance_recursion(spec(Scheme::kSyncUniform, 2, 3), 0.5,
                                  Vector{0.0, 2.0}, 1.0, 5),
               ConfigError);
}

TEST(RoundTime, Examples) {
  EXPECT_DOUBLE_EQ(expected_round_time(spec(Scheme::kSync, 2), 1.0), 1.5);
  EXPECT_DOUBLE_EQ(expected_round_time(spec(Scheme::kAsync, 4), 1.0), 0.25);
  EXPECT_DOUBLE_EQ(expected_round_time(spec(Scheme::kSyncUniform, 5, 2), 2.0), 0.75);
}

TEST(SchemeNames, RoundTrip) {
  for (Scheme s : {Scheme::kSync, Scheme::kSyncUniform, Scheme::kAsync,
                   Scheme::kHybrid, Scheme::kHybridEvo}) {
    EXPECT_EQ(parse_scheme(scheme_name(s)), s);
  }
}

}  // namespace
}  // namespace asyncfl::oracle
