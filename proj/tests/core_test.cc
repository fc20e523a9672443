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
#include <memory>
#include <random>
#include <vector>

#include "asyncfl/core.h"
#include "asyncfl/errors.h"
#include "test_util.h"

namespace asyncfl {
namespace {

using testing::scalar_fleet;

TEST(FederatedLoss, TwoScalarQuadratics) {
  Fleet fleet = scalar_fleet({0.0, 2.0}, {1.0, 1.0});
  EXPECT_DOUBLE_EQ(federated_loss(Vector{1.0}, fleet), 0.5);
}

TEST(FederatedLoss, SingleClientAtOptimum) {
  auto obj = std::make_shared<QuadraticObjective>(Vector{0.7}, Vector{-1.4}, 3.0);
  Fleet fleet = make_fleet({obj}, std::vector<double>{1.0});
  EXPECT_DOUBLE_EQ(federated_loss(obj->optimum(), fleet), obj->loss(obj->optimum()));
}

TEST(FederatedLoss, MatchesHandSummation) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<std::shared_ptr<const Objective>> objs;
  std::vector<double> a, b, c;
  for (int i = 0; i < 3; ++i) {
    a.push_back(std::abs(u(rng)) + 0.1);
    b.push_back(u(rng));
    c.push_back(u(rng));
    objs.push_back(std::make_shared<QuadraticObjective>(Vector{a[i]}, Vector{b[i]}, c[i]));
  }
  Fleet fleet = make_fleet(objs, std::vector<double>{1.0, 1.0, 1.0});
  for (int k = 0; k < 20; ++k) {
    const double x = u(rng);
    double expect = 0.0;
    for (int i = 0; i < 3; ++i) expect += (a[i] * x * x + b[i] * x + c[i]) / 3.0;
    EXPECT_NEAR(federated_loss(Vector{x}, fleet), expect, 1e-12);
  }
}

TEST(FederatedLoss, DimensionMismatchRejected) {
  auto a = std::make_shared<QuadraticObjective>(QuadraticObjective::centered({0.0}));
  auto b = std::make_shared<QuadraticObjective>(QuadraticObjective::centered({0.0, 1.0}));
  EXPECT_THROW(make_fleet({a, b}, std::vector<double>{1.0, 1.0}), ConfigError);
  Fleet fleet = make_fleet({a}, std::vector<double>{1.0});
  EXPECT_THROW(federated_loss(Vector{0.0, 1.0}, fleet), ConfigError);
}

TEST(SurrogateLoss, Examples) {
  Fleet fleet = scalar_fleet({0.0, 2.0}, {1.0, 1.0});
  EXPECT_DOUBLE_EQ(surrogate_loss(Vector{0.0}, WeightVector{{1.0, 0.0}}, fleet), 0.0);
  EXPECT_NEAR(surrogate_loss(Vector{1.0}, WeightVector{{0.3, 0.6}}, fleet), 0.45, 1e-15);
  EXPECT_THROW(surrogate_loss(Vector{1.0}, WeightVector{{-0.1, 1.1}}, fleet),
               InvalidWeightsError);
}

TEST(SurrogateLoss, EqualsFederatedLossAtImportance) {
  Fleet fleet = scalar_fleet({-1.0, 0.5, 3.0}, {1.0, 2.0, 3.0});
  for (double x : {-3.0, 0.0, 0.25, 4.0}) {
    EXPECT_NEAR(surrogate_loss(Vector{x}, importance_weights(fleet), fleet),
                federated_loss(Vector{x}, fleet), 1e-12);
  }
}

TEST(FederatedLoss, ConvexAlongSegments) {
  SyntheticShardConfig sc;
  sc.num_clients = 3;
  sc.dim = 3;
  sc.seed = 4;
  auto data = make_synthetic_shards(sc);
  std::vector<std::shared_ptr<const Objective>> objs(data.shards.begin(),
                                                     data.shards.end());
  Fleet logistic = make_fleet(objs, std::vector<double>{1.0, 1.0, 1.0});
  Fleet quad = make_quadratic_fleet(std::vector<double>{-1.0, 0.0, 2.0},
                                    std::vector<double>{1.0, 1.0, 1.0});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 2.0);
  for (const Fleet* f : {&logistic, &quad}) {
    const int dim = (*f)[0].objective->dim();
    for (int k = 0; k < 200; ++k) {
      Vector a(dim), b(dim), mid(dim);
      for (int j = 0; j < dim; ++j) {
        a[j] = g(rng);
        b[j] = g(rng);
        mid[j] = 0.5 * (a[j] + b[j]);
      }
      EXPECT_LE(federated_loss(mid, *f),
                0.5 * federated_loss(a, *f) + 0.5 * federated_loss(b, *f) + 1e-12);
    }
  }
}

TEST(ConvergenceResidual, IdenticalClientsFullGradientIsZero) {
  Fleet fleet = scalar_fleet({1.5, 1.5, 1.5}, {1.0, 2.0, 3.0});
  auto r = convergence_residual(fleet, importance_weights(fleet), Vector{1.5});
  EXPECT_EQ(r.mean, 0.0);
  EXPECT_EQ(r.standard_error, 0.0);
}

TEST(ConvergenceResidual, SingleClientAtOptimum) {
  Fleet fleet = scalar_fleet({0.4}, {1.0});
  EXPECT_EQ(convergence_residual(fleet, importance_weights(fleet), Vector{0.4}).mean, 0.0);
}

TEST(ConvergenceResidual, TwoScalarQuadratics) {
  Fleet fleet = scalar_fleet({0.0, 2.0}, {1.0, 1.0});
  auto r = convergence_residual(fleet, WeightVector{{0.5, 0.5}}, Vector{1.0});
  EXPECT_NEAR(r.mean, 1.0, 1e-15);
}

TEST(ConvergenceResidual, NoisyGradientsAddVariance) {
  Fleet fleet = scalar_fleet({0.0, 2.0}, {1.0, 1.0}, 0.5);
  auto r = convergence_residual(fleet, WeightVector{{0.5, 0.5}}, Vector{1.0}, 20000, 9);
  EXPECT_NEAR(r.mean, 1.25, 4 * r.standard_error);
  EXPECT_THROW(convergence_residual(fleet, WeightVector{{0.5, 0.5}}, Vector{1.0}, 0),
               ConfigError);
}

TEST(DistributionWeights, Examples) {
  Fleet shared = scalar_fleet({0.0, 0.0}, {1.0, 1.0});
  for (auto& c : shared) c.distribution_id = 0;
  auto one = distribution_weights(shared, importance_weights(shared));
  ASSERT_EQ(one.r.size(), 1u);
  EXPECT_DOUBLE_EQ(one.r[0], 1.0);
  EXPECT_DOUBLE_EQ(one.s_normalized[0], 1.0);

  Fleet ex = scalar_fleet({0.0, 0.0, 2.0, 2.0}, {1.0, 1.0, 1.0, 1.0});
  const int ids[] = {0, 0, 1, 1};
  for (int i = 0; i < 4; ++i) ex[i].distribution_id = ids[i];
  auto dw = distribution_weights(ex, WeightVector{{0.5, 0.0, 0.5, 0.0}});
  EXPECT_DOUBLE_EQ(dw.r[0], 0.5);
  EXPECT_DOUBLE_EQ(dw.r[1], 0.5);
  EXPECT_DOUBLE_EQ(dw.s_normalized[0], 0.5);
  EXPECT_DOUBLE_EQ(dw.s_normalized[1], 0.5);
  double total = 0.0;
  for (double r : dw.r) total += r;
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(WeightedOptimum, QuadraticClosedFormAndDescentAgree) {
  Fleet fleet = scalar_fleet({0.0, 2.0, 5.0}, {1.0, 1.0, 1.0});
  Vector w = {0.2, 0.3, 0.5};
  EXPECT_NEAR(weighted_optimum(fleet, w)[0], 0.2 * 0 + 0.3 * 2 + 0.5 * 5, 1e-12);

  SyntheticShardConfig sc;
  sc.num_clients = 2;
  sc.dim = 3;
  sc.seed = 11;
  auto data = make_synthetic_shards(sc);
  std::vector<std::shared_ptr<const Objective>> objs(data.shards.begin(),
                                                     data.shards.end());
  Fleet lf = make_fleet(objs, std::vector<double>{1.0, 1.0});
  Vector opt = weighted_optimum(lf, Vector{0.5, 0.5});
  Vector g0 = lf[0].objective->gradient(opt);
  Vector g1 = lf[1].objective->gradient(opt);
  for (size_t j = 0; j < opt.size(); ++j) EXPECT_NEAR(0.5 * g0[j] + 0.5 * g1[j], 0.0, 1e-9);
}

TEST(Fleet, ValidationErrors) {
  Fleet fleet = scalar_fleet({0.0, 1.0}, {1.0, 2.0});
  fleet[0].importance = 0.7;
  EXPECT_THROW(validate_fleet(fleet), ConfigError);
  fleet = scalar_fleet({0.0, 1.0}, {1.0, 2.0});
  fleet[1].compute_time = 0.0;
  EXPECT_THROW(validate_fleet(fleet), ConfigError);
  EXPECT_THROW(validate_fleet(Fleet{}), ConfigError);
}

}  // namespace
}  // namespace asyncfl
