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

// Shared domain vocabulary: clients, models, weight vectors and the
// federated / surrogate objectives.

#ifndef ASYNCFL_CORE_H_
#define ASYNCFL_CORE_H_

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "asyncfl/objectives.h"

namespace asyncfl {

struct ClientSpec {
  int id = 0;
  double importance = 1.0;
  // Fixed duration of one local round, or its mean under exponential
  // hardware (rate 1 / compute_time).
  double compute_time = 1.0;
  // Remaining time of the very first local round. 0 means a full round.
  double phase = 0.0;
  int distribution_id = 0;
  std::shared_ptr<const Objective> objective;
};

using Fleet = std::vector<ClientSpec>;

// Checks importance normalization, positive compute times, ids 0..M-1 and a
// common objective dimension. Returns the model dimension.
int validate_fleet(const Fleet& fleet);

// Equal-importance fleet with one distribution per client.
Fleet make_fleet(std::vector<std::shared_ptr<const Objective>> objectives,
                 std::span<const double> compute_times);

// Scalar quadratic fleet L_i = a (theta - optima_i)^2.
Fleet make_quadratic_fleet(std::span<const double> optima,
                           std::span<const double> compute_times,
                           double curvature = 0.5, double noise_std = 0.0);

struct GlobalModel {
  Vector params;
  int round = 0;
  double wall_time = 0.0;
};

struct Contribution {
  int client_id = 0;
  int anchor_round = 0;
  Vector delta;
  double delivery_time = 0.0;
};

enum class WeightKind { kImportance, kDeterministic, kExpected, kNormalized };

struct WeightVector {
  Vector values;
  WeightKind kind = WeightKind::kExpected;

  // Nonnegative, finite; normalized kind must sum to 1 within 1e-12.
  void validate() const;
  // values / sum(values), kind normalized.
  WeightVector normalized() const;
};

WeightVector importance_weights(const Fleet& fleet);

double federated_loss(std::span<const double> params, const Fleet& fleet);
double surrogate_loss(std::span<const double> params, const WeightVector& q,
                      const Fleet& fleet);

struct ResidualEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  int draws = 0;
};

// Monte-Carlo estimate of sum_i q_i E||grad L_i(optimum, xi)||^2.
ResidualEstimate convergence_residual(const Fleet& fleet, const WeightVector& q,
                                      std::span<const double> optimum,
                                      int draws = 1000, uint64_t seed = 0,
                                      int batch_size = 0);

struct DistributionWeights {
  Vector r;
  Vector s;
  Vector s_normalized;
};

// Indexed by distribution id 0..J-1 with J = max id + 1.
DistributionWeights distribution_weights(const Fleet& fleet,
                                         const WeightVector& q);

// Minimizer of sum_i w_i L_i. Closed form when every objective is quadratic,
// otherwise gradient descent with backtracking to gradient norm < tol.
Vector weighted_optimum(const Fleet& fleet, std::span<const double> weights,
                        double tol = 1e-10);
Vector minimize(const Objective& objective, double tol = 1e-10);

// Returns nullptr when the client objective is not quadratic.
const QuadraticObjective* as_quadratic(const ClientSpec& client);

}  // namespace asyncfl

#endif  // ASYNCFL_CORE_H_
