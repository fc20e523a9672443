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

// Deterministic aggregation weights d_i, expected weights q_i(n), the
// window W and the window / distribution checks built on them.

#ifndef ASYNCFL_WEIGHTS_H_
#define ASYNCFL_WEIGHTS_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asyncfl/core.h"
#include "asyncfl/timing.h"

namespace asyncfl {

enum class WeightScheme {
  kIdentical,
  kFedAvg,
  kAsyncTimeBased,
  kFedFixTimeBased,
  // d_i making sampled aggregation unbiased: p_i M / m (uniform), 1 / m (MD).
  kSamplingUnbiased,
  kCustom,
};

WeightScheme parse_weight_scheme(const std::string& name);
std::string weight_scheme_name(WeightScheme scheme);

struct WeightPlan {
  WeightScheme scheme = WeightScheme::kFedAvg;
  Vector d;
  // 0 when the schedule has no computable window.
  int64_t window = 1;
  // Expected weight of each client averaged over one window; empty when it
  // cannot be computed in closed form.
  Vector q_over_window;
};

WeightPlan plan_weights(WeightScheme scheme, const Fleet& fleet,
                        const WaitPolicy& policy,
                        HardwareMode mode = HardwareMode::kFixed,
                        std::span<const double> custom = {});

// Sync / sampling: 1. Async: sum_i nu / tau_i with nu = lcm(tau). FedFix:
// lcm of ceil(tau_i / dt). FedBuff or merged ties: the simulated period.
int64_t window_size(const Fleet& fleet, const WaitPolicy& policy);

// q_i(n) for n = 0..rounds-1 under fixed hardware: realized 0/1
// participation times d_i, or analytic inclusion probabilities for the
// unbiased samplers.
std::vector<Vector> expected_weight_schedule(const Fleet& fleet,
                                             const WaitPolicy& policy,
                                             std::span<const double> d,
                                             int64_t rounds);

struct WindowReport {
  bool satisfied = false;
  double max_deviation = 0.0;
  int64_t windows = 0;
  // Trailing rounds that did not fill a window.
  bool truncated = false;
  // Normalized window averages, one vector per window.
  std::vector<Vector> normalized;
};

WindowReport verify_window_assumption(const std::vector<Vector>& q_by_round,
                                      int64_t window,
                                      std::span<const double> p,
                                      double tol = 1e-9);

struct ChiSquare {
  double value = 0.0;
  // Some distribution with r_j > 0 has s_j = 0; value is then +inf.
  bool unrepresented = false;
};

ChiSquare chi_square_bias(std::span<const double> r,
                          std::span<const double> s_normalized);

}  // namespace asyncfl

#endif  // ASYNCFL_WEIGHTS_H_
