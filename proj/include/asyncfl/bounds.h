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

// Evaluable convergence-bound terms. Every O(.) constant is taken as 1, so
// values are for ordering and trend checks only.

#ifndef ASYNCFL_BOUNDS_H_
#define ASYNCFL_BOUNDS_H_

#include <string>
#include <vector>

#include "asyncfl/core.h"
#include "asyncfl/timing.h"
#include "asyncfl/weights.h"

namespace asyncfl::bounds {

struct BoundInputs {
  int num_clients = 1;
  int local_steps = 1;
  double rounds = 1.0;
  double server_lr = 1.0;
  double local_lr = 0.01;
  double smoothness = 1.0;
  double staleness = 0.0;
  double window = 1.0;
  double alpha = 1.0;
  double beta = 0.0;
  double sigma = 0.0;
  double sigma1 = 0.0;
  double max_q = 1.0;
  double residual = 0.0;
  double init_dist_sq = 0.0;
  double chi_square = 0.0;
  double rho = 1.0;

  void validate() const;
};

struct EpsilonTerms {
  double init = 0.0;
  double local = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double window = 0.0;
  // Sum of the five terms above.
  double total = 0.0;
};

EpsilonTerms epsilon_terms(const BoundInputs& in);

// 1 / (48 K L) * min(1, 1 / (3 rho^2 eta_g (tau + 1))).
double lr_constraint(int local_steps, double smoothness, double rho,
                     double server_lr, double staleness);

// R = mean_n [L^n(theta_bar) - L^n(theta_bar^n)] over the given expected
// weight rows, theta_bar the optimum of their average.
double surrogate_residual(const Fleet& fleet,
                          const std::vector<Vector>& q_by_round);

// Quadratic fleets only: sum_i q_i E||grad L_i(x, xi)||^2 at the optimum of
// sum_i q_i L_i, and its per-round normalized average (Sigma_1).
double quadratic_sigma(const Fleet& fleet, const Vector& q);
double quadratic_sigma1(const Fleet& fleet,
                        const std::vector<Vector>& q_by_round);

struct Preset {
  BoundInputs inputs;
  std::string scheme;
  bool residual_exact = false;
  std::vector<std::string> notes;
};

// Fills alpha, beta, tau, W, N (from time_budget when > 0), max q and R for
// the fleet under fixed hardware; other fields come from `base`.
Preset scheme_presets(const Fleet& fleet, const WaitPolicy& policy,
                      const WeightPlan& plan, double time_budget,
                      const BoundInputs& base = {});

// True iff max(a, b) < c < 1.
bool exponent_check(double a, double b, double c);

struct ClosedFormInputs {
  int local_steps = 1;
  double rounds = 1.0;
  int num_clients = 1;
  double init_dist_sq = 0.0;
  double sigma = 0.0;
  double residual = 0.0;
  // tau_M / tau_0.
  double speed_ratio = 1.0;
  // ceil(tau_M / dt).
  double fedfix_periods = 1.0;
  double window = 1.0;
};

// Per-scheme simplified bounds: "sync", "async", "fedfix".
double closed_form_epsilon(const std::string& scheme,
                           const ClosedFormInputs& in);

// key=value lines, one per input and term.
std::string format_report(const std::string& scheme, const BoundInputs& in,
                          const EpsilonTerms& terms,
                          const std::vector<std::string>& notes = {});

}  // namespace asyncfl::bounds

#endif  // ASYNCFL_BOUNDS_H_
