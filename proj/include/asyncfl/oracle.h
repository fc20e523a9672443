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

// Closed-form mean and second-moment recursions for scalar quadratic
// clients L_i = (theta - theta_i*)^2 / 2 with equal importance.

#ifndef ASYNCFL_ORACLE_H_
#define ASYNCFL_ORACLE_H_

#include <span>
#include <string>
#include <vector>

#include "asyncfl/objectives.h"

namespace asyncfl::oracle {

enum class Scheme { kSync, kSyncUniform, kAsync, kHybrid, kHybridEvo };

std::string scheme_name(Scheme scheme);
Scheme parse_scheme(const std::string& name);

struct SchemeSpec {
  Scheme scheme = Scheme::kSync;
  int num_clients = 1;
  // Sample size m for kSyncUniform.
  int sample_size = 0;
  // Window length T for kHybrid (clients finish with prob 1 - e^{-T}).
  double window = 0.0;
  // Per-round window lengths for kHybridEvo; needs one entry per round.
  Vector windows;

  void validate(int rounds) const;
};

double phi(double local_lr, int steps);

// q_{n,k} = P(contribution applied at round n was anchored at k), k = 0..n.
Vector staleness_law(const SchemeSpec& spec, int n);

// The asynchronous law in exact rational arithmetic, as "p/q" strings, and
// its exact sum.
std::vector<std::string> exact_async_staleness_law(int num_clients, int n);
std::string exact_async_staleness_sum(int num_clients, int n);

struct Expectation {
  Vector a;
  Vector b;

  double mean(int n, double theta0) const { return a[n] * theta0 + b[n]; }
};

// E[theta^n] = a[n] theta0 + b[n]. Windowed schemes track the mean anchor
// model directly since a client's arrival also moves theta^{n+1}.
Expectation expectation_recursion(const SchemeSpec& spec, double phi,
                                  double server_lr, double optimum, int rounds);

struct SecondMoment {
  // E[(theta^n - theta*)^2], n = 0..rounds.
  Vector second_moment;
  // u[v][w] = E[(theta* - theta^v)(theta* - theta^w)] for w <= v.
  std::vector<Vector> u;
  // Per-round scheme constants (gamma, participation R, weight d).
  Vector gamma;
  Vector participation;
  Vector weight;

  double inner(int v, int w) const { return v >= w ? u[v][w] : u[w][v]; }
};

// Unit server step. theta* is the mean of the client optima.
SecondMoment variance_recursion(const SchemeSpec& spec, double phi,
                                std::span<const double> client_optima,
                                double theta0, int rounds);

// Mean round duration with common exponential rate `rate`.
double expected_round_time(const SchemeSpec& spec, double rate);

}  // namespace asyncfl::oracle

#endif  // ASYNCFL_ORACLE_H_
