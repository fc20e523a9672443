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

// Client clocks and the server waiting policy: who contributes at round n,
// how long the round lasts, and the staleness anchor of every client.

#ifndef ASYNCFL_TIMING_H_
#define ASYNCFL_TIMING_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asyncfl/core.h"
#include "asyncfl/rng.h"

namespace asyncfl {

enum class PolicyKind {
  kSynchronous,
  kAsynchronous,
  kFedFix,
  kFedBuff,
  kSampleUniform,
  kSampleMd,
  kSampleBiased,
};

enum class BiasCriterion { kFastest, kHighestLoss };

// How simultaneous finishers are handled by the asynchronous and FedBuff
// policies. kSerialize applies them one per round (zero-length rounds, lower
// client index first); kMerge aggregates them together.
enum class TieBreak { kSerialize, kMerge };

struct WaitPolicy {
  PolicyKind kind = PolicyKind::kSynchronous;
  // FedFix interval.
  double interval = 0.0;
  // FedBuff buffer size or sample size.
  int m = 0;
  BiasCriterion criterion = BiasCriterion::kFastest;
  TieBreak ties = TieBreak::kSerialize;

  static WaitPolicy synchronous();
  static WaitPolicy asynchronous(TieBreak ties = TieBreak::kSerialize);
  static WaitPolicy fedfix(double interval);
  static WaitPolicy fedbuff(int m, TieBreak ties = TieBreak::kSerialize);
  static WaitPolicy sample_uniform(int m);
  static WaitPolicy sample_md(int m);
  static WaitPolicy sample_biased(int m, BiasCriterion criterion);

  void validate(int num_clients) const;
  bool is_sampling() const;
  std::string name() const;
};

enum class HardwareMode { kFixed, kExponential };

struct HardwareModel {
  HardwareMode mode = HardwareMode::kFixed;
  uint64_t seed = 0;
};

// Maps positive rationals onto a common integer grid so that clock
// arithmetic in fixed hardware mode is exact.
class TimeScale {
 public:
  TimeScale() = default;
  // Falls back to an inexact unit scale when some value is not a rational
  // with a small denominator.
  static TimeScale fit(std::span<const double> values);

  bool exact() const { return exact_; }
  // Ticks per time unit.
  double resolution() const { return resolution_; }
  double to_ticks(double t) const { return exact_ ? std::round(t * resolution_) : t; }
  double to_time(double ticks) const { return ticks / resolution_; }

 private:
  bool exact_ = false;
  double resolution_ = 1.0;
};

struct FleetState {
  // Remaining time T_i^n in ticks; +inf for idle clients.
  std::vector<double> remaining;
  std::vector<int> anchor;
  std::vector<char> busy;
  double clock = 0.0;
  int round = 0;
};

struct RoundOutcome {
  // Sorted, unique.
  std::vector<int> participants;
  // Number of times each participant was drawn (MD sampling may repeat).
  std::vector<int> multiplicity;
  // rho_i(n) of each participant.
  std::vector<int> anchors;
  // Round duration in time units.
  double dt = 0.0;
};

class Scheduler {
 public:
  Scheduler(const Fleet& fleet, WaitPolicy policy, HardwareModel hw,
            uint64_t sampling_seed = 0);

  // All clients busy on theta^0 at t = 0 (sampling policies: all idle).
  FleetState initial_state();
  // `scores` are per-client losses, required by the highest-loss sampler.
  RoundOutcome advance(FleetState& state, std::span<const double> scores = {});

  const WaitPolicy& policy() const { return policy_; }
  const TimeScale& scale() const { return scale_; }
  int num_clients() const { return static_cast<int>(duration_.size()); }
  double clock_time(const FleetState& s) const { return scale_.to_time(s.clock); }

 private:
  double draw(int i);
  double tick_tolerance() const;

  WaitPolicy policy_;
  HardwareModel hw_;
  TimeScale scale_;
  std::vector<double> duration_;
  std::vector<double> phase_;
  std::vector<double> importance_;
  double interval_ticks_ = 0.0;
  Rng hw_rng_;
  Rng sampling_rng_;
};

// Exact maximum of n - rho_i(n) over a full schedule cycle (fixed
// hardware). FedFix returns ceil(tau_M / dt), or 0 when dt >= tau_M.
int staleness_bound(const Fleet& fleet, const WaitPolicy& policy,
                    HardwareMode mode = HardwareMode::kFixed);

// Largest staleness actually applied by the FedFix or asynchronous
// schedule over one cycle, by simulation.
int measured_staleness(const Fleet& fleet, const WaitPolicy& policy);

// lcm of the compute times in time units; nullopt when the times are not
// commensurate on a small grid or the lcm overflows.
std::optional<double> compute_time_lcm(const Fleet& fleet);

struct SamplerCovariance {
  double alpha = 1.0;
  double beta = 0.0;
  bool biased = false;
};

// (alpha, beta) with E[w_i w_j] = alpha q_i q_j (i != j) and
// E[w_i^2] - alpha q_i^2 <= beta q_i, for deterministic weights d.
SamplerCovariance sampler_covariance(const WaitPolicy& policy,
                                     std::span<const double> d,
                                     std::span<const double> p);

// Rounds after which the fixed-hardware schedule repeats (relative
// staleness and clocks identical), searched up to max_rounds.
std::optional<int64_t> schedule_period(const Fleet& fleet,
                                       const WaitPolicy& policy,
                                       int64_t max_rounds = 2000000);

}  // namespace asyncfl

#endif  // ASYNCFL_TIMING_H_
