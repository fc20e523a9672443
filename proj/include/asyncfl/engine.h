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

// The simulation loop: timing, local work and aggregation, with recorded
// trajectories and Monte-Carlo ensembles.

#ifndef ASYNCFL_ENGINE_H_
#define ASYNCFL_ENGINE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asyncfl/core.h"
#include "asyncfl/timing.h"
#include "asyncfl/weights.h"

namespace asyncfl {

// Exactly one of rounds / time must be positive.
struct Horizon {
  int64_t rounds = 0;
  double time = 0.0;
};

struct RunSeeds {
  uint64_t hardware = 0;
  uint64_t batching = 0;
  uint64_t sampling = 0;

  static RunSeeds from_base(uint64_t base);
};

struct RunConfig {
  Fleet fleet;
  WaitPolicy policy;
  HardwareMode hardware = HardwareMode::kFixed;
  WeightPlan weights;
  double server_lr = 1.0;
  double local_lr = 0.1;
  int local_steps = 1;
  // 0 = full batch.
  int batch_size = 0;
  Horizon horizon;
  // Record every k-th round (round 0 and the last round always).
  int metric_every = 1;
  RunSeeds seeds;
  std::optional<int> staleness_cap;
  bool record_snapshots = false;
  // Per-client and surrogate losses; off for cheap ensemble members.
  bool client_metrics = true;
  // theta^0; zeros when empty.
  Vector initial_params;
  // Reference optimum for dist_sq; the p-weighted optimum when empty.
  Vector optimum;

  void validate() const;
};

struct RoundRecord {
  int64_t round = 0;
  double time = 0.0;
  // Contributors that produced this model (S_{n-1}).
  std::vector<int> participants;
  std::vector<int> staleness;
  Vector params;
  double loss_fed = 0.0;
  double loss_surrogate = 0.0;
  double dist_sq = 0.0;
  Vector client_losses;
};

// Local paths of one aggregation, for the virtual model sequence.
struct RoundSnapshot {
  Vector base;
  std::vector<int> clients;
  Vector weights;
  // paths[c][k] = theta_c^{(rho, k)} - theta^{rho}.
  std::vector<std::vector<Vector>> paths;
};

struct Trajectory {
  int num_clients = 0;
  int local_steps = 1;
  double server_lr = 1.0;
  Vector optimum;
  std::vector<RoundRecord> records;
  std::vector<RoundSnapshot> snapshots;
  int64_t rounds = 0;
  double final_time = 0.0;
  Vector final_params;
  bool diverged = false;
  int64_t divergence_round = -1;
  std::string divergence_reason;
  // Clients whose update was never aggregated.
  int never_served = 0;
};

Trajectory run(const RunConfig& config);

// theta + lr * sum_c w_c delta_c, summed in the given order. Shared by the
// engine and virtual_sequence so endpoints agree bitwise.
Vector aggregate(std::span<const double> theta, double server_lr,
                 std::span<const double> weights,
                 const std::vector<const Vector*>& deltas);

// theta^{n,k} for k = 0..K.
std::vector<Vector> virtual_sequence(const Trajectory& trajectory, int64_t n);

struct EnsembleStats {
  std::vector<int64_t> rounds;
  std::vector<Vector> mean_params;
  std::vector<Vector> var_params;
  std::vector<Vector> se_params;
  Vector mean_dist_sq;
  Vector var_dist_sq;
  Vector se_dist_sq;
  int members = 0;
  int diverged = 0;
};

// One run per seed (RunSeeds::from_base), merged in seed order. Requires a
// round horizon and at least two distinct seeds.
EnsembleStats run_ensemble(const RunConfig& config,
                           std::span<const uint64_t> seeds, int threads = 0);
EnsembleStats run_ensemble(const RunConfig& config, int n_seeds,
                           uint64_t base_seed, int threads = 0);

std::string format_double(double v);
std::string trajectory_csv_header(int num_clients);
std::string trajectory_csv(const Trajectory& trajectory);
// temp file then rename.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace asyncfl

#endif  // ASYNCFL_ENGINE_H_
