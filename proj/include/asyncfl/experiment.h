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

// The operations behind each CLI subcommand.

#ifndef ASYNCFL_EXPERIMENT_H_
#define ASYNCFL_EXPERIMENT_H_

#include <cstdint>
#include <string>
#include <vector>

#include "asyncfl/config.h"
#include "asyncfl/engine.h"
#include "asyncfl/oracle.h"

namespace asyncfl {

// FNV-1a 64 of the canonical config dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

struct WindowStats {
  double mean = 0.0;
  double stddev = 0.0;
  int samples = 0;
};

// Federated loss over the records with round >= ceil(0.95 * last round).
WindowStats final_window_loss(const Trajectory& trajectory);

struct SimulateResult {
  Trajectory trajectory;
  WindowStats final_loss;
  std::string csv_path;
  std::string log_path;
  double wall_seconds = 0.0;
};

// Writes trajectory.csv and run_log.json into out_dir (created if needed).
SimulateResult simulate(const ExperimentConfig& cfg, const std::string& out_dir);

struct OracleCheckpoint {
  int round = 0;
  double oracle_mean = 0.0;
  double empirical_mean = 0.0;
  double mean_se = 0.0;
  bool mean_pass = false;
  double oracle_second_moment = 0.0;
  double empirical_second_moment = 0.0;
  double second_moment_se = 0.0;
  bool second_moment_pass = false;
};

struct OracleCheckReport {
  oracle::SchemeSpec spec;
  double phi = 0.0;
  int members = 0;
  int diverged = 0;
  // Whether the scheme's second-moment recursion is exact (and therefore
  // counted towards `pass`).
  bool second_moment_exact = false;
  std::vector<OracleCheckpoint> checkpoints;
  bool pass = false;
  std::vector<std::string> notes;
};

// Maps the config onto an oracle scheme (UnsupportedError when none
// applies) and compares it with a run_ensemble of the engine.
oracle::SchemeSpec oracle_scheme_for(const ExperimentConfig& cfg);
OracleCheckReport oracle_check(const ExperimentConfig& cfg, int threads = 0);
std::string format_oracle_report(const OracleCheckReport& report);

std::string bounds_report(const ExperimentConfig& cfg);

struct SweepRow {
  double value = 0.0;
  // Mean over seeds of the final-window mean / std of the federated loss.
  double loss_mean = 0.0;
  double loss_std = 0.0;
  // Standard deviation across seeds of the final-window mean.
  double seed_std = 0.0;
  int seeds = 0;
  int diverged = 0;
  int64_t rounds = 0;
};

// Axis is one of local_lr, K, interval, m. Writes sweep.csv when out_dir
// is non-empty.
std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const std::string& axis,
                            const std::vector<double>& values,
                            const std::string& out_dir, int threads = 0);
std::string sweep_csv(const std::string& axis, const std::vector<SweepRow>& rows);

// One CSV per client shard; returns the written paths.
std::vector<std::string> gen_shards(const ExperimentConfig& cfg,
                                    const std::string& out_dir);

}  // namespace asyncfl

#endif  // ASYNCFL_EXPERIMENT_H_
