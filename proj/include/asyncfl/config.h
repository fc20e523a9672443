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

// Experiment configuration documents (JSON, schema version 1).

#ifndef ASYNCFL_CONFIG_H_
#define ASYNCFL_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asyncfl/core.h"
#include "asyncfl/engine.h"
#include "asyncfl/objectives.h"
#include "asyncfl/timing.h"
#include "asyncfl/weights.h"
#include "json.hpp"

namespace asyncfl {

inline constexpr int kConfigSchemaVersion = 1;

struct BoundsSection {
  std::optional<double> smoothness;
  double rho = 1.0;
  std::optional<double> sigma;
  std::optional<double> sigma1;
  double chi_square = 0.0;
  // Wall-time budget used to derive N; 0 derives nothing.
  double time_budget = 0.0;
};

struct OracleSection {
  std::vector<int> checkpoints = {1, 5, 20};
  int n_seeds = 1000;
};

struct SweepSection {
  std::string axis;
  std::vector<double> values;
};

struct FleetRecipe {
  Vector compute_times;
  Vector phases;
  Vector importance;
  std::vector<int> distribution_ids;
  // "quadratic", "logistic" or "linear".
  std::string family = "quadratic";
  std::vector<Vector> optima;
  double curvature = 0.5;
  double noise_std = 0.0;
  SyntheticShardConfig shards;
};

struct ExperimentConfig {
  nlohmann::json raw;

  FleetRecipe recipe;
  Fleet fleet;
  HardwareMode hardware = HardwareMode::kFixed;

  WaitPolicy policy;
  WeightScheme weight_scheme = WeightScheme::kFedAvg;
  Vector custom_weights;

  double server_lr = 1.0;
  double local_lr = 0.1;
  int local_steps = 1;
  int batch_size = 0;
  Vector initial_params;
  std::optional<int> staleness_cap;
  bool record_snapshots = false;

  Horizon horizon;
  int n_seeds = 1;
  uint64_t base_seed = 0;
  std::string out_dir = "out";
  int cadence = 1;

  BoundsSection bounds;
  OracleSection oracle;
  SweepSection sweep;
};

// Throws ConfigError with a path-qualified message on any schema problem.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

// Builds the fleet from the current fields (used after sweeps edit them).
void rebuild_fleet(ExperimentConfig& cfg);

// Weight plan and engine configuration for one seed.
RunConfig make_run_config(const ExperimentConfig& cfg, uint64_t seed);

}  // namespace asyncfl

#endif  // ASYNCFL_CONFIG_H_
