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

#include "asyncfl/config.h"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "asyncfl/errors.h"

namespace asyncfl {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

void allow_keys(const json& j, std::initializer_list<const char*> keys,
                const std::string& path) {
  require_object(j, path);
  std::set<std::string> ok(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) {
      throw ConfigError(path + ": unknown key '" + it.key() + "'");
    }
  }
}

double num(const json& j, const char* key, const std::string& path,
           double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
  double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path + "." + key + ": not finite");
  return d;
}

int integer(const json& j, const char* key, const std::string& path,
            int fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) {
    throw ConfigError(path + "." + key + ": expected an integer");
  }
  return v.get<int>();
}

std::string str(const json& j, const char* key, const std::string& path,
                const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

Vector numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of numbers");
  Vector out;
  for (const json& v : j) {
    if (!v.is_number()) throw ConfigError(path + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

PolicyKind parse_policy(const std::string& name, const std::string& path) {
  if (name == "synchronous") return PolicyKind::kSynchronous;
  if (name == "asynchronous") return PolicyKind::kAsynchronous;
  if (name == "fedfix") return PolicyKind::kFedFix;
  if (name == "fedbuff") return PolicyKind::kFedBuff;
  if (name == "sample_uniform") return PolicyKind::kSampleUniform;
  if (name == "sample_md") return PolicyKind::kSampleMd;
  if (name == "sample_biased") return PolicyKind::kSampleBiased;
  throw ConfigError(path + ": unknown policy '" + name + "'");
}

void parse_fleet(const json& j, ExperimentConfig& cfg) {
  const std::string path = "fleet";
  allow_keys(j, {"num_clients", "importance", "compute_times", "rates",
                 "phases", "hardware", "distribution_ids", "objective"},
             path);
  FleetRecipe& r = cfg.recipe;
  if (!j.contains("num_clients")) throw ConfigError("fleet.num_clients is required");
  const int m = integer(j, "num_clients", path, 0);
  if (m < 1) throw ConfigError("fleet.num_clients must be >= 1");
  if (j.contains("compute_times") && j.contains("rates")) {
    throw ConfigError("fleet: give compute_times or rates, not both");
  }
  if (j.contains("compute_times")) {
    r.compute_times = numbers(j.at("compute_times"), path + ".compute_times");
  } else if (j.contains("rates")) {
    for (double rate : numbers(j.at("rates"), path + ".rates")) {
      if (!(rate > 0)) throw ConfigError("fleet.rates must be > 0");
      r.compute_times.push_back(1.0 / rate);
    }
  } else {
    r.compute_times.assign(m, 1.0);
  }
  if (static_cast<int>(r.compute_times.size()) != m) {
    throw ConfigError("fleet: need one compute time per client");
  }
  r.phases = j.contains("phases") ? numbers(j.at("phases"), path + ".phases")
                                  : Vector(m, 0.0);
  r.importance = j.contains("importance")
                     ? numbers(j.at("importance"), path + ".importance")
                     : Vector(m, 1.0 / m);
  if (static_cast<int>(r.phases.size()) != m ||
      static_cast<int>(r.importance.size()) != m) {
    throw ConfigError("fleet: phases / importance need one entry per client");
  }
  r.distribution_ids.clear();
  if (j.contains("distribution_ids")) {
    for (double v : numbers(j.at("distribution_ids"), path + ".distribution_ids")) {
      r.distribution_ids.push_back(static_cast<int>(v));
    }
    if (static_cast<int>(r.distribution_ids.size()) != m) {
      throw ConfigError("fleet.distribution_ids needs one entry per client");
    }
  }
  const std::string hw = str(j, "hardware", path, "fixed");
  if (hw == "fixed") {
    cfg.hardware = HardwareMode::kFixed;
  } else if (hw == "exponential") {
    cfg.hardware = HardwareMode::kExponential;
  } else {
    throw ConfigError("fleet.hardware must be 'fixed' or 'exponential'");
  }

  if (!j.contains("objective")) throw ConfigError("fleet.objective is required");
  const json& o = j.at("objective");
  const std::string opath = path + ".objective";
  require_object(o, opath);
  r.family = str(o, "family", opath, "quadratic");
  if (r.family == "quadratic") {
    allow_keys(o, {"family", "optima", "curvature", "noise_std"}, opath);
    if (!o.contains("optima")) throw ConfigError(opath + ".optima is required");
    const json& opt = o.at("optima");
    if (!opt.is_array() || static_cast<int>(opt.size()) != m) {
      throw ConfigError(opath + ".optima needs one entry per client");
    }
    r.optima.clear();
    for (const json& v : opt) {
      if (v.is_number()) {
        r.optima.push_back({v.get<double>()});
      } else {
        r.optima.push_back(numbers(v, opath + ".optima"));
      }
      if (r.optima.back().size() != r.optima.front().size()) {
        throw ConfigError(opath + ".optima entries differ in dimension");
      }
    }
    r.curvature = num(o, "curvature", opath, 0.5);
    r.noise_std = num(o, "noise_std", opath, 0.0);
  } else if (r.family == "logistic" || r.family == "linear") {
    allow_keys(o, {"family", "dim", "samples_per_client", "concentration",
                   "l2", "shard_seed"},
               opath);
    r.shards.num_clients = m;
    r.shards.dim = integer(o, "dim", opath, 5);
    r.shards.samples_per_client = integer(o, "samples_per_client", opath, 64);
    r.shards.concentration = num(o, "concentration", opath, 0.1);
    r.shards.l2 = num(o, "l2", opath, 1e-2);
    r.shards.seed = static_cast<uint64_t>(integer(o, "shard_seed", opath, 0));
    r.shards.link = r.family == "logistic" ? Link::kLogistic : Link::kLinear;
  } else {
    throw ConfigError(opath + ".family must be quadratic, logistic or linear");
  }
}

void parse_scheme(const json& j, ExperimentConfig& cfg) {
  const std::string path = "scheme";
  allow_keys(j, {"policy", "interval", "m", "criterion", "ties", "weights",
                 "custom_weights"},
             path);
  WaitPolicy& p = cfg.policy;
  p.kind = parse_policy(str(j, "policy", path, "synchronous"), path + ".policy");
  p.interval = num(j, "interval", path, 0.0);
  p.m = integer(j, "m", path, 0);
  const std::string crit = str(j, "criterion", path, "fastest");
  if (crit == "fastest") {
    p.criterion = BiasCriterion::kFastest;
  } else if (crit == "highest_loss") {
    p.criterion = BiasCriterion::kHighestLoss;
  } else {
    throw ConfigError("scheme.criterion must be fastest or highest_loss");
  }
  const std::string ties = str(j, "ties", path, "serialize");
  if (ties == "serialize") {
    p.ties = TieBreak::kSerialize;
  } else if (ties == "merge") {
    p.ties = TieBreak::kMerge;
  } else {
    throw ConfigError("scheme.ties must be serialize or merge");
  }
  cfg.weight_scheme = parse_weight_scheme(str(j, "weights", path, "fedavg"));
  if (j.contains("custom_weights")) {
    cfg.custom_weights = numbers(j.at("custom_weights"), path + ".custom_weights");
  }
}

}  // namespace

void rebuild_fleet(ExperimentConfig& cfg) {
  const FleetRecipe& r = cfg.recipe;
  const size_t m = r.compute_times.size();
  std::vector<std::shared_ptr<const Objective>> objs;
  std::vector<int> ids = r.distribution_ids;
  if (r.family == "quadratic") {
    for (const Vector& o : r.optima) {
      objs.push_back(std::make_shared<QuadraticObjective>(
          QuadraticObjective::centered(o, r.curvature, r.noise_std)));
    }
  } else {
    SyntheticShardConfig sc = r.shards;
    sc.num_clients = static_cast<int>(m);
    SyntheticFleetData data = make_synthetic_shards(sc);
    for (auto& s : data.shards) objs.push_back(s);
    if (ids.empty()) ids = data.distribution_ids;
  }
  cfg.fleet = make_fleet(std::move(objs), r.compute_times);
  for (size_t i = 0; i < m; ++i) {
    cfg.fleet[i].importance = r.importance[i];
    cfg.fleet[i].phase = r.phases[i];
    if (!ids.empty()) cfg.fleet[i].distribution_id = ids[i];
  }
  validate_fleet(cfg.fleet);
}

ExperimentConfig parse_config(const json& doc) {
  allow_keys(doc, {"schema_version", "fleet", "scheme", "optimization",
                   "horizon", "ensemble", "outputs", "bounds", "oracle",
                   "sweep"},
             "config");
  if (!doc.contains("schema_version") ||
      !doc.at("schema_version").is_number_integer() ||
      doc.at("schema_version").get<int>() != kConfigSchemaVersion) {
    throw ConfigError("config.schema_version must be " +
                      std::to_string(kConfigSchemaVersion));
  }
  ExperimentConfig cfg;
  cfg.raw = doc;
  if (!doc.contains("fleet")) throw ConfigError("config.fleet is required");
  parse_fleet(doc.at("fleet"), cfg);
  if (doc.contains("scheme")) parse_scheme(doc.at("scheme"), cfg);

  // Synthetic shards default to minibatches of 8; quadratics ignore it.
  cfg.batch_size = cfg.recipe.family == "quadratic" ? 0 : 8;
  if (doc.contains("optimization")) {
    const json& o = doc.at("optimization");
    const std::string path = "optimization";
    allow_keys(o, {"server_lr", "local_lr", "local_steps", "batch_size",
                   "initial_params", "staleness_cap", "snapshots"},
               path);
    cfg.server_lr = num(o, "server_lr", path, 1.0);
    cfg.local_lr = num(o, "local_lr", path, 0.1);
    cfg.local_steps = integer(o, "local_steps", path, 1);
    cfg.batch_size = integer(o, "batch_size", path, cfg.batch_size);
    if (o.contains("initial_params")) {
      const json& ip = o.at("initial_params");
      cfg.initial_params = ip.is_number() ? Vector{ip.get<double>()}
                                          : numbers(ip, path + ".initial_params");
    }
    if (o.contains("staleness_cap")) {
      cfg.staleness_cap = integer(o, "staleness_cap", path, 0);
    }
    if (o.contains("snapshots")) {
      if (!o.at("snapshots").is_boolean()) {
        throw ConfigError("optimization.snapshots: expected a boolean");
      }
      cfg.record_snapshots = o.at("snapshots").get<bool>();
    }
  }

  if (!doc.contains("horizon")) throw ConfigError("config.horizon is required");
  {
    const json& h = doc.at("horizon");
    allow_keys(h, {"rounds", "time"}, "horizon");
    if (h.contains("rounds") == h.contains("time")) {
      throw ConfigError("horizon needs exactly one of rounds or time");
    }
    cfg.horizon.rounds = integer(h, "rounds", "horizon", 0);
    cfg.horizon.time = num(h, "time", "horizon", 0.0);
  }
  if (doc.contains("ensemble")) {
    const json& e = doc.at("ensemble");
    allow_keys(e, {"n_seeds", "base_seed"}, "ensemble");
    cfg.n_seeds = integer(e, "n_seeds", "ensemble", 1);
    if (e.contains("base_seed")) {
      if (!e.at("base_seed").is_number_unsigned()) {
        throw ConfigError("ensemble.base_seed: expected a nonnegative integer");
      }
      cfg.base_seed = e.at("base_seed").get<uint64_t>();
    }
    if (cfg.n_seeds < 1) throw ConfigError("ensemble.n_seeds must be >= 1");
  }
  if (doc.contains("outputs")) {
    const json& o = doc.at("outputs");
    allow_keys(o, {"directory", "cadence"}, "outputs");
    cfg.out_dir = str(o, "directory", "outputs", "out");
    cfg.cadence = integer(o, "cadence", "outputs", 1);
  }
  if (doc.contains("bounds")) {
    const json& b = doc.at("bounds");
    allow_keys(b, {"smoothness", "rho", "sigma", "sigma1", "chi_square",
                   "time_budget"},
               "bounds");
    if (b.contains("smoothness")) cfg.bounds.smoothness = num(b, "smoothness", "bounds", 1.0);
    cfg.bounds.rho = num(b, "rho", "bounds", 1.0);
    if (b.contains("sigma")) cfg.bounds.sigma = num(b, "sigma", "bounds", 0.0);
    if (b.contains("sigma1")) cfg.bounds.sigma1 = num(b, "sigma1", "bounds", 0.0);
    cfg.bounds.chi_square = num(b, "chi_square", "bounds", 0.0);
    cfg.bounds.time_budget = num(b, "time_budget", "bounds", 0.0);
  }
  if (doc.contains("oracle")) {
    const json& o = doc.at("oracle");
    allow_keys(o, {"checkpoints", "n_seeds"}, "oracle");
    if (o.contains("checkpoints")) {
      cfg.oracle.checkpoints.clear();
      for (double v : numbers(o.at("checkpoints"), "oracle.checkpoints")) {
        cfg.oracle.checkpoints.push_back(static_cast<int>(v));
      }
    }
    cfg.oracle.n_seeds = integer(o, "n_seeds", "oracle", 1000);
  }
  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    allow_keys(s, {"axis", "values"}, "sweep");
    cfg.sweep.axis = str(s, "axis", "sweep", "");
    if (s.contains("values")) cfg.sweep.values = numbers(s.at("values"), "sweep.values");
  }

  rebuild_fleet(cfg);
  cfg.policy.validate(static_cast<int>(cfg.fleet.size()));
  // Surface weight / engine problems at load time.
  make_run_config(cfg, cfg.base_seed).validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path);
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(doc);
}

RunConfig make_run_config(const ExperimentConfig& cfg, uint64_t seed) {
  RunConfig rc;
  rc.fleet = cfg.fleet;
  rc.policy = cfg.policy;
  rc.hardware = cfg.hardware;
  rc.weights = plan_weights(cfg.weight_scheme, cfg.fleet, cfg.policy,
                            cfg.hardware, cfg.custom_weights);
  rc.server_lr = cfg.server_lr;
  rc.local_lr = cfg.local_lr;
  rc.local_steps = cfg.local_steps;
  rc.batch_size = cfg.batch_size;
  rc.horizon = cfg.horizon;
  rc.metric_every = cfg.cadence;
  rc.seeds = RunSeeds::from_base(seed);
  rc.staleness_cap = cfg.staleness_cap;
  rc.record_snapshots = cfg.record_snapshots;
  rc.initial_params = cfg.initial_params;
  return rc;
}

}  // namespace asyncfl
