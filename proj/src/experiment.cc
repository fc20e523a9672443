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

#include "asyncfl/experiment.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "asyncfl/bounds.h"
#include "asyncfl/errors.h"

namespace asyncfl {

namespace {

using nlohmann::json;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

bool equal_importance(const Fleet& fleet) {
  const double p = 1.0 / fleet.size();
  for (const ClientSpec& c : fleet) {
    if (std::abs(c.importance - p) > 1e-12) return false;
  }
  return true;
}

bool equal_times(const Fleet& fleet) {
  for (const ClientSpec& c : fleet) {
    if (c.compute_time != fleet[0].compute_time) return false;
  }
  return true;
}

}  // namespace

std::string config_hash(const json& doc) {
  const std::string s = doc.dump();
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

WindowStats final_window_loss(const Trajectory& t) {
  WindowStats w;
  if (t.records.empty()) return w;
  const int64_t last = t.records.back().round;
  const auto start = static_cast<int64_t>(std::ceil(0.95 * static_cast<double>(last)));
  std::vector<double> v;
  for (const RoundRecord& r : t.records) {
    if (r.round >= start) v.push_back(r.loss_fed);
  }
  if (v.empty()) v.push_back(t.records.back().loss_fed);
  w.samples = static_cast<int>(v.size());
  w.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - w.mean) * (x - w.mean);
  w.stddev = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
  return w;
}

SimulateResult simulate(const ExperimentConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  RunConfig rc = make_run_config(cfg, cfg.base_seed);
  auto t0 = std::chrono::steady_clock::now();
  SimulateResult res;
  res.trajectory = run(rc);
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.final_loss = final_window_loss(res.trajectory);
  res.csv_path = join(out_dir, "trajectory.csv");
  res.log_path = join(out_dir, "run_log.json");
  write_file_atomic(res.csv_path, trajectory_csv(res.trajectory));

  const Trajectory& t = res.trajectory;
  json log;
  log["schema_version"] = kConfigSchemaVersion;
  log["config"] = cfg.raw;
  log["config_hash"] = config_hash(cfg.raw);
  log["seeds"] = {{"base", cfg.base_seed},
                  {"hardware", rc.seeds.hardware},
                  {"batching", rc.seeds.batching},
                  {"sampling", rc.seeds.sampling}};
  log["wall_time_seconds"] = res.wall_seconds;
  log["rounds"] = t.rounds;
  log["final_time"] = t.final_time;
  log["diverged"] = t.diverged;
  if (t.diverged) {
    log["divergence_round"] = t.divergence_round;
    log["divergence_reason"] = t.divergence_reason;
  }
  log["never_served"] = t.never_served;
  log["optimum"] = t.optimum;
  log["weights"] = rc.weights.d;
  log["window"] = rc.weights.window;
  log["final_loss_mean"] = res.final_loss.mean;
  log["final_loss_std"] = res.final_loss.stddev;
  write_file_atomic(res.log_path, log.dump(2) + "\n");
  return res;
}

oracle::SchemeSpec oracle_scheme_for(const ExperimentConfig& cfg) {
  const FleetRecipe& r = cfg.recipe;
  if (r.family != "quadratic" || r.optima.empty() || r.optima[0].size() != 1) {
    throw UnsupportedError("oracle needs a scalar quadratic fleet");
  }
  if (r.curvature != 0.5) {
    throw UnsupportedError("oracle needs unit-gradient quadratics (curvature 0.5)");
  }
  if (!equal_importance(cfg.fleet)) {
    throw UnsupportedError("oracle needs equal client importance");
  }
  oracle::SchemeSpec spec;
  spec.num_clients = static_cast<int>(cfg.fleet.size());
  switch (cfg.policy.kind) {
    case PolicyKind::kSynchronous:
      spec.scheme = oracle::Scheme::kSync;
      return spec;
    case PolicyKind::kSampleUniform:
      spec.scheme = oracle::Scheme::kSyncUniform;
      spec.sample_size = cfg.policy.m;
      return spec;
    case PolicyKind::kAsynchronous:
      if (cfg.hardware != HardwareMode::kExponential) {
        throw UnsupportedError("oracle async law needs exponential hardware");
      }
      if (!equal_times(cfg.fleet)) {
        throw UnsupportedError("oracle does not support heterogeneous-rate "
                               "asynchronous fleets");
      }
      spec.scheme = oracle::Scheme::kAsync;
      return spec;
    case PolicyKind::kFedFix:
      if (cfg.hardware != HardwareMode::kExponential || !equal_times(cfg.fleet)) {
        throw UnsupportedError("oracle hybrid scheme needs equal-rate "
                               "exponential hardware");
      }
      spec.scheme = oracle::Scheme::kHybrid;
      spec.window = cfg.policy.interval / cfg.fleet[0].compute_time;
      return spec;
    default:
      break;
  }
  throw UnsupportedError("no oracle for policy " + cfg.policy.name());
}

OracleCheckReport oracle_check(const ExperimentConfig& cfg, int threads) {
  OracleCheckReport rep;
  rep.spec = oracle_scheme_for(cfg);
  const int m = rep.spec.num_clients;
  std::vector<int> checks;
  for (int c : cfg.oracle.checkpoints) {
    if (c >= 0) checks.push_back(c);
  }
  if (checks.empty()) throw ConfigError("oracle needs checkpoints");
  std::sort(checks.begin(), checks.end());
  const int rounds = checks.back();

  RunConfig rc = make_run_config(cfg, cfg.base_seed);
  rc.horizon = Horizon{rounds, 0.0};
  rc.metric_every = 1;
  rc.record_snapshots = false;
  Vector d;
  switch (rep.spec.scheme) {
    case oracle::Scheme::kSync: d.assign(m, 1.0 / m); break;
    case oracle::Scheme::kSyncUniform: d.assign(m, 1.0 / rep.spec.sample_size); break;
    case oracle::Scheme::kAsync: d.assign(m, 1.0); break;
    default: d.assign(m, 1.0 / ((1.0 - std::exp(-rep.spec.window)) * m)); break;
  }
  if (rc.weights.d != d) {
    rep.notes.push_back("aggregation weights replaced by the oracle scheme's d");
  }
  rc.weights.d = d;
  rc.weights.scheme = WeightScheme::kCustom;
  rc.weights.q_over_window.clear();

  rep.phi = oracle::phi(cfg.local_lr, cfg.local_steps);
  Vector optima;
  for (const Vector& o : cfg.recipe.optima) optima.push_back(o[0]);
  const double star = std::accumulate(optima.begin(), optima.end(), 0.0) / m;
  const double theta0 = cfg.initial_params.empty() ? 0.0 : cfg.initial_params[0];
  oracle::Expectation ex = oracle::expectation_recursion(
      rep.spec, rep.phi, cfg.server_lr, star, rounds);
  oracle::SecondMoment sm =
      oracle::variance_recursion(rep.spec, rep.phi, optima, theta0, rounds);
  rep.second_moment_exact =
      (rep.spec.scheme == oracle::Scheme::kSync ||
       rep.spec.scheme == oracle::Scheme::kSyncUniform) &&
      cfg.server_lr == 1.0 && cfg.recipe.noise_std == 0.0;
  if (!rep.second_moment_exact) {
    rep.notes.push_back("second-moment recursion is approximate here; "
                        "reported, not gated");
  }

  const int n_seeds = std::max(2, cfg.oracle.n_seeds);
  EnsembleStats st = run_ensemble(rc, n_seeds, cfg.base_seed, threads);
  rep.members = st.members;
  rep.diverged = st.diverged;
  rep.pass = st.members >= 2;
  for (int c : checks) {
    OracleCheckpoint cp;
    cp.round = c;
    size_t idx = static_cast<size_t>(
        std::find(st.rounds.begin(), st.rounds.end(), c) - st.rounds.begin());
    if (idx >= st.rounds.size()) throw Error("checkpoint missing from ensemble");
    cp.oracle_mean = ex.mean(c, theta0);
    cp.empirical_mean = st.mean_params[idx][0];
    cp.mean_se = st.se_params[idx][0];
    auto within = [](double a, double b, double se) {
      double diff = std::abs(a - b);
      return se > 0 ? diff <= 3 * se : diff <= 1e-9 * std::max(1.0, std::abs(a));
    };
    cp.mean_pass = within(cp.oracle_mean, cp.empirical_mean, cp.mean_se);
    cp.oracle_second_moment = sm.second_moment[c];
    cp.empirical_second_moment = st.mean_dist_sq[idx];
    cp.second_moment_se = st.se_dist_sq[idx];
    cp.second_moment_pass = within(cp.oracle_second_moment,
                                   cp.empirical_second_moment,
                                   cp.second_moment_se);
    rep.pass = rep.pass && cp.mean_pass &&
               (!rep.second_moment_exact || cp.second_moment_pass);
    rep.checkpoints.push_back(cp);
  }
  return rep;
}

std::string format_oracle_report(const OracleCheckReport& rep) {
  std::ostringstream os;
  os << "scheme=" << oracle::scheme_name(rep.spec.scheme) << '\n';
  os << "phi=" << format_double(rep.phi) << '\n';
  os << "members=" << rep.members << '\n';
  os << "diverged=" << rep.diverged << '\n';
  os << "round,oracle_mean,empirical_mean,mean_se,mean_pass,"
        "oracle_second_moment,empirical_second_moment,second_moment_se,"
        "second_moment_pass\n";
  for (const OracleCheckpoint& c : rep.checkpoints) {
    os << c.round << ',' << format_double(c.oracle_mean) << ','
       << format_double(c.empirical_mean) << ',' << format_double(c.mean_se)
       << ',' << (c.mean_pass ? "pass" : "FAIL") << ','
       << format_double(c.oracle_second_moment) << ','
       << format_double(c.empirical_second_moment) << ','
       << format_double(c.second_moment_se) << ','
       << (c.second_moment_pass ? "pass" : (rep.second_moment_exact ? "FAIL" : "info"))
       << '\n';
  }
  for (const std::string& n : rep.notes) os << "note=" << n << '\n';
  os << "overall=" << (rep.pass ? "pass" : "FAIL") << '\n';
  return os.str();
}

std::string bounds_report(const ExperimentConfig& cfg) {
  if (cfg.hardware != HardwareMode::kFixed) {
    throw UnsupportedError("bound presets need fixed hardware");
  }
  WeightPlan plan = plan_weights(cfg.weight_scheme, cfg.fleet, cfg.policy,
                                 cfg.hardware, cfg.custom_weights);
  std::vector<std::string> notes;
  bounds::BoundInputs base;
  base.local_steps = cfg.local_steps;
  base.server_lr = cfg.server_lr;
  base.local_lr = cfg.local_lr;
  base.rho = cfg.bounds.rho;
  if (cfg.bounds.smoothness) {
    base.smoothness = *cfg.bounds.smoothness;
  } else if (cfg.recipe.family == "quadratic") {
    base.smoothness = 2.0 * cfg.recipe.curvature;
    notes.push_back("L defaulted to the quadratic curvature max 2a_i");
  } else {
    base.smoothness = 1.0;
    notes.push_back("L not given; using 1");
  }
  Vector p;
  for (const ClientSpec& c : cfg.fleet) p.push_back(c.importance);
  const Vector& qbar = plan.q_over_window.empty() ? p : plan.q_over_window;
  Vector theta_bar = weighted_optimum(cfg.fleet, qbar);
  Vector theta0 = cfg.initial_params.empty() ? Vector(theta_bar.size(), 0.0)
                                             : cfg.initial_params;
  for (size_t k = 0; k < theta0.size(); ++k) {
    base.init_dist_sq += (theta0[k] - theta_bar[k]) * (theta0[k] - theta_bar[k]);
  }
  double budget = cfg.bounds.time_budget > 0 ? cfg.bounds.time_budget : cfg.horizon.time;
  if (budget <= 0) base.rounds = static_cast<double>(cfg.horizon.rounds);

  bounds::Preset pre = bounds::scheme_presets(cfg.fleet, cfg.policy, plan, budget, base);
  if (cfg.bounds.sigma) pre.inputs.sigma = *cfg.bounds.sigma;
  if (cfg.bounds.sigma1) pre.inputs.sigma1 = *cfg.bounds.sigma1;
  if (cfg.bounds.chi_square > 0) {
    pre.inputs.chi_square = cfg.bounds.chi_square;
  } else {
    DistributionWeights dw = distribution_weights(
        cfg.fleet, WeightVector{qbar, WeightKind::kExpected});
    ChiSquare chi = chi_square_bias(dw.r, dw.s_normalized);
    pre.inputs.chi_square = chi.value;
    if (chi.unrepresented) notes.push_back("some distribution is never represented");
  }
  for (const std::string& n : pre.notes) notes.push_back(n);
  bounds::EpsilonTerms terms = bounds::epsilon_terms(pre.inputs);
  std::string out = bounds::format_report(pre.scheme, pre.inputs, terms, notes);
  for (size_t i = 0; i < plan.d.size(); ++i) {
    out += "d_" + std::to_string(i) + "=" + format_double(plan.d[i]) + "\n";
  }
  return out;
}

std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const std::string& axis,
                            const std::vector<double>& values,
                            const std::string& out_dir, int threads) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (double v : values) {
    ExperimentConfig c = cfg;
    if (axis == "local_lr" || axis == "eta_l") {
      c.local_lr = v;
    } else if (axis == "K" || axis == "local_steps") {
      c.local_steps = static_cast<int>(v);
      if (c.local_steps != v) throw ConfigError("K values must be integers");
    } else if (axis == "interval" || axis == "dt") {
      if (c.policy.kind != PolicyKind::kFedFix) {
        throw ConfigError("interval sweeps need the fedfix policy");
      }
      c.policy.interval = v;
    } else if (axis == "m") {
      c.policy.m = static_cast<int>(v);
      if (c.policy.m != v) throw ConfigError("m values must be integers");
    } else {
      throw ConfigError("unknown sweep axis '" + axis + "'");
    }
    c.policy.validate(static_cast<int>(c.fleet.size()));
    SweepRow row;
    row.value = v;
    struct SeedResult {
      int64_t rounds = 0;
      bool diverged = false;
      WindowStats window;
    };
    std::vector<SeedResult> results(c.n_seeds);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
      for (int s = next++; s < c.n_seeds; s = next++) {
        try {
          RunConfig rc = make_run_config(c, c.base_seed + s);
          rc.client_metrics = false;
          Trajectory t = run(rc);
          results[s].rounds = t.rounds;
          results[s].diverged = t.diverged;
          if (!t.diverged) results[s].window = final_window_loss(t);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    const int workers = std::max(1, std::min(threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency()), c.n_seeds));
    std::vector<std::thread> pool;
    for (int k = 1; k < workers; ++k) pool.emplace_back(worker);
    worker();
    for (std::thread& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    std::vector<double> means, stds;
    for (const SeedResult& r : results) {
      row.rounds = std::max(row.rounds, r.rounds);
      if (r.diverged) {
        ++row.diverged;
        continue;
      }
      means.push_back(r.window.mean);
      stds.push_back(r.window.stddev);
    }
    row.seeds = static_cast<int>(means.size());
    if (!means.empty()) {
      row.loss_mean = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
      row.loss_std = std::accumulate(stds.begin(), stds.end(), 0.0) / stds.size();
      double ss = 0.0;
      for (double x : means) ss += (x - row.loss_mean) * (x - row.loss_mean);
      row.seed_std = means.size() > 1 ? std::sqrt(ss / (means.size() - 1)) : 0.0;
    } else {
      row.loss_mean = row.loss_std = row.seed_std = std::nan("");
    }
    rows.push_back(row);
  }
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_file_atomic(join(out_dir, "sweep.csv"), sweep_csv(axis, rows));
  }
  return rows;
}

std::string sweep_csv(const std::string& axis, const std::vector<SweepRow>& rows) {
  std::string out = "axis,value,loss_mean,loss_std,seed_std,seeds,diverged,rounds\n";
  for (const SweepRow& r : rows) {
    out += axis + ',' + format_double(r.value) + ',' + format_double(r.loss_mean) +
           ',' + format_double(r.loss_std) + ',' + format_double(r.seed_std) +
           ',' + std::to_string(r.seeds) + ',' + std::to_string(r.diverged) +
           ',' + std::to_string(r.rounds) + '\n';
  }
  return out;
}

std::vector<std::string> gen_shards(const ExperimentConfig& cfg,
                                    const std::string& out_dir) {
  if (cfg.recipe.family == "quadratic") {
    throw ConfigError("gen-shards needs a logistic or linear fleet");
  }
  ensure_dir(out_dir);
  std::vector<std::string> paths;
  for (const ClientSpec& c : cfg.fleet) {
    auto glm = std::dynamic_pointer_cast<const GlmObjective>(c.objective);
    std::string path = join(out_dir, "client_" + std::to_string(c.id) + ".csv");
    write_shard_csv(path, *glm);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace asyncfl
