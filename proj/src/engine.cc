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

#include "asyncfl/engine.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <set>
#include <thread>

#include "asyncfl/errors.h"
#include "asyncfl/rng.h"

namespace asyncfl {

namespace {

constexpr double kDivergenceLimit = 1e12;

bool diverged_params(const Vector& v) {
  for (double x : v) {
    if (!std::isfinite(x) || std::abs(x) > kDivergenceLimit) return true;
  }
  return false;
}

double dist_sq(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

}  // namespace

RunSeeds RunSeeds::from_base(uint64_t base) {
  return RunSeeds{derive_seed(base, 1), derive_seed(base, 2),
                  derive_seed(base, 3)};
}

void RunConfig::validate() const {
  const int dim = validate_fleet(fleet);
  policy.validate(static_cast<int>(fleet.size()));
  if (weights.d.size() != fleet.size()) {
    throw ConfigError("weight plan does not match fleet size");
  }
  WeightVector{weights.d, WeightKind::kDeterministic}.validate();
  if (!(server_lr >= 0) || !std::isfinite(server_lr)) {
    throw ConfigError("server learning rate must be finite and >= 0");
  }
  if (!(local_lr >= 0) || !std::isfinite(local_lr)) {
    throw ConfigError("local learning rate must be finite and >= 0");
  }
  if (local_steps < 1) throw ConfigError("local steps K must be >= 1");
  if (batch_size < 0) throw ConfigError("batch size must be >= 0");
  const bool by_rounds = horizon.rounds > 0;
  const bool by_time = horizon.time > 0 && std::isfinite(horizon.time);
  if (by_rounds == by_time) {
    throw ConfigError("horizon needs exactly one of rounds or time > 0");
  }
  if (metric_every < 1) throw ConfigError("metric cadence must be >= 1");
  if (staleness_cap && *staleness_cap < 0) {
    throw ConfigError("staleness cap must be >= 0");
  }
  if (!initial_params.empty() &&
      static_cast<int>(initial_params.size()) != dim) {
    throw ConfigError("initial model dimension mismatch");
  }
  if (!optimum.empty() && static_cast<int>(optimum.size()) != dim) {
    throw ConfigError("optimum dimension mismatch");
  }
}

Vector aggregate(std::span<const double> theta, double server_lr,
                 std::span<const double> weights,
                 const std::vector<const Vector*>& deltas) {
  Vector out(theta.begin(), theta.end());
  if (deltas.empty()) return out;
  Vector sum(theta.size(), 0.0);
  for (size_t c = 0; c < deltas.size(); ++c) {
    const Vector& d = *deltas[c];
    for (size_t j = 0; j < sum.size(); ++j) sum[j] += weights[c] * d[j];
  }
  for (size_t j = 0; j < out.size(); ++j) out[j] = theta[j] + server_lr * sum[j];
  return out;
}

Trajectory run(const RunConfig& cfg) {
  cfg.validate();
  const Fleet& fleet = cfg.fleet;
  const int m = static_cast<int>(fleet.size());
  const int dim = fleet[0].objective->dim();

  Scheduler sched(fleet, cfg.policy, HardwareModel{cfg.hardware, cfg.seeds.hardware},
                  cfg.seeds.sampling);
  FleetState state = sched.initial_state();
  std::vector<GradientStream> streams;
  for (int i = 0; i < m; ++i) {
    streams.emplace_back(derive_seed(cfg.seeds.batching, i), cfg.batch_size);
  }
  Vector p;
  for (const ClientSpec& c : fleet) p.push_back(c.importance);

  Trajectory traj;
  traj.num_clients = m;
  traj.local_steps = cfg.local_steps;
  traj.server_lr = cfg.server_lr;
  traj.optimum = cfg.optimum.empty() ? weighted_optimum(fleet, p) : cfg.optimum;

  Vector theta = cfg.initial_params.empty() ? Vector(dim, 0.0) : cfg.initial_params;
  std::deque<Vector> history{theta};
  int64_t history_base = 0;
  Vector realized(m, 0.0);
  std::vector<char> served(m, 0);
  double time = 0.0;
  const bool by_time = cfg.horizon.rounds <= 0;
  const double tick_limit = by_time
      ? cfg.horizon.time * sched.scale().resolution() * (1 + 1e-12)
      : 0.0;
  const bool needs_scores = cfg.policy.kind == PolicyKind::kSampleBiased &&
                            cfg.policy.criterion == BiasCriterion::kHighestLoss;

  auto record = [&](int64_t n, const std::vector<int>& parts,
                    const std::vector<int>& stale) {
    RoundRecord r;
    r.round = n;
    r.time = time;
    r.participants = parts;
    r.staleness = stale;
    r.params = theta;
    r.dist_sq = dist_sq(theta, traj.optimum);
    if (cfg.client_metrics) {
      r.client_losses.resize(m);
      for (int i = 0; i < m; ++i) r.client_losses[i] = fleet[i].objective->loss(theta);
      const Vector* q = &cfg.weights.q_over_window;
      Vector running;
      if (q->empty()) {
        running = n > 0 ? realized : p;
        if (n > 0) {
          for (double& v : running) v /= static_cast<double>(n);
        }
        q = &running;
      }
      for (int i = 0; i < m; ++i) {
        r.loss_fed += p[i] * r.client_losses[i];
        r.loss_surrogate += (*q)[i] * r.client_losses[i];
      }
    } else {
      r.loss_fed = federated_loss(theta, fleet);
      r.loss_surrogate = std::nan("");
    }
    traj.records.push_back(std::move(r));
  };

  record(0, {}, {});
  std::vector<int> last_parts, last_stale;
  int64_t n = 0;
  for (;; ++n) {
    if (!by_time && n >= cfg.horizon.rounds) break;
    FleetState saved;
    if (by_time) saved = state;
    Vector scores;
    if (needs_scores) {
      for (int i = 0; i < m; ++i) scores.push_back(fleet[i].objective->loss(theta));
    }
    RoundOutcome out = sched.advance(state, scores);
    if (by_time && state.clock > tick_limit) {
      state = saved;
      break;
    }

    std::vector<LocalWork> work;
    Vector w;
    std::vector<int> stale;
    bool overflow = false;
    for (size_t c = 0; c < out.participants.size(); ++c) {
      const int i = out.participants[c];
      const int anchor = out.anchors[c];
      const int s = static_cast<int>(n - anchor);
      if (cfg.staleness_cap && s > *cfg.staleness_cap) {
        throw StalenessCapError("client " + std::to_string(i) +
                                " contribution has staleness " +
                                std::to_string(s) + " above the cap " +
                                std::to_string(*cfg.staleness_cap));
      }
      const Vector& start = history[anchor - history_base];
      try {
        work.push_back(local_sgd(start, *fleet[i].objective, cfg.local_steps,
                                 cfg.local_lr, streams[i], cfg.record_snapshots));
      } catch (const NumericOverflowError& e) {
        traj.diverged = true;
        traj.divergence_round = n + 1;
        traj.divergence_reason = std::string("client ") + std::to_string(i) +
                                 ": " + e.what();
        overflow = true;
        break;
      }
      w.push_back(out.multiplicity[c] * cfg.weights.d[i]);
      stale.push_back(s);
    }
    if (overflow) break;
    std::vector<const Vector*> deltas;
    for (const LocalWork& lw : work) deltas.push_back(&lw.delta);
    Vector next = aggregate(theta, cfg.server_lr, w, deltas);
    if (diverged_params(next)) {
      traj.diverged = true;
      traj.divergence_round = n + 1;
      traj.divergence_reason = "global model exceeded 1e12 or became non-finite";
      break;
    }
    if (cfg.record_snapshots) {
      RoundSnapshot snap;
      snap.base = theta;
      snap.clients = out.participants;
      snap.weights = w;
      for (LocalWork& lw : work) snap.paths.push_back(std::move(lw.path));
      traj.snapshots.push_back(std::move(snap));
    }
    theta = std::move(next);
    time += out.dt;
    for (size_t c = 0; c < out.participants.size(); ++c) {
      realized[out.participants[c]] += w[c];
      served[out.participants[c]] = 1;
    }
    history.push_back(theta);
    int64_t keep = n + 1;
    if (!cfg.policy.is_sampling()) {
      for (int i = 0; i < m; ++i) {
        if (state.busy[i]) keep = std::min<int64_t>(keep, state.anchor[i]);
      }
    }
    while (history_base < keep) {
      history.pop_front();
      ++history_base;
    }
    last_parts = out.participants;
    last_stale = stale;
    if ((n + 1) % cfg.metric_every == 0) record(n + 1, last_parts, last_stale);
  }
  traj.rounds = n;
  traj.final_time = time;
  traj.final_params = theta;
  if (traj.records.back().round != n) record(n, last_parts, last_stale);
  for (char s : served) traj.never_served += s ? 0 : 1;
  return traj;
}

std::vector<Vector> virtual_sequence(const Trajectory& traj, int64_t n) {
  if (traj.snapshots.empty()) {
    throw UnavailableError("run was executed without local snapshots");
  }
  if (n < 0 || n >= static_cast<int64_t>(traj.snapshots.size())) {
    throw ConfigError("round outside the recorded snapshots");
  }
  const RoundSnapshot& s = traj.snapshots[n];
  std::vector<Vector> seq{s.base};
  for (int k = 1; k <= traj.local_steps; ++k) {
    std::vector<const Vector*> deltas;
    for (const auto& path : s.paths) deltas.push_back(&path[k]);
    seq.push_back(aggregate(s.base, traj.server_lr, s.weights, deltas));
  }
  return seq;
}

EnsembleStats run_ensemble(const RunConfig& config,
                           std::span<const uint64_t> seeds, int threads) {
  if (seeds.size() < 2) throw ConfigError("ensemble needs at least 2 seeds");
  std::set<uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) {
    throw SeedCollisionError("ensemble seeds must be distinct");
  }
  if (config.horizon.rounds <= 0) {
    throw ConfigError("ensembles need a round horizon");
  }
  config.validate();
  RunConfig base = config;
  base.client_metrics = false;
  base.record_snapshots = false;
  if (base.optimum.empty()) {
    Vector p;
    for (const ClientSpec& c : base.fleet) p.push_back(c.importance);
    base.optimum = weighted_optimum(base.fleet, p);
  }

  struct Member {
    bool diverged = false;
    std::vector<int64_t> rounds;
    std::vector<Vector> params;
    Vector dist;
  };
  std::vector<Member> members(seeds.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t k = next++; k < seeds.size(); k = next++) {
      RunConfig c = base;
      c.seeds = RunSeeds::from_base(seeds[k]);
      Trajectory t = run(c);
      Member& mem = members[k];
      mem.diverged = t.diverged;
      for (RoundRecord& r : t.records) {
        mem.rounds.push_back(r.round);
        mem.params.push_back(std::move(r.params));
        mem.dist.push_back(r.dist_sq);
      }
    }
  };
  int nthreads = threads > 0 ? threads
                             : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  nthreads = std::min<int>(nthreads, static_cast<int>(seeds.size()));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  EnsembleStats st;
  std::vector<const Member*> ok;
  for (const Member& mem : members) {
    if (mem.diverged) {
      ++st.diverged;
    } else {
      ok.push_back(&mem);
    }
  }
  st.members = static_cast<int>(ok.size());
  if (ok.empty()) return st;
  st.rounds = ok[0]->rounds;
  const size_t nr = st.rounds.size();
  const size_t dim = ok[0]->params[0].size();
  const double cnt = static_cast<double>(ok.size());
  st.mean_params.assign(nr, Vector(dim, 0.0));
  st.var_params.assign(nr, Vector(dim, 0.0));
  st.se_params.assign(nr, Vector(dim, 0.0));
  st.mean_dist_sq.assign(nr, 0.0);
  st.var_dist_sq.assign(nr, 0.0);
  st.se_dist_sq.assign(nr, 0.0);
  // Means are accumulated as offsets from the first member so that identical
  // members give an exact mean and zero variance.
  const Member* ref = ok[0];
  for (const Member* mem : ok) {
    for (size_t r = 0; r < nr; ++r) {
      for (size_t j = 0; j < dim; ++j) {
        st.mean_params[r][j] += mem->params[r][j] - ref->params[r][j];
      }
      st.mean_dist_sq[r] += mem->dist[r] - ref->dist[r];
    }
  }
  for (size_t r = 0; r < nr; ++r) {
    for (size_t j = 0; j < dim; ++j) {
      st.mean_params[r][j] = ref->params[r][j] + st.mean_params[r][j] / cnt;
    }
    st.mean_dist_sq[r] = ref->dist[r] + st.mean_dist_sq[r] / cnt;
  }
  for (const Member* mem : ok) {
    for (size_t r = 0; r < nr; ++r) {
      for (size_t j = 0; j < dim; ++j) {
        double e = mem->params[r][j] - st.mean_params[r][j];
        st.var_params[r][j] += e * e;
      }
      double e = mem->dist[r] - st.mean_dist_sq[r];
      st.var_dist_sq[r] += e * e;
    }
  }
  const double denom = cnt > 1 ? cnt - 1 : 1;
  for (size_t r = 0; r < nr; ++r) {
    for (size_t j = 0; j < dim; ++j) {
      st.var_params[r][j] /= denom;
      st.se_params[r][j] = std::sqrt(st.var_params[r][j] / cnt);
    }
    st.var_dist_sq[r] /= denom;
    st.se_dist_sq[r] = std::sqrt(st.var_dist_sq[r] / cnt);
  }
  return st;
}

EnsembleStats run_ensemble(const RunConfig& config, int n_seeds,
                           uint64_t base_seed, int threads) {
  if (n_seeds < 2) throw ConfigError("ensemble needs at least 2 seeds");
  std::vector<uint64_t> seeds;
  for (int k = 0; k < n_seeds; ++k) seeds.push_back(base_seed + k);
  return run_ensemble(config, seeds, threads);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trajectory_csv_header(int num_clients) {
  std::string h = "n,t,participants,loss_fed,loss_surrogate,dist_sq";
  for (int i = 0; i < num_clients; ++i) h += ",loss_client_" + std::to_string(i);
  return h + "\n";
}

namespace {

std::string bitmask(const std::vector<int>& parts, int num_clients) {
  std::vector<int> nibbles((num_clients + 3) / 4, 0);
  for (int i : parts) nibbles[i / 4] |= 1 << (i % 4);
  std::string s = "0x";
  for (auto it = nibbles.rbegin(); it != nibbles.rend(); ++it) {
    s += "0123456789abcdef"[*it];
  }
  return s;
}

}  // namespace

std::string trajectory_csv(const Trajectory& traj) {
  std::string out = trajectory_csv_header(traj.num_clients);
  for (const RoundRecord& r : traj.records) {
    out += std::to_string(r.round);
    out += ',' + format_double(r.time);
    out += ',' + bitmask(r.participants, traj.num_clients);
    out += ',' + format_double(r.loss_fed);
    out += ',' + format_double(r.loss_surrogate);
    out += ',' + format_double(r.dist_sq);
    for (int i = 0; i < traj.num_clients; ++i) {
      out += ',';
      if (i < static_cast<int>(r.client_losses.size())) {
        out += format_double(r.client_losses[i]);
      }
    }
    out += '\n';
  }
  return out;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  std::string tmp = path + ".tmp." + std::to_string(std::hash<std::thread::id>{}(
                                         std::this_thread::get_id()));
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot open " + tmp + " for writing");
    os << contents;
    if (!os) throw ConfigError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw ConfigError("cannot rename " + tmp + " to " + path);
  }
}

}  // namespace asyncfl
