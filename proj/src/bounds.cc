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

#include "asyncfl/bounds.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "asyncfl/engine.h"
#include "asyncfl/errors.h"

namespace asyncfl::bounds {

namespace {

constexpr int64_t kMaxScheduleRows = 2000000;

bool all_quadratic(const Fleet& fleet) {
  for (const ClientSpec& c : fleet) {
    if (!as_quadratic(c)) return false;
  }
  return true;
}

double quadratic_grad_moment(const QuadraticObjective& q, const Vector& x) {
  Vector g = q.gradient(x);
  double s = 0.0;
  for (double v : g) s += v * v;
  return s + q.dim() * q.noise_std() * q.noise_std();
}

}  // namespace

void BoundInputs::validate() const {
  if (num_clients < 1 || local_steps < 1 || rounds < 1 || window < 1) {
    throw ConfigError("M, K, N and W must be >= 1");
  }
  for (double v : {server_lr, local_lr, smoothness, staleness, alpha, beta,
                   sigma, sigma1, max_q, residual, init_dist_sq, chi_square,
                   rho}) {
    if (!(v >= 0)) throw ConfigError("bound inputs must be nonnegative");
  }
}

EpsilonTerms epsilon_terms(const BoundInputs& in) {
  in.validate();
  EpsilonTerms t;
  const double k = in.local_steps;
  const double eta = in.server_lr * in.local_lr;
  t.init = eta > 0 ? in.init_dist_sq / (eta * k * in.rounds)
                   : (in.init_dist_sq > 0
                          ? std::numeric_limits<double>::infinity()
                          : 0.0);
  t.local = in.local_lr * in.local_lr * (k - 1) * (k - 1) *
            (in.residual + in.sigma1);
  const double delay = eta + eta * eta * k * k * in.staleness * in.staleness;
  t.alpha = in.alpha * delay * (in.residual + in.max_q * in.sigma);
  t.beta = in.beta * delay * (in.residual + in.sigma);
  t.window = in.server_lr * in.local_lr * (in.window - 1) * k;
  t.total = t.init + t.local + t.alpha + t.beta + t.window;
  return t;
}

double lr_constraint(int local_steps, double smoothness, double rho,
                     double server_lr, double staleness) {
  if (!(smoothness > 0)) throw ConfigError("smoothness L must be > 0");
  if (local_steps < 1) throw ConfigError("K must be >= 1");
  const double denom = 3.0 * rho * rho * server_lr * (staleness + 1.0);
  const double factor = denom > 0 ? std::min(1.0, 1.0 / denom) : 1.0;
  return factor / (48.0 * local_steps * smoothness);
}

double surrogate_residual(const Fleet& fleet,
                          const std::vector<Vector>& q_by_round) {
  if (q_by_round.empty()) throw ConfigError("empty weight schedule");
  const size_t m = fleet.size();
  Vector avg(m, 0.0);
  for (const Vector& row : q_by_round) {
    for (size_t i = 0; i < m; ++i) avg[i] += row[i];
  }
  for (double& v : avg) v /= static_cast<double>(q_by_round.size());
  const Vector theta_bar = weighted_optimum(fleet, avg);
  Vector at_bar(m);
  for (size_t i = 0; i < m; ++i) at_bar[i] = fleet[i].objective->loss(theta_bar);
  std::map<Vector, double> cache;
  double total = 0.0;
  for (const Vector& row : q_by_round) {
    if (std::accumulate(row.begin(), row.end(), 0.0) <= 0) continue;
    auto it = cache.find(row);
    if (it == cache.end()) {
      Vector opt = weighted_optimum(fleet, row);
      double gap = 0.0;
      for (size_t i = 0; i < m; ++i) {
        if (row[i] != 0) gap += row[i] * (at_bar[i] - fleet[i].objective->loss(opt));
      }
      it = cache.emplace(row, gap).first;
    }
    total += it->second;
  }
  return total / static_cast<double>(q_by_round.size());
}

double quadratic_sigma(const Fleet& fleet, const Vector& q) {
  if (!all_quadratic(fleet)) throw UnsupportedError("fleet is not quadratic");
  Vector opt = weighted_optimum(fleet, q);
  double s = 0.0;
  for (size_t i = 0; i < fleet.size(); ++i) {
    if (q[i] != 0) s += q[i] * quadratic_grad_moment(*as_quadratic(fleet[i]), opt);
  }
  return s;
}

double quadratic_sigma1(const Fleet& fleet,
                        const std::vector<Vector>& q_by_round) {
  if (!all_quadratic(fleet)) throw UnsupportedError("fleet is not quadratic");
  if (q_by_round.empty()) throw ConfigError("empty weight schedule");
  std::map<Vector, double> cache;
  double total = 0.0;
  for (const Vector& row : q_by_round) {
    double sum = std::accumulate(row.begin(), row.end(), 0.0);
    if (sum <= 0) continue;
    auto it = cache.find(row);
    if (it == cache.end()) {
      Vector opt = weighted_optimum(fleet, row);
      double s = 0.0;
      for (size_t i = 0; i < fleet.size(); ++i) {
        if (row[i] != 0) {
          s += row[i] / sum * quadratic_grad_moment(*as_quadratic(fleet[i]), opt);
        }
      }
      it = cache.emplace(row, s).first;
    }
    total += it->second;
  }
  return total / static_cast<double>(q_by_round.size());
}

Preset scheme_presets(const Fleet& fleet, const WaitPolicy& policy,
                      const WeightPlan& plan, double time_budget,
                      const BoundInputs& base) {
  validate_fleet(fleet);
  policy.validate(static_cast<int>(fleet.size()));
  if (plan.d.size() != fleet.size()) {
    throw ConfigError("weight plan does not match fleet");
  }
  if (policy.kind == PolicyKind::kSampleBiased &&
      policy.criterion == BiasCriterion::kHighestLoss) {
    throw UnsupportedError("loss-driven sampling has no static preset");
  }
  Preset out;
  out.scheme = policy.name();
  out.inputs = base;
  BoundInputs& in = out.inputs;
  in.num_clients = static_cast<int>(fleet.size());
  Vector p;
  for (const ClientSpec& c : fleet) p.push_back(c.importance);

  SamplerCovariance cov = sampler_covariance(policy, plan.d, p);
  in.alpha = cov.alpha;
  in.beta = cov.beta;
  if (cov.biased) out.notes.push_back("biased sampler: alpha=1 beta=0");
  in.staleness = staleness_bound(fleet, policy, HardwareMode::kFixed);
  int64_t w = plan.window > 0 ? plan.window : window_size(fleet, policy);
  in.window = static_cast<double>(w);

  if (time_budget > 0) {
    double tau_max = 0.0, inv = 0.0;
    for (const ClientSpec& c : fleet) {
      tau_max = std::max(tau_max, c.compute_time);
      inv += 1.0 / c.compute_time;
    }
    switch (policy.kind) {
      case PolicyKind::kSynchronous:
        in.rounds = time_budget / tau_max;
        break;
      case PolicyKind::kAsynchronous:
        in.rounds = time_budget * inv;
        break;
      case PolicyKind::kFedFix:
        in.rounds = time_budget / policy.interval;
        break;
      default: {
        Scheduler sched(fleet, policy, HardwareModel{});
        FleetState s = sched.initial_state();
        const double limit = sched.scale().to_ticks(time_budget);
        int64_t count = 0;
        while (count < kMaxScheduleRows) {
          sched.advance(s);
          if (s.clock > limit) break;
          ++count;
        }
        in.rounds = static_cast<double>(count);
      }
    }
    in.rounds = std::max(in.rounds, 1.0);
  }

  if (w > kMaxScheduleRows) {
    out.notes.push_back("window too long to enumerate; R, max_q from base");
    return out;
  }
  std::vector<Vector> rows = expected_weight_schedule(fleet, policy, plan.d, w);
  in.max_q = 0.0;
  for (const Vector& row : rows) {
    for (double v : row) in.max_q = std::max(in.max_q, v);
  }
  in.residual = surrogate_residual(fleet, rows);
  if (all_quadratic(fleet)) {
    out.residual_exact = true;
    Vector avg(fleet.size(), 0.0);
    for (const Vector& row : rows) {
      for (size_t i = 0; i < avg.size(); ++i) avg[i] += row[i] / rows.size();
    }
    in.sigma = quadratic_sigma(fleet, avg);
    in.sigma1 = quadratic_sigma1(fleet, rows);
    out.notes.push_back("sigma1 is the normalized per-round gradient second "
                        "moment at the per-round optimum");
  } else {
    out.notes.push_back("R from numerical optima; sigma, sigma1 from base");
  }
  return out;
}

bool exponent_check(double a, double b, double c) {
  return std::max(a, b) < c && c < 1.0;
}

double closed_form_epsilon(const std::string& scheme,
                           const ClosedFormInputs& in) {
  if (in.local_steps < 1 || !(in.rounds > 0) || in.num_clients < 1) {
    throw ConfigError("closed form needs K, N, M >= 1");
  }
  const double k = in.local_steps, n = in.rounds, m = in.num_clients;
  const double root = 1.0 / std::sqrt(k * n);
  if (scheme == "sync") {
    return root * in.init_dist_sq + (k - 1) / n * in.sigma +
           root / m * in.sigma;
  }
  if (scheme == "async") {
    const double rs = in.residual + in.sigma;
    const double ratio = in.speed_ratio;
    return root * in.init_dist_sq + (k - 1) / n * in.sigma +
           ratio * root * rs + ratio * ratio * ratio * k / n * m * m * rs +
           root * (in.window - 1);
  }
  if (scheme == "fedfix") {
    const double c = in.fedfix_periods;
    return root * in.init_dist_sq + (k - 1) / n * (in.residual + in.sigma) +
           (root + k / n * c * c) * (in.residual + c / m * in.sigma) +
           root * (in.window - 1);
  }
  throw UnsupportedError("no closed form for scheme '" + scheme + "'");
}

std::string format_report(const std::string& scheme, const BoundInputs& in,
                          const EpsilonTerms& t,
                          const std::vector<std::string>& notes) {
  std::ostringstream os;
  auto kv = [&](const char* k, double v) { os << k << '=' << format_double(v) << '\n'; };
  os << "scheme=" << scheme << '\n';
  os << "convention=big_O_constants_set_to_1\n";
  kv("M", in.num_clients);
  kv("K", in.local_steps);
  kv("N", in.rounds);
  kv("eta_g", in.server_lr);
  kv("eta_l", in.local_lr);
  kv("L", in.smoothness);
  kv("tau", in.staleness);
  kv("W", in.window);
  kv("alpha", in.alpha);
  kv("beta", in.beta);
  kv("Sigma", in.sigma);
  kv("Sigma1", in.sigma1);
  kv("max_q", in.max_q);
  kv("R", in.residual);
  kv("init_dist_sq", in.init_dist_sq);
  kv("chi_square", in.chi_square);
  kv("rho", in.rho);
  kv("eps_F", t.init);
  kv("eps_K", t.local);
  kv("eps_alpha", t.alpha);
  kv("eps_beta", t.beta);
  kv("eps_W", t.window);
  kv("eps_total", t.total);
  kv("eta_l_max", lr_constraint(in.local_steps, in.smoothness > 0 ? in.smoothness : 1.0,
                                in.rho, in.server_lr, in.staleness));
  for (const std::string& n : notes) os << "note=" << n << '\n';
  return os.str();
}

}  // namespace asyncfl::bounds
