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

#include "asyncfl/weights.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "asyncfl/errors.h"

namespace asyncfl {

namespace {

constexpr int64_t kMaxSimulatedWindow = 5000000;

int64_t lcm_or_throw(int64_t a, int64_t b) {
  int64_t g = std::gcd(a, b);
  __int128 l = static_cast<__int128>(a / g) * b;
  if (l > (static_cast<__int128>(1) << 62)) {
    throw UnsupportedError("window size overflows");
  }
  return static_cast<int64_t>(l);
}

Vector importances(const Fleet& fleet) {
  Vector p;
  for (const ClientSpec& c : fleet) p.push_back(c.importance);
  return p;
}

}  // namespace

WeightScheme parse_weight_scheme(const std::string& name) {
  if (name == "identical") return WeightScheme::kIdentical;
  if (name == "fedavg") return WeightScheme::kFedAvg;
  if (name == "async_time_based") return WeightScheme::kAsyncTimeBased;
  if (name == "fedfix_time_based") return WeightScheme::kFedFixTimeBased;
  if (name == "sampling_unbiased") return WeightScheme::kSamplingUnbiased;
  if (name == "custom") return WeightScheme::kCustom;
  throw ConfigError("unknown weight scheme '" + name + "'");
}

std::string weight_scheme_name(WeightScheme scheme) {
  switch (scheme) {
    case WeightScheme::kIdentical: return "identical";
    case WeightScheme::kFedAvg: return "fedavg";
    case WeightScheme::kAsyncTimeBased: return "async_time_based";
    case WeightScheme::kFedFixTimeBased: return "fedfix_time_based";
    case WeightScheme::kSamplingUnbiased: return "sampling_unbiased";
    case WeightScheme::kCustom: return "custom";
  }
  return "unknown";
}

int64_t window_size(const Fleet& fleet, const WaitPolicy& policy) {
  validate_fleet(fleet);
  policy.validate(static_cast<int>(fleet.size()));
  switch (policy.kind) {
    case PolicyKind::kSynchronous:
    case PolicyKind::kSampleUniform:
    case PolicyKind::kSampleMd:
    case PolicyKind::kSampleBiased:
      return 1;
    case PolicyKind::kFedFix: {
      std::vector<double> v = {policy.interval};
      for (const ClientSpec& c : fleet) v.push_back(c.compute_time);
      TimeScale s = TimeScale::fit(v);
      if (!s.exact()) throw UnsupportedError("incommensurate compute times");
      const double dt = s.to_ticks(policy.interval);
      int64_t w = 1;
      for (const ClientSpec& c : fleet) {
        auto periods =
            static_cast<int64_t>(std::ceil(s.to_ticks(c.compute_time) / dt));
        w = lcm_or_throw(w, std::max<int64_t>(periods, 1));
      }
      return w;
    }
    case PolicyKind::kAsynchronous:
      if (policy.ties == TieBreak::kSerialize) {
        std::vector<double> v;
        for (const ClientSpec& c : fleet) v.push_back(c.compute_time);
        TimeScale s = TimeScale::fit(v);
        if (!s.exact()) throw UnsupportedError("incommensurate compute times");
        int64_t nu = 1;
        for (double t : v) nu = lcm_or_throw(nu, static_cast<int64_t>(s.to_ticks(t)));
        int64_t w = 0;
        for (double t : v) w += nu / static_cast<int64_t>(s.to_ticks(t));
        return w;
      }
      [[fallthrough]];
    case PolicyKind::kFedBuff: {
      auto period = schedule_period(fleet, policy);
      if (!period) throw UnsupportedError("schedule period not found");
      return *period;
    }
  }
  return 1;
}

std::vector<Vector> expected_weight_schedule(const Fleet& fleet,
                                             const WaitPolicy& policy,
                                             std::span<const double> d,
                                             int64_t rounds) {
  const int m = validate_fleet(fleet) > 0 ? static_cast<int>(fleet.size()) : 0;
  if (static_cast<int>(d.size()) != m) {
    throw ConfigError("weight vector length does not match fleet");
  }
  std::vector<Vector> out;
  out.reserve(static_cast<size_t>(rounds));
  if (policy.kind == PolicyKind::kSampleUniform ||
      policy.kind == PolicyKind::kSampleMd) {
    Vector q(m);
    for (int i = 0; i < m; ++i) {
      double incl = policy.kind == PolicyKind::kSampleUniform
                        ? static_cast<double>(policy.m) / m
                        : policy.m * fleet[i].importance;
      q[i] = incl * d[i];
    }
    out.assign(static_cast<size_t>(rounds), q);
    return out;
  }
  if (policy.kind == PolicyKind::kSampleBiased &&
      policy.criterion == BiasCriterion::kHighestLoss) {
    throw UnsupportedError("loss-driven sampling has no static schedule");
  }
  Scheduler sched(fleet, policy, HardwareModel{});
  FleetState s = sched.initial_state();
  for (int64_t r = 0; r < rounds; ++r) {
    RoundOutcome o = sched.advance(s);
    Vector q(m, 0.0);
    for (size_t k = 0; k < o.participants.size(); ++k) {
      q[o.participants[k]] = o.multiplicity[k] * d[o.participants[k]];
    }
    out.push_back(std::move(q));
  }
  return out;
}

WeightPlan plan_weights(WeightScheme scheme, const Fleet& fleet,
                        const WaitPolicy& policy, HardwareMode mode,
                        std::span<const double> custom) {
  validate_fleet(fleet);
  const int m = static_cast<int>(fleet.size());
  policy.validate(m);
  WeightPlan plan;
  plan.scheme = scheme;
  const Vector p = importances(fleet);
  switch (scheme) {
    case WeightScheme::kIdentical:
      plan.d.assign(m, 1.0);
      break;
    case WeightScheme::kFedAvg:
      plan.d = p;
      break;
    case WeightScheme::kAsyncTimeBased: {
      if (mode != HardwareMode::kFixed) {
        throw UnsupportedError("time-based weights need fixed hardware");
      }
      double inv = 0.0;
      for (const ClientSpec& c : fleet) inv += 1.0 / c.compute_time;
      for (const ClientSpec& c : fleet) {
        plan.d.push_back(inv * c.compute_time * c.importance);
      }
      break;
    }
    case WeightScheme::kFedFixTimeBased: {
      if (mode != HardwareMode::kFixed) {
        throw UnsupportedError("time-based weights need fixed hardware");
      }
      if (policy.kind != PolicyKind::kFedFix) {
        throw ConfigError("fedfix time-based weights need the fedfix policy");
      }
      std::vector<double> v = {policy.interval};
      for (const ClientSpec& c : fleet) v.push_back(c.compute_time);
      TimeScale s = TimeScale::fit(v);
      const double dt = s.to_ticks(policy.interval);
      for (const ClientSpec& c : fleet) {
        double ratio = s.to_ticks(c.compute_time) / dt;
        double periods = std::ceil(s.exact() ? ratio : ratio - 1e-12);
        plan.d.push_back(std::max(periods, 1.0) * c.importance);
      }
      break;
    }
    case WeightScheme::kSamplingUnbiased:
      if (policy.kind == PolicyKind::kSampleUniform) {
        for (double pi : p) plan.d.push_back(pi * m / policy.m);
      } else if (policy.kind == PolicyKind::kSampleMd) {
        plan.d.assign(m, 1.0 / policy.m);
      } else {
        throw ConfigError("unbiased sampling weights need uniform or MD "
                          "sampling");
      }
      break;
    case WeightScheme::kCustom:
      if (static_cast<int>(custom.size()) != m) {
        throw ConfigError("custom weights need one entry per client");
      }
      plan.d.assign(custom.begin(), custom.end());
      break;
  }
  WeightVector{plan.d, WeightKind::kDeterministic}.validate();

  if (mode == HardwareMode::kExponential) {
    plan.window = 0;
    if (policy.kind == PolicyKind::kSynchronous) {
      plan.window = 1;
      plan.q_over_window = plan.d;
    } else if (policy.kind == PolicyKind::kAsynchronous) {
      // Memoryless clocks: client i finishes first with probability
      // proportional to its rate.
      double rate = 0.0;
      for (const ClientSpec& c : fleet) rate += 1.0 / c.compute_time;
      for (int i = 0; i < m; ++i) {
        plan.q_over_window.push_back(plan.d[i] / fleet[i].compute_time / rate);
      }
    } else if (policy.kind == PolicyKind::kSampleUniform ||
               policy.kind == PolicyKind::kSampleMd) {
      plan.window = 1;
      plan.q_over_window = expected_weight_schedule(fleet, policy, plan.d, 1)[0];
    }
    return plan;
  }

  try {
    plan.window = window_size(fleet, policy);
  } catch (const UnsupportedError&) {
    plan.window = 0;
  }
  if (policy.kind == PolicyKind::kSampleBiased &&
      policy.criterion == BiasCriterion::kHighestLoss) {
    return plan;
  }
  if (plan.window > 0 && plan.window <= kMaxSimulatedWindow) {
    auto q = expected_weight_schedule(fleet, policy, plan.d, plan.window);
    plan.q_over_window.assign(m, 0.0);
    for (const Vector& row : q) {
      for (int i = 0; i < m; ++i) plan.q_over_window[i] += row[i];
    }
    for (double& v : plan.q_over_window) v /= static_cast<double>(plan.window);
  }
  return plan;
}

WindowReport verify_window_assumption(const std::vector<Vector>& q_by_round,
                                      int64_t window,
                                      std::span<const double> p, double tol) {
  if (window < 1) throw ConfigError("window must be >= 1");
  WindowReport rep;
  const int64_t n = static_cast<int64_t>(q_by_round.size());
  rep.windows = n / window;
  rep.truncated = n % window != 0;
  rep.satisfied = rep.windows > 0;
  for (int64_t s = 0; s < rep.windows; ++s) {
    Vector avg(p.size(), 0.0);
    for (int64_t r = s * window; r < (s + 1) * window; ++r) {
      if (q_by_round[r].size() != p.size()) {
        throw ConfigError("weight row length does not match p");
      }
      for (size_t i = 0; i < p.size(); ++i) avg[i] += q_by_round[r][i];
    }
    double total = std::accumulate(avg.begin(), avg.end(), 0.0);
    if (total > 0) {
      for (double& v : avg) v /= total;
    }
    for (size_t i = 0; i < p.size(); ++i) {
      double dev = total > 0 ? std::abs(avg[i] - p[i])
                             : std::numeric_limits<double>::infinity();
      rep.max_deviation = std::max(rep.max_deviation, dev);
    }
    rep.normalized.push_back(std::move(avg));
  }
  rep.satisfied = rep.satisfied && rep.max_deviation < tol;
  return rep;
}

ChiSquare chi_square_bias(std::span<const double> r,
                          std::span<const double> s_normalized) {
  if (r.size() != s_normalized.size()) {
    throw ConfigError("r and s have different lengths");
  }
  ChiSquare out;
  for (size_t j = 0; j < r.size(); ++j) {
    if (s_normalized[j] > 0) {
      double diff = r[j] - s_normalized[j];
      out.value += diff * diff / s_normalized[j];
    } else if (r[j] > 0) {
      out.unrepresented = true;
    }
  }
  if (out.unrepresented) out.value = std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace asyncfl
