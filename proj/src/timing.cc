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

#include "asyncfl/timing.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "asyncfl/errors.h"

namespace asyncfl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int64_t kMaxDenominator = 1000000;
// Ticks must stay exactly representable after many additions.
constexpr double kMaxTicks = 4503599627370496.0;  // 2^52

// Smallest denominator q <= kMaxDenominator with v * q integral, via
// continued fractions; 0 when none.
int64_t rational_denominator(double v) {
  if (!std::isfinite(v)) return 0;
  double x = v;
  int64_t h0 = 1, h1 = 0, k0 = 0, k1 = 1;  // convergents h/k
  for (int it = 0; it < 64; ++it) {
    double a = std::floor(x);
    if (std::abs(a) > 1e15) return 0;
    int64_t ai = static_cast<int64_t>(a);
    int64_t h2 = ai * h0 + h1, k2 = ai * k0 + k1;
    if (k2 > kMaxDenominator) return 0;
    h1 = h0;
    h0 = h2;
    k1 = k0;
    k0 = k2;
    double approx = static_cast<double>(h0) / static_cast<double>(k0);
    if (std::abs(approx - v) <= 1e-12 * std::max(1.0, std::abs(v))) return k0;
    double frac = x - a;
    if (frac <= 0) return 0;
    x = 1.0 / frac;
  }
  return 0;
}

std::optional<int64_t> checked_lcm(int64_t a, int64_t b) {
  int64_t g = std::gcd(a, b);
  __int128 l = static_cast<__int128>(a / g) * b;
  if (l > (static_cast<__int128>(1) << 52)) return std::nullopt;
  return static_cast<int64_t>(l);
}

}  // namespace

WaitPolicy WaitPolicy::synchronous() { return {}; }

WaitPolicy WaitPolicy::asynchronous(TieBreak ties) {
  WaitPolicy p;
  p.kind = PolicyKind::kAsynchronous;
  p.ties = ties;
  return p;
}

WaitPolicy WaitPolicy::fedfix(double interval) {
  WaitPolicy p;
  p.kind = PolicyKind::kFedFix;
  p.interval = interval;
  return p;
}

WaitPolicy WaitPolicy::fedbuff(int m, TieBreak ties) {
  WaitPolicy p;
  p.kind = PolicyKind::kFedBuff;
  p.m = m;
  p.ties = ties;
  return p;
}

WaitPolicy WaitPolicy::sample_uniform(int m) {
  WaitPolicy p;
  p.kind = PolicyKind::kSampleUniform;
  p.m = m;
  return p;
}

WaitPolicy WaitPolicy::sample_md(int m) {
  WaitPolicy p;
  p.kind = PolicyKind::kSampleMd;
  p.m = m;
  return p;
}

WaitPolicy WaitPolicy::sample_biased(int m, BiasCriterion criterion) {
  WaitPolicy p;
  p.kind = PolicyKind::kSampleBiased;
  p.m = m;
  p.criterion = criterion;
  return p;
}

bool WaitPolicy::is_sampling() const {
  return kind == PolicyKind::kSampleUniform || kind == PolicyKind::kSampleMd ||
         kind == PolicyKind::kSampleBiased;
}

void WaitPolicy::validate(int num_clients) const {
  if (num_clients < 1) throw ConfigError("empty fleet");
  if (kind == PolicyKind::kFedFix &&
      (!(interval > 0) || !std::isfinite(interval))) {
    throw ConfigError("fedfix interval must be finite and > 0");
  }
  if ((kind == PolicyKind::kFedBuff || is_sampling()) &&
      (m < 1 || m > num_clients)) {
    throw ConfigError(name() + " requires 1 <= m <= M");
  }
}

std::string WaitPolicy::name() const {
  switch (kind) {
    case PolicyKind::kSynchronous: return "synchronous";
    case PolicyKind::kAsynchronous: return "asynchronous";
    case PolicyKind::kFedFix: return "fedfix";
    case PolicyKind::kFedBuff: return "fedbuff";
    case PolicyKind::kSampleUniform: return "sample_uniform";
    case PolicyKind::kSampleMd: return "sample_md";
    case PolicyKind::kSampleBiased: return "sample_biased";
  }
  return "unknown";
}

TimeScale TimeScale::fit(std::span<const double> values) {
  TimeScale s;
  int64_t den = 1;
  for (double v : values) {
    int64_t q = rational_denominator(v);
    if (q == 0) return s;
    auto l = checked_lcm(den, q);
    if (!l || *l > kMaxDenominator * 1000) return s;
    den = *l;
  }
  for (double v : values) {
    if (std::abs(v) * static_cast<double>(den) > kMaxTicks / 1024) return s;
  }
  s.exact_ = true;
  s.resolution_ = static_cast<double>(den);
  return s;
}

Scheduler::Scheduler(const Fleet& fleet, WaitPolicy policy, HardwareModel hw,
                     uint64_t sampling_seed)
    : policy_(policy),
      hw_(hw),
      hw_rng_(derive_seed(hw.seed, 0x4a7d)),
      sampling_rng_(derive_seed(sampling_seed, 0x5a3b)) {
  validate_fleet(fleet);
  policy_.validate(static_cast<int>(fleet.size()));
  if (hw_.mode == HardwareMode::kFixed) {
    std::vector<double> values;
    for (const ClientSpec& c : fleet) {
      values.push_back(c.compute_time);
      if (c.phase > 0) values.push_back(c.phase);
    }
    if (policy_.kind == PolicyKind::kFedFix) values.push_back(policy_.interval);
    scale_ = TimeScale::fit(values);
  }
  for (const ClientSpec& c : fleet) {
    duration_.push_back(scale_.to_ticks(c.compute_time));
    phase_.push_back(c.phase > 0 ? scale_.to_ticks(c.phase) : 0.0);
    importance_.push_back(c.importance);
  }
  if (policy_.kind == PolicyKind::kFedFix) {
    interval_ticks_ = scale_.to_ticks(policy_.interval);
  }
}

double Scheduler::draw(int i) {
  if (hw_.mode == HardwareMode::kFixed) return duration_[i];
  std::exponential_distribution<double> e(1.0 / duration_[i]);
  return e(hw_rng_);
}

double Scheduler::tick_tolerance() const {
  // Inexact clocks accumulate rounding; exact ones compare with ==.
  return scale_.exact() || hw_.mode == HardwareMode::kExponential ? 0.0 : 1e-9;
}

FleetState Scheduler::initial_state() {
  const int m = num_clients();
  FleetState s;
  s.remaining.assign(m, kInf);
  s.anchor.assign(m, 0);
  s.busy.assign(m, 0);
  if (policy_.is_sampling()) return s;
  for (int i = 0; i < m; ++i) {
    s.remaining[i] = phase_[i] > 0 ? phase_[i] : draw(i);
    s.busy[i] = 1;
  }
  return s;
}

RoundOutcome Scheduler::advance(FleetState& state,
                                std::span<const double> scores) {
  const int m = num_clients();
  if (static_cast<int>(state.remaining.size()) != m) {
    throw ConfigError("fleet state does not match scheduler");
  }
  RoundOutcome out;
  double dt = 0.0;
  const int n = state.round;

  if (policy_.is_sampling()) {
    std::vector<int> count(m, 0);
    const int k = policy_.m;
    if (policy_.kind == PolicyKind::kSampleUniform) {
      std::vector<int> idx(m);
      std::iota(idx.begin(), idx.end(), 0);
      for (int j = 0; j < k; ++j) {
        std::uniform_int_distribution<int> pick(j, m - 1);
        std::swap(idx[j], idx[pick(sampling_rng_)]);
        count[idx[j]] = 1;
      }
    } else if (policy_.kind == PolicyKind::kSampleMd) {
      std::discrete_distribution<int> cat(importance_.begin(),
                                          importance_.end());
      for (int j = 0; j < k; ++j) ++count[cat(sampling_rng_)];
    } else {
      std::vector<int> idx(m);
      std::iota(idx.begin(), idx.end(), 0);
      if (policy_.criterion == BiasCriterion::kFastest) {
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
          return duration_[a] < duration_[b];
        });
      } else {
        if (static_cast<int>(scores.size()) != m) {
          throw ConfigError("highest-loss sampler needs per-client losses");
        }
        std::stable_sort(idx.begin(), idx.end(),
                         [&](int a, int b) { return scores[a] > scores[b]; });
      }
      for (int j = 0; j < k; ++j) count[idx[j]] = 1;
    }
    for (int i = 0; i < m; ++i) {
      if (count[i] == 0) continue;
      double t = draw(i);
      dt = std::max(dt, t);
      out.participants.push_back(i);
      out.multiplicity.push_back(count[i]);
      out.anchors.push_back(n);
    }
    for (int i = 0; i < m; ++i) {
      state.anchor[i] = n + 1;
      state.busy[i] = 0;
      state.remaining[i] = kInf;
    }
  } else {
    const double tol = tick_tolerance();
    std::vector<int> chosen;
    switch (policy_.kind) {
      case PolicyKind::kSynchronous:
        dt = *std::max_element(state.remaining.begin(), state.remaining.end());
        for (int i = 0; i < m; ++i) chosen.push_back(i);
        break;
      case PolicyKind::kFedFix:
        dt = interval_ticks_;
        for (int i = 0; i < m; ++i) {
          if (state.remaining[i] <= dt * (1 + tol)) chosen.push_back(i);
        }
        break;
      case PolicyKind::kAsynchronous:
      case PolicyKind::kFedBuff: {
        const int k = policy_.kind == PolicyKind::kFedBuff ? policy_.m : 1;
        std::vector<int> idx(m);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
          return state.remaining[a] < state.remaining[b];
        });
        dt = state.remaining[idx[k - 1]];
        if (policy_.ties == TieBreak::kSerialize) {
          chosen.assign(idx.begin(), idx.begin() + k);
        } else {
          for (int i : idx) {
            if (state.remaining[i] <= dt * (1 + tol)) chosen.push_back(i);
          }
        }
        std::sort(chosen.begin(), chosen.end());
        break;
      }
      default:
        break;
    }
    std::vector<char> in(m, 0);
    for (int i : chosen) in[i] = 1;
    for (int i = 0; i < m; ++i) {
      if (in[i]) {
        out.participants.push_back(i);
        out.multiplicity.push_back(1);
        out.anchors.push_back(state.anchor[i]);
        state.anchor[i] = n + 1;
        state.remaining[i] = draw(i);
      } else {
        state.remaining[i] = std::max(state.remaining[i] - dt, 0.0);
      }
    }
  }
  state.clock += dt;
  state.round = n + 1;
  out.dt = scale_.to_time(dt);
  return out;
}

std::optional<double> compute_time_lcm(const Fleet& fleet) {
  std::vector<double> taus;
  for (const ClientSpec& c : fleet) taus.push_back(c.compute_time);
  TimeScale s = TimeScale::fit(taus);
  if (!s.exact()) return std::nullopt;
  int64_t l = 1;
  for (double t : taus) {
    auto next = checked_lcm(l, static_cast<int64_t>(s.to_ticks(t)));
    if (!next) return std::nullopt;
    l = *next;
  }
  return s.to_time(static_cast<double>(l));
}

std::optional<int64_t> schedule_period(const Fleet& fleet,
                                       const WaitPolicy& policy,
                                       int64_t max_rounds) {
  if (policy.is_sampling()) {
    if (policy.kind == PolicyKind::kSampleBiased &&
        policy.criterion == BiasCriterion::kFastest) {
      return 1;
    }
    return std::nullopt;
  }
  Scheduler sched(fleet, policy, HardwareModel{});
  if (!sched.scale().exact()) return std::nullopt;
  // Brent's cycle detection on (clocks, relative anchors).
  using Key = std::vector<double>;
  auto key = [](const FleetState& s) {
    Key k(s.remaining.begin(), s.remaining.end());
    for (int a : s.anchor) k.push_back(static_cast<double>(s.round - a));
    return k;
  };
  FleetState tortoise = sched.initial_state();
  FleetState hare = tortoise;
  sched.advance(hare);
  int64_t power = 1, lam = 1;
  while (key(tortoise) != key(hare)) {
    if (power == lam) {
      tortoise = hare;
      power *= 2;
      lam = 0;
    }
    sched.advance(hare);
    ++lam;
    if (hare.round > max_rounds) return std::nullopt;
  }
  return lam;
}

int measured_staleness(const Fleet& fleet, const WaitPolicy& policy) {
  auto period = schedule_period(fleet, policy);
  if (!period) {
    throw UnsupportedError("schedule has no detectable period; measure "
                           "staleness empirically from a trajectory");
  }
  Scheduler sched(fleet, policy, HardwareModel{});
  FleetState s = sched.initial_state();
  int worst = 0;
  const int64_t rounds = 3 * *period + 4 * static_cast<int64_t>(fleet.size());
  for (int64_t r = 0; r < rounds; ++r) {
    int n = s.round;
    RoundOutcome o = sched.advance(s);
    for (int a : o.anchors) worst = std::max(worst, n - a);
  }
  return worst;
}

int staleness_bound(const Fleet& fleet, const WaitPolicy& policy,
                    HardwareMode mode) {
  validate_fleet(fleet);
  policy.validate(static_cast<int>(fleet.size()));
  if (mode == HardwareMode::kExponential) {
    throw UnsupportedError("staleness is a random variable under exponential "
                           "hardware; measure empirically from trajectory");
  }
  switch (policy.kind) {
    case PolicyKind::kSynchronous:
    case PolicyKind::kSampleUniform:
    case PolicyKind::kSampleMd:
    case PolicyKind::kSampleBiased:
      return 0;
    case PolicyKind::kFedFix: {
      double tau_max = 0.0;
      for (const ClientSpec& c : fleet) {
        tau_max = std::max(tau_max, c.compute_time);
      }
      std::vector<double> v = {tau_max, policy.interval};
      TimeScale s = TimeScale::fit(v);
      double a = s.to_ticks(tau_max), b = s.to_ticks(policy.interval);
      if (b >= a) return 0;
      return static_cast<int>(std::ceil(a / b - (s.exact() ? 0.0 : 1e-12)));
    }
    case PolicyKind::kAsynchronous:
    case PolicyKind::kFedBuff:
      return measured_staleness(fleet, policy);
  }
  return 0;
}

SamplerCovariance sampler_covariance(const WaitPolicy& policy,
                                     std::span<const double> d,
                                     std::span<const double> p) {
  const int num = static_cast<int>(d.size());
  policy.validate(num);
  if (p.size() != d.size()) throw ConfigError("d and p lengths differ");
  SamplerCovariance out;
  switch (policy.kind) {
    case PolicyKind::kSynchronous:
    case PolicyKind::kFedFix:
      return out;
    case PolicyKind::kAsynchronous:
    case PolicyKind::kFedBuff:
      out.alpha = 0.0;
      out.beta = *std::max_element(d.begin(), d.end());
      return out;
    case PolicyKind::kSampleBiased:
      out.biased = true;
      return out;
    case PolicyKind::kSampleUniform: {
      const double m = policy.m, big_m = num;
      out.alpha = num == 1 ? 1.0 : (m - 1) * big_m / (m * (big_m - 1));
      const double incl = m / big_m;
      out.beta = 0.0;
      for (int i = 0; i < num; ++i) {
        double q = incl * d[i];
        if (q <= 0) continue;
        double gamma = incl * d[i] * d[i] - out.alpha * q * q;
        out.beta = std::max(out.beta, gamma / q);
      }
      return out;
    }
    case PolicyKind::kSampleMd: {
      const double m = policy.m;
      out.alpha = (m - 1) / m;
      out.beta = 0.0;
      for (int i = 0; i < num; ++i) {
        // w_i = c_i d_i with c_i ~ Binomial(m, p_i).
        double q = m * p[i] * d[i];
        if (q <= 0) continue;
        double second = d[i] * d[i] * (m * p[i] * (1 - p[i]) + m * m * p[i] * p[i]);
        out.beta = std::max(out.beta, (second - out.alpha * q * q) / q);
      }
      return out;
    }
  }
  return out;
}

}  // namespace asyncfl
