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

#include "asyncfl/oracle.h"

#include <cmath>
#include <numeric>

#include <boost/multiprecision/cpp_int.hpp>

#include "asyncfl/errors.h"

namespace asyncfl::oracle {

namespace {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

std::vector<cpp_rational> exact_async(int num_clients, int n) {
  if (num_clients < 1 || n < 0) throw ConfigError("need M >= 1 and n >= 0");
  cpp_rational stay(num_clients - 1, num_clients);
  cpp_rational pick(1, num_clients);
  std::vector<cpp_rational> q(n + 1);
  cpp_rational power = 1;  // stay^(n-k)
  for (int k = n; k >= 1; --k) {
    q[k] = power * pick;
    power *= stay;
  }
  q[0] = power;
  return q;
}

std::string to_string(const cpp_rational& r) {
  std::string num = boost::multiprecision::numerator(r).str();
  std::string den = boost::multiprecision::denominator(r).str();
  return den == "1" ? num : num + "/" + den;
}

// Cumulative window boundaries T^0 = 0, T^k = sum_{j<k} windows_j.
double boundary(const SchemeSpec& spec, int k) {
  double t = 0.0;
  for (int j = 0; j < k; ++j) t += spec.windows[j];
  return t;
}

}  // namespace

std::string scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::kSync: return "sync";
    case Scheme::kSyncUniform: return "sync_uniform";
    case Scheme::kAsync: return "async";
    case Scheme::kHybrid: return "hybrid";
    case Scheme::kHybridEvo: return "hybrid_evo";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "sync") return Scheme::kSync;
  if (name == "sync_uniform") return Scheme::kSyncUniform;
  if (name == "async") return Scheme::kAsync;
  if (name == "hybrid") return Scheme::kHybrid;
  if (name == "hybrid_evo") return Scheme::kHybridEvo;
  throw ConfigError("unknown oracle scheme '" + name + "'");
}

void SchemeSpec::validate(int rounds) const {
  if (num_clients < 1) throw ConfigError("oracle needs M >= 1");
  if (rounds < 0) throw ConfigError("negative round count");
  if (scheme == Scheme::kSyncUniform &&
      (sample_size < 1 || sample_size > num_clients)) {
    throw ConfigError("uniform sampling needs 1 <= m <= M");
  }
  if (scheme == Scheme::kHybrid && !(window > 0)) {
    throw ConfigError("hybrid scheme needs a window T > 0");
  }
  if (scheme == Scheme::kHybridEvo) {
    if (static_cast<int>(windows.size()) < rounds + 1) {
      throw ConfigError("hybrid_evo needs one window length per round");
    }
    for (double w : windows) {
      if (!(w > 0)) throw ConfigError("hybrid_evo windows must be > 0");
    }
  }
}

double phi(double local_lr, int steps) {
  if (steps < 1) throw ConfigError("K must be >= 1");
  return 1.0 - std::pow(1.0 - local_lr, steps);
}

Vector staleness_law(const SchemeSpec& spec, int n) {
  spec.validate(spec.scheme == Scheme::kHybridEvo ? n : 0);
  Vector q(n + 1, 0.0);
  switch (spec.scheme) {
    case Scheme::kSync:
    case Scheme::kSyncUniform:
      q[n] = 1.0;
      break;
    case Scheme::kAsync: {
      const double stay = (spec.num_clients - 1.0) / spec.num_clients;
      for (int k = 1; k <= n; ++k) {
        q[k] = std::pow(stay, n - k) / spec.num_clients;
      }
      q[0] = std::pow(stay, n);
      break;
    }
    case Scheme::kHybrid: {
      const double t = spec.window;
      for (int k = 1; k <= n; ++k) {
        q[k] = std::exp(-(n - k) * t) - std::exp(-(n - k + 1) * t);
      }
      q[0] = std::exp(-n * t);
      break;
    }
    case Scheme::kHybridEvo: {
      const double end = boundary(spec, n + 1);
      for (int k = 1; k <= n; ++k) {
        q[k] = std::exp(-(end - boundary(spec, k + 1))) -
               std::exp(-(end - boundary(spec, k)));
      }
      q[0] = std::exp(-(end - boundary(spec, 1)));
      break;
    }
  }
  return q;
}

std::vector<std::string> exact_async_staleness_law(int num_clients, int n) {
  std::vector<std::string> out;
  for (const cpp_rational& r : exact_async(num_clients, n)) {
    out.push_back(to_string(r));
  }
  return out;
}

std::string exact_async_staleness_sum(int num_clients, int n) {
  cpp_rational s = 0;
  for (const cpp_rational& r : exact_async(num_clients, n)) s += r;
  return to_string(s);
}

Expectation expectation_recursion(const SchemeSpec& spec, double phi_value,
                                  double server_lr, double optimum,
                                  int rounds) {
  spec.validate(rounds);
  Expectation e;
  e.a.assign(rounds + 1, 0.0);
  e.b.assign(rounds + 1, 0.0);
  e.a[0] = 1.0;
  const double step = server_lr * phi_value;
  if (spec.scheme == Scheme::kHybrid || spec.scheme == Scheme::kHybridEvo) {
    // Clients finish independently, so conditioning on client i's arrival
    // shifts theta^{n+1} by its own weighted update. The mean anchor model
    // c * theta0 + g therefore carries that correction instead of being the
    // plain staleness-law average of past means.
    double c = 1.0, g = 0.0;
    for (int n = 0; n < rounds; ++n) {
      const double t =
          spec.scheme == Scheme::kHybrid ? spec.window : spec.windows[n];
      const double r = 1.0 - std::exp(-t);
      const double own = (1.0 - r) * step / spec.num_clients;
      e.a[n + 1] = e.a[n] - step * c;
      e.b[n + 1] = e.b[n] - step * g + step * optimum;
      c = r * e.a[n + 1] + (1.0 - r - own) * c;
      g = r * e.b[n + 1] + (1.0 - r - own) * g + own * optimum;
    }
    return e;
  }
  for (int n = 0; n < rounds; ++n) {
    Vector q = staleness_law(spec, n);
    double sa = 0.0, sb = 0.0;
    for (int k = 0; k <= n; ++k) {
      sa += q[k] * e.a[k];
      sb += q[k] * e.b[k];
    }
    e.a[n + 1] = e.a[n] - step * sa;
    e.b[n + 1] = e.b[n] - step * sb + step * optimum;
  }
  return e;
}

SecondMoment variance_recursion(const SchemeSpec& spec, double phi_value,
                                std::span<const double> client_optima,
                                double theta0, int rounds) {
  spec.validate(rounds);
  const int big_m = spec.num_clients;
  if (static_cast<int>(client_optima.size()) != big_m) {
    throw ConfigError("need one optimum per client");
  }
  const double star =
      std::accumulate(client_optima.begin(), client_optima.end(), 0.0) / big_m;
  double spread = 0.0;
  for (double o : client_optima) spread += (o - star) * (o - star);

  SecondMoment out;
  out.second_moment.assign(rounds + 1, 0.0);
  out.u.assign(rounds + 1, Vector());
  const double e0 = theta0 - star;
  out.second_moment[0] = e0 * e0;
  out.u[0] = {e0 * e0};

  const double f = phi_value;
  for (int n = 0; n < rounds; ++n) {
    double gamma = 0.0, r = 1.0, d = 1.0 / big_m;
    switch (spec.scheme) {
      case Scheme::kSync:
        break;
      case Scheme::kSyncUniform: {
        const double m = spec.sample_size;
        const double r2 =
            big_m == 1 ? 1.0 : m * (m - 1) / (big_m * (big_m - 1.0));
        r = std::sqrt(r2);
        d = 1.0 / m;
        gamma = (m / big_m - r2) * d * d;
        break;
      }
      case Scheme::kAsync:
        gamma = 1.0 / big_m;
        r = 0.0;
        d = 1.0;
        break;
      case Scheme::kHybrid:
      case Scheme::kHybridEvo: {
        const double t =
            spec.scheme == Scheme::kHybrid ? spec.window : spec.windows[n];
        const double stay = std::exp(-t);
        r = 1.0 - stay;
        d = 1.0 / (r * big_m);
        gamma = stay / ((1.0 - stay) * big_m * big_m);
        break;
      }
    }
    out.gamma.push_back(gamma);
    out.participation.push_back(r);
    out.weight.push_back(d);

    Vector q = staleness_law(spec, n);
    const double r2d2m = r * r * d * d * big_m;
    double cross = 0.0, self = 0.0, pair = 0.0;
    for (int s = 0; s <= n; ++s) {
      if (q[s] == 0.0) continue;
      cross += q[s] * out.inner(n, s);
      self += q[s] * out.second_moment[s];
      for (int w = 0; w <= n; ++w) {
        if (q[w] != 0.0) pair += q[s] * q[w] * out.inner(s, w);
      }
    }
    double v = out.second_moment[n] - 2 * f * cross + gamma * f * f * spread +
               f * f * (gamma * big_m + r2d2m) * self +
               f * f * r2d2m * (big_m - 1) * pair;
    out.second_moment[n + 1] = v;

    Vector row(n + 2, 0.0);
    for (int w = 0; w <= n; ++w) {
      double acc = 0.0;
      for (int s = 0; s <= n; ++s) {
        if (q[s] != 0.0) acc += q[s] * out.inner(w, s);
      }
      row[w] = out.inner(n, w) - f * acc;
    }
    row[n + 1] = v;
    out.u[n + 1] = std::move(row);
  }
  return out;
}

double expected_round_time(const SchemeSpec& spec, double rate) {
  if (!(rate > 0)) throw ConfigError("rate must be > 0");
  spec.validate(0);
  auto harmonic = [&](int count) {
    double s = 0.0;
    for (int k = 0; k < count; ++k) s += 1.0 / ((count - k) * rate);
    return s;
  };
  switch (spec.scheme) {
    case Scheme::kSync: return harmonic(spec.num_clients);
    case Scheme::kSyncUniform: return harmonic(spec.sample_size);
    case Scheme::kAsync: return 1.0 / (spec.num_clients * rate);
    case Scheme::kHybrid: return spec.window;
    case Scheme::kHybridEvo: break;
  }
  throw UnsupportedError("hybrid_evo round times are caller supplied");
}

}  // namespace asyncfl::oracle
