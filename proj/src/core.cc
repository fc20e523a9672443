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

#include "asyncfl/core.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "asyncfl/errors.h"
#include "asyncfl/rng.h"

namespace asyncfl {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

using LossGrad = std::function<double(std::span<const double>, Vector*)>;

// Gradient descent with Barzilai-Borwein step proposals and a tolerant
// Armijo backtrack.
Vector descend(const LossGrad& fg, Vector x, double tol) {
  Vector g;
  double f = fg(x, &g);
  double step = 1.0;
  Vector x_new(x.size()), g_new;
  for (int it = 0; it < 2000000; ++it) {
    double gg = dot(g, g);
    if (std::sqrt(gg) < tol) return x;
    double f_new = 0.0;
    for (int bt = 0;; ++bt) {
      for (size_t k = 0; k < x.size(); ++k) x_new[k] = x[k] - step * g[k];
      f_new = fg(x_new, &g_new);
      if (std::isfinite(f_new) &&
          f_new <= f - 0.25 * step * gg + 1e-14 * std::abs(f)) {
        break;
      }
      step *= 0.5;
      if (bt > 200) throw Error("optimizer line search failed");
    }
    double sy = 0.0, ss = 0.0;
    for (size_t k = 0; k < x.size(); ++k) {
      double s = x_new[k] - x[k];
      double y = g_new[k] - g[k];
      sy += s * y;
      ss += s * s;
    }
    step = sy > 0 ? std::clamp(ss / sy, 1e-8, 1e8) : step * 2.0;
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
  }
  throw Error("optimizer did not reach gradient tolerance");
}

}  // namespace

int validate_fleet(const Fleet& fleet) {
  if (fleet.empty()) throw ConfigError("empty fleet");
  double total = 0.0;
  int dim = -1;
  for (size_t i = 0; i < fleet.size(); ++i) {
    const ClientSpec& c = fleet[i];
    if (c.id != static_cast<int>(i)) {
      throw ConfigError("client ids must be 0..M-1 in order");
    }
    if (!(c.importance > 0) || c.importance > 1 + 1e-12) {
      throw ConfigError("importance p_i must lie in (0, 1]");
    }
    if (!(c.compute_time > 0) || !std::isfinite(c.compute_time)) {
      throw ConfigError("compute time must be finite and > 0");
    }
    if (!(c.phase >= 0) || !std::isfinite(c.phase)) {
      throw ConfigError("phase must be finite and >= 0");
    }
    if (c.distribution_id < 0) throw ConfigError("negative distribution id");
    if (!c.objective) {
      throw ConfigError("client " + std::to_string(i) + " has no objective");
    }
    if (dim < 0) dim = c.objective->dim();
    if (c.objective->dim() != dim) {
      throw ConfigError("client objectives disagree on dimension");
    }
    total += c.importance;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ConfigError("importances must sum to 1");
  }
  return dim;
}

Fleet make_fleet(std::vector<std::shared_ptr<const Objective>> objectives,
                 std::span<const double> compute_times) {
  if (objectives.size() != compute_times.size()) {
    throw ConfigError("objective / compute time count mismatch");
  }
  Fleet fleet(objectives.size());
  const double p = 1.0 / static_cast<double>(objectives.size());
  for (size_t i = 0; i < fleet.size(); ++i) {
    fleet[i].id = static_cast<int>(i);
    fleet[i].importance = p;
    fleet[i].compute_time = compute_times[i];
    fleet[i].distribution_id = static_cast<int>(i);
    fleet[i].objective = std::move(objectives[i]);
  }
  validate_fleet(fleet);
  return fleet;
}

Fleet make_quadratic_fleet(std::span<const double> optima,
                           std::span<const double> compute_times,
                           double curvature, double noise_std) {
  std::vector<std::shared_ptr<const Objective>> objs;
  for (double o : optima) {
    objs.push_back(std::make_shared<QuadraticObjective>(
        QuadraticObjective::centered({o}, curvature, noise_std)));
  }
  return make_fleet(std::move(objs), compute_times);
}

void WeightVector::validate() const {
  double s = 0.0;
  for (double v : values) {
    if (!(v >= 0) || !std::isfinite(v)) {
      throw InvalidWeightsError("weights must be finite and nonnegative");
    }
    s += v;
  }
  if (kind == WeightKind::kNormalized && std::abs(s - 1.0) > 1e-12) {
    throw InvalidWeightsError("normalized weights must sum to 1");
  }
}

WeightVector WeightVector::normalized() const {
  validate();
  double s = std::accumulate(values.begin(), values.end(), 0.0);
  if (s <= 0) throw InvalidWeightsError("cannot normalize zero weights");
  WeightVector out{values, WeightKind::kNormalized};
  for (double& v : out.values) v /= s;
  return out;
}

WeightVector importance_weights(const Fleet& fleet) {
  WeightVector w{{}, WeightKind::kImportance};
  for (const ClientSpec& c : fleet) w.values.push_back(c.importance);
  return w;
}

double federated_loss(std::span<const double> params, const Fleet& fleet) {
  return surrogate_loss(params, importance_weights(fleet), fleet);
}

double surrogate_loss(std::span<const double> params, const WeightVector& q,
                      const Fleet& fleet) {
  if (q.values.size() != fleet.size()) {
    throw ConfigError("weight vector length does not match fleet");
  }
  q.validate();
  double s = 0.0;
  for (size_t i = 0; i < fleet.size(); ++i) {
    if (static_cast<int>(params.size()) != fleet[i].objective->dim()) {
      throw ConfigError("model dimension does not match client objective");
    }
    if (q.values[i] != 0.0) s += q.values[i] * fleet[i].objective->loss(params);
  }
  return s;
}

ResidualEstimate convergence_residual(const Fleet& fleet, const WeightVector& q,
                                      std::span<const double> optimum,
                                      int draws, uint64_t seed,
                                      int batch_size) {
  if (draws < 1) throw ConfigError("convergence residual needs >= 1 draw");
  if (q.values.size() != fleet.size()) {
    throw ConfigError("weight vector length does not match fleet");
  }
  q.validate();
  std::vector<GradientStream> streams;
  bool exact = true;
  for (size_t i = 0; i < fleet.size(); ++i) {
    streams.emplace_back(derive_seed(seed, i), batch_size);
    exact = exact && fleet[i].objective->exact_gradients(streams.back());
  }
  auto one_draw = [&]() {
    double s = 0.0;
    for (size_t i = 0; i < fleet.size(); ++i) {
      if (q.values[i] == 0.0) continue;
      Vector g = fleet[i].objective->stochastic_gradient(optimum, streams[i]);
      s += q.values[i] * dot(g, g);
    }
    return s;
  };
  ResidualEstimate est;
  if (exact) {
    est.mean = one_draw();
    est.draws = draws;
    return est;
  }
  double mean = 0.0, m2 = 0.0;
  for (int k = 1; k <= draws; ++k) {
    double v = one_draw();
    double delta = v - mean;
    mean += delta / k;
    m2 += delta * (v - mean);
  }
  est.mean = mean;
  est.draws = draws;
  est.standard_error = draws > 1 ? std::sqrt(m2 / (draws - 1) / draws) : 0.0;
  return est;
}

DistributionWeights distribution_weights(const Fleet& fleet,
                                         const WeightVector& q) {
  if (q.values.size() != fleet.size()) {
    throw ConfigError("weight vector length does not match fleet");
  }
  int j_max = 0;
  for (const ClientSpec& c : fleet) j_max = std::max(j_max, c.distribution_id);
  DistributionWeights out;
  out.r.assign(j_max + 1, 0.0);
  out.s.assign(j_max + 1, 0.0);
  for (size_t i = 0; i < fleet.size(); ++i) {
    out.r[fleet[i].distribution_id] += fleet[i].importance;
    out.s[fleet[i].distribution_id] += q.values[i];
  }
  double total = std::accumulate(out.s.begin(), out.s.end(), 0.0);
  out.s_normalized.assign(out.s.size(), 0.0);
  if (total > 0) {
    for (size_t j = 0; j < out.s.size(); ++j) {
      out.s_normalized[j] = out.s[j] / total;
    }
  }
  return out;
}

const QuadraticObjective* as_quadratic(const ClientSpec& client) {
  return dynamic_cast<const QuadraticObjective*>(client.objective.get());
}

Vector weighted_optimum(const Fleet& fleet, std::span<const double> weights,
                        double tol) {
  const int dim = validate_fleet(fleet);
  if (weights.size() != fleet.size()) {
    throw ConfigError("weight vector length does not match fleet");
  }
  bool quadratic = true;
  for (const ClientSpec& c : fleet) quadratic = quadratic && as_quadratic(c);
  if (quadratic) {
    Vector num(dim, 0.0), den(dim, 0.0);
    for (size_t i = 0; i < fleet.size(); ++i) {
      const QuadraticObjective* q = as_quadratic(fleet[i]);
      for (int k = 0; k < dim; ++k) {
        num[k] += weights[i] * q->linear()[k];
        den[k] += weights[i] * q->curvature()[k];
      }
    }
    Vector x(dim);
    for (int k = 0; k < dim; ++k) {
      if (den[k] == 0.0) throw ConfigError("weighted curvature vanishes");
      x[k] = -num[k] / (2.0 * den[k]);
    }
    return x;
  }
  LossGrad fg = [&](std::span<const double> x, Vector* g) {
    g->assign(x.size(), 0.0);
    double f = 0.0;
    for (size_t i = 0; i < fleet.size(); ++i) {
      if (weights[i] == 0.0) continue;
      f += weights[i] * fleet[i].objective->loss(x);
      Vector gi = fleet[i].objective->gradient(x);
      for (size_t k = 0; k < x.size(); ++k) (*g)[k] += weights[i] * gi[k];
    }
    return f;
  };
  return descend(fg, Vector(dim, 0.0), tol);
}

Vector minimize(const Objective& objective, double tol) {
  if (auto q = dynamic_cast<const QuadraticObjective*>(&objective)) {
    return q->optimum();
  }
  LossGrad fg = [&](std::span<const double> x, Vector* g) {
    *g = objective.gradient(x);
    return objective.loss(x);
  };
  return descend(fg, Vector(objective.dim(), 0.0), tol);
}

}  // namespace asyncfl
