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

#include "asyncfl/objectives.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "asyncfl/errors.h"

namespace asyncfl {

namespace {

void check_dim(std::span<const double> params, int dim) {
  if (static_cast<int>(params.size()) != dim) {
    throw ConfigError("parameter dimension " + std::to_string(params.size()) +
                      " does not match objective dimension " +
                      std::to_string(dim));
  }
}

// log(1 + e^z) without overflow.
double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

QuadraticObjective::QuadraticObjective(Vector curvature, Vector linear,
                                       double constant, double noise_std)
    : curvature_(std::move(curvature)),
      linear_(std::move(linear)),
      constant_(constant),
      noise_std_(noise_std) {
  if (curvature_.empty() || curvature_.size() != linear_.size()) {
    throw ConfigError("quadratic objective needs matching non-empty a and b");
  }
  for (double a : curvature_) {
    if (!(a >= 0) || !std::isfinite(a)) {
      throw ConfigError("quadratic curvature must be finite and >= 0");
    }
  }
  if (!(noise_std_ >= 0)) throw ConfigError("noise_std must be >= 0");
}

QuadraticObjective QuadraticObjective::centered(Vector optimum,
                                                double curvature,
                                                double noise_std) {
  Vector a(optimum.size(), curvature);
  Vector b(optimum.size());
  double c = 0.0;
  for (size_t k = 0; k < optimum.size(); ++k) {
    b[k] = -2.0 * curvature * optimum[k];
    c += curvature * optimum[k] * optimum[k];
  }
  return QuadraticObjective(std::move(a), std::move(b), c, noise_std);
}

double QuadraticObjective::loss(std::span<const double> params) const {
  check_dim(params, dim());
  double s = constant_;
  for (size_t k = 0; k < curvature_.size(); ++k) {
    s += curvature_[k] * params[k] * params[k] + linear_[k] * params[k];
  }
  return s;
}

Vector QuadraticObjective::gradient(std::span<const double> params) const {
  check_dim(params, dim());
  Vector g(curvature_.size());
  for (size_t k = 0; k < g.size(); ++k) {
    g[k] = 2.0 * curvature_[k] * params[k] + linear_[k];
  }
  return g;
}

Vector QuadraticObjective::stochastic_gradient(std::span<const double> params,
                                               GradientStream& stream) const {
  Vector g = gradient(params);
  if (noise_std_ > 0) {
    std::normal_distribution<double> noise(0.0, noise_std_);
    for (double& v : g) v += noise(stream.rng);
  }
  return g;
}

Vector QuadraticObjective::optimum() const {
  Vector x(curvature_.size());
  for (size_t k = 0; k < x.size(); ++k) {
    if (curvature_[k] == 0.0) {
      throw ConfigError("quadratic with zero curvature has no finite optimum");
    }
    x[k] = -linear_[k] / (2.0 * curvature_[k]);
  }
  return x;
}

GlmObjective::GlmObjective(Vector features, int rows, int cols,
                           Vector targets, Link link, double l2)
    : features_(std::move(features)),
      rows_(rows),
      cols_(cols),
      targets_(std::move(targets)),
      link_(link),
      l2_(l2) {
  if (rows_ < 1 || cols_ < 1) throw ConfigError("empty design matrix");
  if (features_.size() != static_cast<size_t>(rows_) * cols_ ||
      targets_.size() != static_cast<size_t>(rows_)) {
    throw ConfigError("design matrix / target size mismatch");
  }
  if (!(l2_ >= 0)) throw ConfigError("l2 must be >= 0");
}

double GlmObjective::margin(std::span<const double> params, int row) const {
  const double* x = features_.data() + static_cast<size_t>(row) * cols_;
  double z = 0.0;
  for (int k = 0; k < cols_; ++k) z += x[k] * params[k];
  return z;
}

double GlmObjective::loss(std::span<const double> params) const {
  check_dim(params, cols_);
  double s = 0.0;
  for (int r = 0; r < rows_; ++r) {
    double z = margin(params, r);
    if (link_ == Link::kLogistic) {
      s += softplus(z) - targets_[r] * z;
    } else {
      double e = z - targets_[r];
      s += 0.5 * e * e;
    }
  }
  double reg = 0.0;
  for (double v : params) reg += v * v;
  return s / rows_ + 0.5 * l2_ * reg;
}

Vector GlmObjective::batch_gradient(std::span<const double> params,
                                    std::span<const int> indices) const {
  check_dim(params, cols_);
  if (indices.empty()) throw ConfigError("empty batch");
  Vector g(cols_, 0.0);
  for (int r : indices) {
    if (r < 0 || r >= rows_) throw ConfigError("batch index out of range");
    double z = margin(params, r);
    double resid = link_ == Link::kLogistic ? sigmoid(z) - targets_[r]
                                            : z - targets_[r];
    const double* x = features_.data() + static_cast<size_t>(r) * cols_;
    for (int k = 0; k < cols_; ++k) g[k] += resid * x[k];
  }
  double inv = 1.0 / static_cast<double>(indices.size());
  for (int k = 0; k < cols_; ++k) g[k] = g[k] * inv + l2_ * params[k];
  return g;
}

Vector GlmObjective::gradient(std::span<const double> params) const {
  std::vector<int> all(rows_);
  std::iota(all.begin(), all.end(), 0);
  return batch_gradient(params, all);
}

Vector GlmObjective::stochastic_gradient(std::span<const double> params,
                                         GradientStream& stream) const {
  if (exact_gradients(stream)) return gradient(params);
  const size_t b = static_cast<size_t>(stream.batch_size);
  if (stream.order.size() != static_cast<size_t>(rows_)) {
    stream.order.resize(rows_);
    std::iota(stream.order.begin(), stream.order.end(), 0);
    stream.cursor = stream.order.size();
  }
  // Without replacement inside an epoch; reshuffle when the remainder
  // cannot fill a batch.
  if (stream.cursor + b > stream.order.size()) {
    std::shuffle(stream.order.begin(), stream.order.end(), stream.rng);
    stream.cursor = 0;
  }
  std::span<const int> batch(stream.order.data() + stream.cursor, b);
  stream.cursor += b;
  return batch_gradient(params, batch);
}

LocalWork local_sgd(std::span<const double> start, const Objective& objective,
                    int steps, double lr, GradientStream& stream,
                    bool keep_path) {
  if (steps < 1) throw ConfigError("local steps K must be >= 1");
  if (!(lr >= 0) || !std::isfinite(lr)) {
    throw ConfigError("local learning rate must be finite and >= 0");
  }
  check_dim(start, objective.dim());
  LocalWork out;
  out.end.assign(start.begin(), start.end());
  const size_t d = out.end.size();
  if (keep_path) out.path.emplace_back(d, 0.0);
  for (int k = 0; k < steps; ++k) {
    Vector g = objective.stochastic_gradient(out.end, stream);
    for (size_t j = 0; j < d; ++j) {
      out.end[j] -= lr * g[j];
      if (!std::isfinite(out.end[j])) {
        throw NumericOverflowError(
            "local SGD iterate became non-finite at step " +
                std::to_string(k + 1),
            k + 1);
      }
    }
    if (keep_path) {
      Vector diff(d);
      for (size_t j = 0; j < d; ++j) diff[j] = out.end[j] - start[j];
      out.path.push_back(std::move(diff));
    }
  }
  out.delta.resize(d);
  for (size_t j = 0; j < d; ++j) out.delta[j] = out.end[j] - start[j];
  return out;
}

SyntheticFleetData make_synthetic_shards(const SyntheticShardConfig& cfg) {
  if (cfg.num_clients < 1 || cfg.dim < 1 || cfg.samples_per_client < 1) {
    throw ConfigError("synthetic shards need M, d, samples >= 1");
  }
  if (!(cfg.concentration > 0) || !std::isfinite(cfg.concentration)) {
    throw ConfigError("Dirichlet concentration must be > 0");
  }
  Rng rng(derive_seed(cfg.seed, 0x5eed));
  std::normal_distribution<double> normal(0.0, 1.0);
  const int d = cfg.dim;
  // The last column is a constant bias; the class-mean direction lives in
  // the remaining ones.
  const int informative = std::max(d - 1, 1);
  Vector direction(informative);
  double norm = 0.0;
  for (double& v : direction) {
    v = normal(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : direction) v /= norm > 0 ? norm : 1.0;
  Vector w_true(d);
  for (double& v : w_true) v = normal(rng);

  SyntheticFleetData out;
  std::gamma_distribution<double> gamma(cfg.concentration, 1.0);
  for (int i = 0; i < cfg.num_clients; ++i) {
    Rng local(derive_seed(cfg.seed, 1000 + static_cast<uint64_t>(i)));
    double g1 = 0, g2 = 0;
    while (g1 + g2 == 0.0) {
      g1 = gamma(local);
      g2 = gamma(local);
    }
    double mix = g1 / (g1 + g2);
    std::bernoulli_distribution label(mix);
    const int n = cfg.samples_per_client;
    Vector x(static_cast<size_t>(n) * d);
    Vector y(n);
    for (int r = 0; r < n; ++r) {
      double* row = x.data() + static_cast<size_t>(r) * d;
      if (cfg.link == Link::kLogistic) {
        double cls = label(local) ? 1.0 : 0.0;
        double sign = 2.0 * cls - 1.0;
        for (int k = 0; k < informative && k < d; ++k) {
          row[k] = sign * direction[k] + normal(local);
        }
        y[r] = cls;
      } else {
        // Covariate shift driven by the same Dirichlet mix.
        double shift = 2.0 * mix - 1.0;
        for (int k = 0; k < informative && k < d; ++k) {
          row[k] = shift * 2.0 * direction[k] + normal(local);
        }
      }
      if (d > 1) row[d - 1] = 1.0;
      if (cfg.link == Link::kLinear) {
        double z = 0.0;
        for (int k = 0; k < d; ++k) z += row[k] * w_true[k];
        y[r] = z + 0.1 * normal(local);
      }
    }
    out.shards.push_back(std::make_shared<GlmObjective>(
        std::move(x), n, d, std::move(y), cfg.link, cfg.l2));
    out.distribution_ids.push_back(i);
    out.label_mix.push_back(mix);
  }
  return out;
}

void write_shard_csv(const std::string& path, const GlmObjective& shard) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot open " + tmp + " for writing");
    for (int k = 0; k < shard.dim(); ++k) os << 'x' << k << ',';
    os << "y\n";
    char buf[32];
    const Vector& x = shard.features();
    for (int r = 0; r < shard.num_samples(); ++r) {
      for (int k = 0; k < shard.dim(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g",
                      x[static_cast<size_t>(r) * shard.dim() + k]);
        os << buf << ',';
      }
      std::snprintf(buf, sizeof(buf), "%.17g", shard.targets()[r]);
      os << buf << '\n';
    }
    if (!os) throw ConfigError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw ConfigError("cannot rename " + tmp + " to " + path);
  }
}

}  // namespace asyncfl
