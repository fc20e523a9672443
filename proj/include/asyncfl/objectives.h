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

// Client loss functions, stochastic gradients and the K-step local SGD
// executor.

#ifndef ASYNCFL_OBJECTIVES_H_
#define ASYNCFL_OBJECTIVES_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "asyncfl/rng.h"

namespace asyncfl {

using Vector = std::vector<double>;

// Per-client source of randomness for stochastic gradients. Owns the batch
// permutation so that objectives themselves stay immutable.
struct GradientStream {
  explicit GradientStream(uint64_t seed, int batch = 0)
      : rng(seed), batch_size(batch) {}

  Rng rng;
  // Samples per minibatch; 0 (or >= the shard size) means full batch.
  int batch_size = 0;
  std::vector<int> order;
  size_t cursor = 0;
};

class Objective {
 public:
  virtual ~Objective() = default;

  virtual int dim() const = 0;
  virtual double loss(std::span<const double> params) const = 0;
  virtual Vector gradient(std::span<const double> params) const = 0;
  // Unbiased estimate of gradient(params).
  virtual Vector stochastic_gradient(std::span<const double> params,
                                     GradientStream& stream) const = 0;
  // True when stochastic_gradient() is exactly gradient() for this stream.
  virtual bool exact_gradients(const GradientStream& stream) const = 0;
};

// L(theta) = sum_k a_k theta_k^2 + b_k theta_k + c, with optional additive
// Gaussian gradient noise of standard deviation noise_std per coordinate.
class QuadraticObjective : public Objective {
 public:
  QuadraticObjective(Vector curvature, Vector linear, double constant,
                     double noise_std = 0.0);

  // a * ||theta - optimum||^2. With the default a = 1/2 the gradient is
  // theta - optimum.
  static QuadraticObjective centered(Vector optimum, double curvature = 0.5,
                                     double noise_std = 0.0);

  int dim() const override { return static_cast<int>(curvature_.size()); }
  double loss(std::span<const double> params) const override;
  Vector gradient(std::span<const double> params) const override;
  Vector stochastic_gradient(std::span<const double> params,
                             GradientStream& stream) const override;
  bool exact_gradients(const GradientStream&) const override {
    return noise_std_ == 0.0;
  }

  // -b / (2a); throws ConfigError when some a_k == 0.
  Vector optimum() const;

  const Vector& curvature() const { return curvature_; }
  const Vector& linear() const { return linear_; }
  double constant() const { return constant_; }
  double noise_std() const { return noise_std_; }

 private:
  Vector curvature_;
  Vector linear_;
  double constant_;
  double noise_std_;
};

enum class Link { kLinear, kLogistic };

// Generalized linear model on a local shard: mean over samples of the
// squared error (linear) or the logistic loss, plus (l2 / 2) ||theta||^2.
class GlmObjective : public Objective {
 public:
  // `features` is row-major with `rows` samples of `cols` features.
  GlmObjective(Vector features, int rows, int cols, Vector targets, Link link,
               double l2 = 0.0);

  int dim() const override { return cols_; }
  int num_samples() const { return rows_; }
  double loss(std::span<const double> params) const override;
  Vector gradient(std::span<const double> params) const override;
  Vector stochastic_gradient(std::span<const double> params,
                             GradientStream& stream) const override;
  bool exact_gradients(const GradientStream& stream) const override {
    return stream.batch_size <= 0 || stream.batch_size >= rows_;
  }

  // Mean gradient over the given sample indices (plus the l2 term).
  Vector batch_gradient(std::span<const double> params,
                        std::span<const int> indices) const;

  const Vector& features() const { return features_; }
  const Vector& targets() const { return targets_; }
  Link link() const { return link_; }
  double l2() const { return l2_; }

 private:
  double margin(std::span<const double> params, int row) const;

  Vector features_;
  int rows_;
  int cols_;
  Vector targets_;
  Link link_;
  double l2_;
};

struct LocalWork {
  Vector end;
  // end - start.
  Vector delta;
  // theta^{(k)} - start for k = 0..K, only when requested.
  std::vector<Vector> path;
};

// K steps of SGD with step size `lr` starting from `start`. Throws
// NumericOverflowError carrying the failing step when an iterate stops
// being finite.
LocalWork local_sgd(std::span<const double> start, const Objective& objective,
                    int steps, double lr, GradientStream& stream,
                    bool keep_path = false);

struct SyntheticShardConfig {
  int num_clients = 10;
  // Feature count including the constant bias column.
  int dim = 5;
  int samples_per_client = 64;
  // Dirichlet concentration of the per-client label mix; smaller means more
  // heterogeneous shards.
  double concentration = 0.1;
  Link link = Link::kLogistic;
  double l2 = 1e-2;
  uint64_t seed = 0;
};

struct SyntheticFleetData {
  std::vector<std::shared_ptr<const GlmObjective>> shards;
  std::vector<int> distribution_ids;
  // Per-client class-1 proportion drawn from the Dirichlet prior.
  Vector label_mix;
};

SyntheticFleetData make_synthetic_shards(const SyntheticShardConfig& cfg);

// Feature columns then the target column, header row, 17 significant digits.
void write_shard_csv(const std::string& path, const GlmObjective& shard);

}  // namespace asyncfl

#endif  // ASYNCFL_OBJECTIVES_H_
