// Copyright 2026 The Anytime EENN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// A desk-scale early-exit MLP: M tanh trunk blocks, each followed by a
// linear exit head. Exit m reads the output of block m, so its forward
// pass touches blocks 1..m only and parameters nest by construction.
//
// Training uses plain mini-batch SGD with momentum and hand-written
// backpropagation for two objectives:
//   - the weighted sum over exits of softmax NLL, and
//   - the NLL of the softplus Product-Anytime likelihood at every exit.

#ifndef ANYTIME_TOY_EENN_HPP
#define ANYTIME_TOY_EENN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "anytime/activations.hpp"
#include "anytime/detail/util.hpp"
#include "anytime/error.hpp"
#include "anytime/logit_store.hpp"

namespace anytime {

struct ClassificationData {
  std::size_t dim = 0;
  std::vector<double> x; // [sample][dim]
  std::vector<std::int32_t> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> input(std::size_t n) const { return {x.data() + n * dim, dim}; }
};

struct RegressionData {
  std::vector<double> x;
  std::vector<double> y;
  std::size_t size() const { return y.size(); }
};

/// Interleaved spiral arms. Arm c has angle 2*pi*c/K + t*arc and radius t,
/// t ~ U[0.1, 1]; coordinates get N(0, noise^2) jitter. The default arc of
/// 3*pi (one and a half turns) leaves the first exit clearly weaker than the
/// last at width 16.
inline constexpr double kDefaultSpiralArc = 3.0 * 3.14159265358979323846;

inline ClassificationData generate_spirals(std::size_t n_per_class, std::size_t n_classes, double noise,
                                           std::uint64_t seed, double arc = kDefaultSpiralArc) {
  if (n_classes < 2) {
    throw ConfigError("spirals need at least two classes");
  }
  constexpr double two_pi = 2.0 * 3.14159265358979323846;
  ClassificationData data;
  data.dim = 2;
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const double t = 0.1 + 0.9 * detail::unit_uniform(rng);
      const double angle = two_pi * static_cast<double>(c) / static_cast<double>(n_classes) + t * arc;
      const double nx = detail::standard_normal(rng);
      const double ny = detail::standard_normal(rng);
      data.x.push_back(t * std::cos(angle) + noise * nx);
      data.x.push_back(t * std::sin(angle) + noise * ny);
      data.y.push_back(static_cast<std::int32_t>(c));
    }
  }
  return data;
}

struct Simple1dLayout {
  double left_lo = -1.5, left_hi = -0.5;
  double right_lo = 0.5, right_hi = 1.5;
  double noise = 0.1;
};

/// Two disjoint input clusters with an empty gap between them;
/// y = sin(3x) + noise.
inline RegressionData generate_simple1d(std::size_t n, std::uint64_t seed, const Simple1dLayout &layout = {}) {
  if (n < 1) {
    throw ConfigError("simple1d needs n >= 1");
  }
  RegressionData data;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const bool left = detail::unit_uniform(rng) < 0.5;
    const double lo = left ? layout.left_lo : layout.right_lo;
    const double hi = left ? layout.left_hi : layout.right_hi;
    const double x = lo + (hi - lo) * detail::unit_uniform(rng);
    data.x.push_back(x);
    data.y.push_back(std::sin(3.0 * x) + layout.noise * detail::standard_normal(rng));
  }
  return data;
}

/// Offsets of one dense layer (out x in weights, row-major, then out biases)
/// inside a flat parameter vector.
struct LayerShape {
  std::size_t out = 0;
  std::size_t in = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  std::size_t end() const { return bias_offset + out; }
  friend bool operator==(const LayerShape &, const LayerShape &) = default;
};

class ToyEENN {
public:
  ToyEENN() = default;

  /// Uniform(-s, s) initialization with s = 1/sqrt(fan_in).
  ToyEENN(std::size_t input_dim, std::size_t width, std::size_t n_exits, std::size_t n_classes,
          std::uint64_t seed)
      : input_dim_(input_dim), width_(width), n_exits_(n_exits), n_classes_(n_classes) {
    if (input_dim == 0 || width == 0 || n_exits == 0 || n_classes < 2) {
      throw ConfigError("toy EENN needs positive sizes and K >= 2");
    }
    layout();
    std::mt19937_64 rng(seed);
    auto fill = [&](const LayerShape &l) {
      const double s = 1.0 / std::sqrt(static_cast<double>(l.in));
      for (std::size_t i = l.weight_offset; i < l.end(); ++i) {
        params_[i] = s * (2.0 * detail::unit_uniform(rng) - 1.0);
      }
    };
    for (std::size_t m = 0; m < n_exits_; ++m) {
      fill(blocks_[m]);
      fill(heads_[m]);
    }
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t width() const { return width_; }
  std::size_t n_exits() const { return n_exits_; }
  std::size_t n_classes() const { return n_classes_; }
  const LayerShape &block(std::size_t m) const { return blocks_[m]; }
  const LayerShape &head(std::size_t m) const { return heads_[m]; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::span<double> weights(const LayerShape &l) { return {params_.data() + l.weight_offset, l.out * l.in}; }
  std::span<double> biases(const LayerShape &l) { return {params_.data() + l.bias_offset, l.out}; }

  bool finite() const {
    return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const ToyEENN &, const ToyEENN &) = default;

private:
  friend ToyEENN load_model(const std::filesystem::path &);

  void layout() {
    std::size_t offset = 0;
    auto add = [&](std::size_t out, std::size_t in) {
      LayerShape l{out, in, offset, offset + out * in};
      offset = l.end();
      return l;
    };
    blocks_.clear();
    heads_.clear();
    for (std::size_t m = 0; m < n_exits_; ++m) {
      blocks_.push_back(add(width_, m == 0 ? input_dim_ : width_));
    }
    for (std::size_t m = 0; m < n_exits_; ++m) {
      heads_.push_back(add(n_classes_, width_));
    }
    params_.assign(offset, 0.0);
  }

  std::size_t input_dim_ = 0, width_ = 0, n_exits_ = 0, n_classes_ = 0;
  std::vector<LayerShape> blocks_, heads_;
  std::vector<double> params_;
};

namespace detail {

// out = W in + b
inline void dense_forward(std::span<const double> params, const LayerShape &l, std::span<const double> in,
                          std::span<double> out) {
  for (std::size_t r = 0; r < l.out; ++r) {
    double acc = params[l.bias_offset + r];
    const double *w = params.data() + l.weight_offset + r * l.in;
    for (std::size_t c = 0; c < l.in; ++c) {
      acc += w[c] * in[c];
    }
    out[r] = acc;
  }
}

// grad_params += d_out (x) in; grad_in = W^T d_out (if non-empty)
inline void dense_backward(std::span<const double> params, const LayerShape &l, std::span<const double> in,
                           std::span<const double> d_out, std::span<double> grad_params,
                           std::span<double> grad_in) {
  for (std::size_t r = 0; r < l.out; ++r) {
    grad_params[l.bias_offset + r] += d_out[r];
    double *gw = grad_params.data() + l.weight_offset + r * l.in;
    for (std::size_t c = 0; c < l.in; ++c) {
      gw[c] += d_out[r] * in[c];
    }
  }
  if (!grad_in.empty()) {
    std::fill(grad_in.begin(), grad_in.end(), 0.0);
    for (std::size_t r = 0; r < l.out; ++r) {
      const double *w = params.data() + l.weight_offset + r * l.in;
      for (std::size_t c = 0; c < l.in; ++c) {
        grad_in[c] += w[c] * d_out[r];
      }
    }
  }
}

struct ForwardCache {
  std::vector<std::vector<double>> hidden; // post-tanh output of each block
  std::vector<std::vector<double>> logits; // per exit
};

inline ForwardCache forward_cached(const ToyEENN &model, std::span<const double> x, std::size_t n_exits) {
  ForwardCache cache;
  std::span<const double> in = x;
  for (std::size_t m = 0; m < n_exits; ++m) {
    std::vector<double> h(model.width());
    dense_forward(model.params(), model.block(m), in, h);
    for (double &v : h) {
      v = std::tanh(v);
    }
    cache.hidden.push_back(std::move(h));
    std::vector<double> f(model.n_classes());
    dense_forward(model.params(), model.head(m), cache.hidden.back(), f);
    cache.logits.push_back(std::move(f));
    in = cache.hidden.back();
  }
  return cache;
}

inline void backward(const ToyEENN &model, std::span<const double> x, const ForwardCache &cache,
                     const std::vector<std::vector<double>> &d_logits, std::span<double> grad) {
  const std::size_t M = cache.hidden.size();
  const std::size_t W = model.width();
  std::vector<double> d_hidden(W, 0.0), d_pre(W), from_head(W), d_prev(W);
  for (std::size_t m = M; m-- > 0;) {
    dense_backward(model.params(), model.head(m), cache.hidden[m], d_logits[m], grad, from_head);
    for (std::size_t j = 0; j < W; ++j) {
      d_hidden[j] += from_head[j];
      const double h = cache.hidden[m][j];
      d_pre[j] = d_hidden[j] * (1.0 - h * h);
    }
    std::span<const double> in = m == 0 ? x : std::span<const double>(cache.hidden[m - 1]);
    dense_backward(model.params(), model.block(m), in, d_pre, grad,
                   m == 0 ? std::span<double>() : std::span<double>(d_prev));
    if (m > 0) {
      d_hidden = d_prev;
    }
  }
}

// d log softplus(x) / dx = sigmoid(x) / softplus(x)
inline double dlog_softplus(double x) {
  return x < -30.0 ? 1.0 : sigmoid(x) / softplus(x);
}

} // namespace detail

/// Logits f_1(x) .. f_M(x).
inline std::vector<std::vector<double>> forward_all_exits(const ToyEENN &model, std::span<const double> x) {
  if (x.size() != model.input_dim()) {
    throw ConfigError("input dimension " + std::to_string(x.size()) + " does not match model input " +
                      std::to_string(model.input_dim()));
  }
  return detail::forward_cached(model, x, model.n_exits()).logits;
}

/// Logits of a single exit; evaluates blocks 1..exit only.
inline std::vector<double> forward_exit(const ToyEENN &model, std::span<const double> x, std::size_t exit) {
  if (x.size() != model.input_dim()) {
    throw ConfigError("input dimension mismatch");
  }
  return detail::forward_cached(model, x, exit + 1).logits.back();
}

enum class Objective { standard_nll, pa_finetune };

struct TrainConfig {
  std::size_t epochs = 300;
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  std::vector<double> exit_loss_weights; // empty = all ones
  Objective objective = Objective::standard_nll;
  double finetune_fraction = 1.0 / 3.0;
  double finetune_lr_scale = 0.1;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate(std::size_t n_exits) const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(finetune_fraction > 0.0 && finetune_fraction < 1.0)) {
      throw ConfigError("finetune fraction must lie in (0, 1)");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!exit_loss_weights.empty()) {
      if (exit_loss_weights.size() != n_exits) throw ConfigError("one exit loss weight per exit required");
      for (double w : exit_loss_weights) {
        if (!(w >= 0.0)) throw ConfigError("exit loss weights must be >= 0");
      }
    }
  }

  std::vector<double> resolved_weights(std::size_t n_exits) const {
    return exit_loss_weights.empty() ? std::vector<double>(n_exits, 1.0) : exit_loss_weights;
  }
  std::size_t finetune_epochs() const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(finetune_fraction * static_cast<double>(epochs))));
  }
};

/// -sum_m w_m log softmax(f_m)_y for one sample; accumulates the parameter
/// gradient into `grad` when it is non-empty.
inline double standard_loss(const ToyEENN &model, std::span<const double> x, std::int32_t y,
                            std::span<const double> exit_weights, std::span<double> grad = {}) {
  const auto cache = detail::forward_cached(model, x, model.n_exits());
  const std::size_t K = model.n_classes();
  double loss = 0.0;
  std::vector<std::vector<double>> d_logits(model.n_exits(), std::vector<double>(K));
  std::vector<double> p(K);
  for (std::size_t m = 0; m < model.n_exits(); ++m) {
    detail::softmax(cache.logits[m], p);
    const auto &f = cache.logits[m];
    const double peak = *std::max_element(f.begin(), f.end());
    double lse = 0.0;
    for (double v : f) lse += std::exp(v - peak);
    lse = peak + std::log(lse);
    loss += exit_weights[m] * (lse - f[static_cast<std::size_t>(y)]);
    for (std::size_t k = 0; k < K; ++k) {
      d_logits[m][k] = exit_weights[m] * (p[k] - (k == static_cast<std::size_t>(y) ? 1.0 : 0.0));
    }
  }
  if (!grad.empty()) {
    detail::backward(model, x, cache, d_logits, grad);
  }
  return loss;
}

/// -sum_m log p_PA,m(y | x) with softplus experts and product weights w.
inline double pa_loss(const ToyEENN &model, std::span<const double> x, std::int32_t y,
                      std::span<const double> product_weights, std::span<double> grad = {}) {
  const auto cache = detail::forward_cached(model, x, model.n_exits());
  const std::size_t K = model.n_classes();
  const std::size_t M = model.n_exits();
  const auto label = static_cast<std::size_t>(y);
  std::vector<double> acc(K, 0.0), q(K);
  // residual[i][k] = sum_{m >= i} ([k == y] - q_m[k])
  std::vector<std::vector<double>> residual(M, std::vector<double>(K, 0.0));
  std::vector<std::vector<double>> per_exit(M, std::vector<double>(K, 0.0));
  double loss = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t k = 0; k < K; ++k) {
      const double s = softplus(cache.logits[m][k]);
      if (!(s > 0.0)) {
        throw DataError("softplus product degenerated to zero mass");
      }
      acc[k] += product_weights[m] * (cache.logits[m][k] < -30.0 ? cache.logits[m][k] : std::log(s));
    }
    const double peak = *std::max_element(acc.begin(), acc.end());
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      q[k] = std::exp(acc[k] - peak);
      total += q[k];
    }
    loss += peak + std::log(total) - acc[label];
    for (std::size_t k = 0; k < K; ++k) {
      per_exit[m][k] = (k == label ? 1.0 : 0.0) - q[k] / total;
    }
  }
  if (grad.empty()) {
    return loss;
  }
  for (std::size_t i = M; i-- > 0;) {
    for (std::size_t k = 0; k < K; ++k) {
      residual[i][k] = per_exit[i][k] + (i + 1 < M ? residual[i + 1][k] : 0.0);
    }
  }
  std::vector<std::vector<double>> d_logits(M, std::vector<double>(K));
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      d_logits[i][k] = -product_weights[i] * detail::dlog_softplus(cache.logits[i][k]) * residual[i][k];
    }
  }
  detail::backward(model, x, cache, d_logits, grad);
  return loss;
}

/// Mean per-sample loss of an objective over a data set.
inline double dataset_loss(const ToyEENN &model, const ClassificationData &data, Objective objective,
                           std::span<const double> weights) {
  double total = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    total += objective == Objective::standard_nll ? standard_loss(model, data.input(n), data.y[n], weights)
                                                  : pa_loss(model, data.input(n), data.y[n], weights);
  }
  return data.size() ? total / static_cast<double>(data.size()) : 0.0;
}

struct TrainResult {
  ToyEENN model;
  std::vector<double> loss_curve; // [0] before training, then one per epoch
};

namespace detail {

inline void run_sgd(ToyEENN &model, const ClassificationData &data, Objective objective,
                    std::span<const double> weights, std::size_t epochs, double lr, std::size_t batch_size,
                    double momentum, std::uint64_t seed, std::vector<double> &curve, std::size_t epoch_base) {
  std::vector<double> velocity(model.params().size(), 0.0), grad(model.params().size());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[uniform_index(rng, i)]);
    }
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const auto n = order[b];
        if (objective == Objective::standard_nll) {
          standard_loss(model, data.input(n), data.y[n], weights, grad);
        } else {
          pa_loss(model, data.input(n), data.y[n], weights, grad);
        }
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      auto params = model.params();
      for (std::size_t j = 0; j < params.size(); ++j) {
        velocity[j] = momentum * velocity[j] - lr * grad[j] * scale;
        params[j] += velocity[j];
      }
    }
    const double loss = dataset_loss(model, data, objective, weights);
    if (!std::isfinite(loss) || !model.finite()) {
      throw DivergenceError(static_cast<int>(epoch_base + epoch + 1),
                            "training diverged at epoch " + std::to_string(epoch_base + epoch + 1));
    }
    curve.push_back(loss);
  }
}

} // namespace detail

/// Minimizes the weighted multi-exit softmax NLL. Deterministic given
/// cfg.seed.
inline TrainResult train_standard(ToyEENN model, const ClassificationData &data, const TrainConfig &cfg,
                                  std::size_t epochs_override = 0) {
  cfg.validate(model.n_exits());
  if (data.dim != model.input_dim()) throw ConfigError("data dimension does not match the model");
  const auto weights = cfg.resolved_weights(model.n_exits());
  TrainResult res;
  res.loss_curve.push_back(dataset_loss(model, data, Objective::standard_nll, weights));
  detail::run_sgd(model, data, Objective::standard_nll, weights, epochs_override ? epochs_override : cfg.epochs,
                  cfg.learning_rate, cfg.batch_size, cfg.momentum, cfg.seed, res.loss_curve, 0);
  res.model = std::move(model);
  return res;
}

/// Continues training on the softplus Product-Anytime NLL with unit product
/// weights for cfg.finetune_epochs() epochs at learning_rate *
/// finetune_lr_scale. The curve starts with the loss at the switchover.
inline TrainResult finetune_pa(ToyEENN model, const ClassificationData &data, const TrainConfig &cfg) {
  cfg.validate(model.n_exits());
  if (data.dim != model.input_dim()) throw ConfigError("data dimension does not match the model");
  const std::vector<double> unit(model.n_exits(), 1.0);
  TrainResult res;
  res.loss_curve.push_back(dataset_loss(model, data, Objective::pa_finetune, unit));
  detail::run_sgd(model, data, Objective::pa_finetune, unit, cfg.finetune_epochs(),
                  cfg.learning_rate * cfg.finetune_lr_scale, cfg.batch_size, cfg.momentum, cfg.seed + 1,
                  res.loss_curve, cfg.epochs - cfg.finetune_epochs());
  res.model = std::move(model);
  return res;
}

/// Runs cfg.objective: plain training, or standard training for the first
/// (1 - finetune_fraction) of epochs followed by PA finetuning.
inline TrainResult train(ToyEENN model, const ClassificationData &data, const TrainConfig &cfg) {
  if (cfg.objective == Objective::standard_nll) {
    return train_standard(std::move(model), data, cfg);
  }
  cfg.validate(model.n_exits());
  const std::size_t standard_epochs = cfg.epochs > cfg.finetune_epochs() ? cfg.epochs - cfg.finetune_epochs() : 1;
  auto first = train_standard(std::move(model), data, cfg, standard_epochs);
  auto second = finetune_pa(std::move(first.model), data, cfg);
  first.loss_curve.insert(first.loss_curve.end(), second.loss_curve.begin() + 1, second.loss_curve.end());
  return {std::move(second.model), std::move(first.loss_curve)};
}

/// Per-exit logits of every sample as an AEXL dataset (labels carried over).
inline LogitDataset export_logits(const ToyEENN &model, const ClassificationData &data, unsigned threads = 1) {
  LogitDataset ds(data.size(), model.n_exits(), model.n_classes());
  detail::parallel_for(data.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      const auto logits = forward_all_exits(model, data.input(n));
      for (std::size_t m = 0; m < model.n_exits(); ++m) {
        // stored as f32 on disk; round here so in-memory and reloaded data agree
        for (std::size_t k = 0; k < model.n_classes(); ++k) {
          ds.at(n, m, k) = static_cast<float>(logits[m][k]);
        }
      }
    }
  });
  ds.labels = data.y;
  return ds;
}

// AEXM: "AEXM", u32 version, u32 input_dim, width, n_exits, n_classes,
// u32 layer count, then per layer (blocks, then heads): u32 out, u32 in,
// out*in f64 weights (row-major), out f64 biases.
inline void save_model(const ToyEENN &model, const std::filesystem::path &path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os.write("AEXM", 4);
  detail::write_le<std::uint32_t>(os, 1);
  for (auto v : {model.input_dim(), model.width(), model.n_exits(), model.n_classes()}) {
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  }
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(2 * model.n_exits()));
  auto emit = [&](const LayerShape &l) {
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.out));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.in));
    for (std::size_t i = l.weight_offset; i < l.end(); ++i) {
      detail::write_le<double>(os, model.params()[i]);
    }
  };
  for (std::size_t m = 0; m < model.n_exits(); ++m) emit(model.block(m));
  for (std::size_t m = 0; m < model.n_exits(); ++m) emit(model.head(m));
  if (!os) throw DataError("I/O failure writing " + path.string());
}

inline ToyEENN load_model(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "AEXM") throw DataError("malformed header: bad AEXM magic");
  if (detail::read_le<std::uint32_t>(is, "version") != 1) throw DataError("unsupported AEXM version");
  ToyEENN model;
  model.input_dim_ = detail::read_le<std::uint32_t>(is, "input_dim");
  model.width_ = detail::read_le<std::uint32_t>(is, "width");
  model.n_exits_ = detail::read_le<std::uint32_t>(is, "n_exits");
  model.n_classes_ = detail::read_le<std::uint32_t>(is, "n_classes");
  if (detail::read_le<std::uint32_t>(is, "layer count") != 2 * model.n_exits_) {
    throw DataError("AEXM layer count does not match exit count");
  }
  model.layout();
  auto take = [&](const LayerShape &l) {
    const auto out = detail::read_le<std::uint32_t>(is, "rows");
    const auto in = detail::read_le<std::uint32_t>(is, "cols");
    if (out != l.out || in != l.in) throw DataError("AEXM layer shape mismatch");
    for (std::size_t i = l.weight_offset; i < l.end(); ++i) {
      model.params_[i] = detail::read_le<double>(is, "parameter");
    }
  };
  for (std::size_t m = 0; m < model.n_exits_; ++m) take(model.blocks_[m]);
  for (std::size_t m = 0; m < model.n_exits_; ++m) take(model.heads_[m]);
  detail::expect_eof(is);
  if (!model.finite()) throw DataError("non-finite parameter in " + path.string());
  return model;
}

} // namespace anytime

#endif // ANYTIME_TOY_EENN_HPP
