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

// Adaptive thresholds tau(f) = C * p_psi(f) for Product Anytime, where p_psi
// is a logistic regression on the three largest logits that predicts
// whether the full model is correct.

#ifndef ANYTIME_THRESHOLD_MODEL_HPP
#define ANYTIME_THRESHOLD_MODEL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "anytime/activations.hpp"
#include "anytime/detail/util.hpp"
#include "anytime/logit_store.hpp"
#include "anytime/metrics.hpp"
#include "anytime/transforms.hpp"

namespace anytime {

using TopFeatures = std::array<double, 3>;

/// The three largest entries of `f`, descending.
inline TopFeatures top3_features(std::span<const double> f) {
  if (f.size() < 3) {
    throw ConfigError("threshold model needs K >= 3");
  }
  TopFeatures top{};
  std::partial_sort_copy(f.begin(), f.end(), top.begin(), top.end(), std::greater<>());
  return top;
}

struct ThresholdModel {
  std::array<double, 3> weights{};
  double bias = 0.0;
  double scale_C = 0.0;
  bool constant = false; // fitted on single-class targets
  std::string warning;

  double probability(const TopFeatures &x) const {
    double z = bias;
    for (std::size_t j = 0; j < 3; ++j) {
      z += weights[j] * x[j];
    }
    return sigmoid(z);
  }
  double threshold(std::span<const double> f) const { return scale_C * probability(top3_features(f)); }
};

struct LogisticFitOptions {
  std::size_t max_iterations = 20000;
  double gradient_tolerance = 1e-10;
};

/// Logistic regression by full-batch gradient descent on standardized
/// features; weights are mapped back to the raw feature scale.
inline ThresholdModel fit_logistic(std::span<const TopFeatures> x, std::span<const std::uint8_t> y,
                                   const LogisticFitOptions &opts = {}) {
  if (x.size() != y.size() || x.empty()) {
    throw ConfigError("logistic fit needs matching, non-empty features and targets");
  }
  const std::size_t n = x.size();
  const double nd = static_cast<double>(n);
  const auto positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  ThresholdModel model;
  if (positives == 0 || positives == n) {
    constexpr double eps = 1e-6;
    model.constant = true;
    model.bias = positives == n ? std::log((1.0 - eps) / eps) : std::log(eps / (1.0 - eps));
    model.warning = "correctness targets are all " + std::string(positives == n ? "1" : "0") +
                    "; using a constant-probability threshold model";
    return model;
  }

  std::array<double, 3> mean{}, scale{};
  for (const auto &row : x) {
    for (std::size_t j = 0; j < 3; ++j) mean[j] += row[j] / nd;
  }
  for (const auto &row : x) {
    for (std::size_t j = 0; j < 3; ++j) scale[j] += (row[j] - mean[j]) * (row[j] - mean[j]) / nd;
  }
  for (auto &s : scale) {
    s = s > 0.0 ? std::sqrt(s) : 1.0;
  }
  std::vector<std::array<double, 4>> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = {1.0, (x[i][0] - mean[0]) / scale[0], (x[i][1] - mean[1]) / scale[1], (x[i][2] - mean[2]) / scale[2]};
  }

  // Lipschitz constant of the mean NLL gradient: 0.25 * lambda_max(Z'Z / n),
  // by power iteration.
  std::array<double, 4> v{1.0, 1.0, 1.0, 1.0};
  double lambda = 1.0;
  for (int it = 0; it < 100; ++it) {
    std::array<double, 4> next{};
    for (const auto &row : z) {
      double dot = 0.0;
      for (std::size_t j = 0; j < 4; ++j) dot += row[j] * v[j];
      for (std::size_t j = 0; j < 4; ++j) next[j] += row[j] * dot / nd;
    }
    double norm = 0.0;
    for (double c : next) norm += c * c;
    norm = std::sqrt(norm);
    lambda = norm;
    for (std::size_t j = 0; j < 4; ++j) v[j] = next[j] / norm;
  }
  const double step = 1.0 / (0.25 * lambda);

  std::array<double, 4> theta{};
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    std::array<double, 4> grad{};
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < 4; ++j) dot += theta[j] * z[i][j];
      const double r = sigmoid(dot) - (y[i] ? 1.0 : 0.0);
      for (std::size_t j = 0; j < 4; ++j) grad[j] += r * z[i][j] / nd;
    }
    double gmax = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      gmax = std::max(gmax, std::abs(grad[j]));
      theta[j] -= step * grad[j];
    }
    if (gmax < opts.gradient_tolerance) {
      break;
    }
  }
  model.bias = theta[0];
  for (std::size_t j = 0; j < 3; ++j) {
    model.weights[j] = theta[j + 1] / scale[j];
    model.bias -= theta[j + 1] * mean[j] / scale[j];
  }
  return model;
}

/// Member likelihood max(f_y, tau) / sum max(f_y', tau), product-combined
/// across exits with `weights`. The threshold model fitted at the first exit
/// is reused at every exit.
inline ProbTrajectory adaptive_threshold_transform(const LogitDataset &ds, const ThresholdModel &model,
                                                   const ExitWeights &weights,
                                                   Fallback fallback = Fallback::softmax,
                                                   unsigned threads = 1) {
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  return detail::product_combine(ds, weights, fallback, threads,
                                 [&](std::size_t, std::size_t, std::span<const double> f, std::span<double> out) {
                                   const double tau = model.threshold(f);
                                   for (std::size_t k = 0; k < f.size(); ++k) {
                                     const double s = std::max(f[k], tau);
                                     out[k] = s > 0.0 ? std::log(s) : neg_inf;
                                   }
                                 });
}

/// Final-exit argmax per sample.
inline std::vector<std::int32_t> full_model_predictions(const LogitDataset &ds) {
  std::vector<std::int32_t> out(ds.n_samples);
  for (std::size_t n = 0; n < ds.n_samples; ++n) {
    out[n] = static_cast<std::int32_t>(detail::argmax(ds.row(n, ds.n_exits - 1)));
  }
  return out;
}

/// How scale_C is picked from the grid: minimize mean-over-exits ECE among
/// candidates whose N_{mpd_threshold} is at most `max_ratio` times the
/// static (tau = 0, relu) PA count. If none qualifies, the candidate with the
/// smallest count wins (ECE breaks ties).
struct ScaleSelection {
  double mpd_threshold = 0.1;
  double max_ratio = 2.0;
  std::size_t ece_bins = 15;
};

struct ScaleCandidate {
  double scale_C = 0.0;
  double mean_ece = 0.0;
  std::size_t n_exceeding = 0;
  bool feasible = false;
};

struct ThresholdFit {
  ThresholdModel model;
  std::size_t static_n_exceeding = 0;
  std::vector<ScaleCandidate> candidates;
};

namespace detail {

inline std::pair<double, std::size_t> ece_and_drops(const ProbTrajectory &traj,
                                                    std::span<const std::int32_t> labels,
                                                    const ScaleSelection &sel) {
  const auto q = quality(traj, labels);
  const auto conf = max_confidence(traj);
  double ece_sum = 0.0;
  for (std::size_t m = 0; m < traj.n_exits; ++m) {
    const auto c = exit_column<double>(conf, traj.n_exits, m);
    const auto ok = exit_column<std::uint8_t>(q.correct.values, traj.n_exits, m);
    ece_sum += ece(c, ok, sel.ece_bins);
  }
  const auto drops = per_sample(q.gt_prob, traj.n_exits, [](auto s) { return mpd_star(s); });
  const double tau[] = {sel.mpd_threshold};
  return {ece_sum / static_cast<double>(traj.n_exits), count_exceeding(drops, tau)[0]};
}

} // namespace detail

/// Fits p_psi on exit-1 logits of a labeled validation set against the
/// targets [full_model_pred == label], then selects scale_C from `c_grid`.
inline ThresholdFit fit_threshold_model(const LogitDataset &validation,
                                        std::span<const std::int32_t> full_model_preds,
                                        std::span<const std::int32_t> labels,
                                        std::span<const double> c_grid, const ExitWeights &weights,
                                        const ScaleSelection &selection = {},
                                        const LogisticFitOptions &opts = {}) {
  if (validation.n_classes < 3) {
    throw ConfigError("threshold model needs K >= 3");
  }
  if (full_model_preds.size() != validation.n_samples || labels.size() != validation.n_samples) {
    throw ConfigError("prediction/label counts must equal the validation sample count");
  }
  if (c_grid.empty()) {
    throw ConfigError("scale grid must not be empty");
  }
  std::vector<TopFeatures> x(validation.n_samples);
  std::vector<std::uint8_t> y(validation.n_samples);
  for (std::size_t n = 0; n < validation.n_samples; ++n) {
    x[n] = top3_features(validation.row(n, 0));
    y[n] = full_model_preds[n] == labels[n] ? 1 : 0;
  }
  ThresholdFit fit;
  fit.model = fit_logistic(x, y, opts);

  const auto static_pa = product_anytime(validation, weights, ActivationSpec{ActivationKind::relu, 0.0, std::nullopt});
  fit.static_n_exceeding = detail::ece_and_drops(static_pa, labels, selection).second;
  const double budget = selection.max_ratio * static_cast<double>(fit.static_n_exceeding);

  for (double c : c_grid) {
    if (!(c >= 0.0)) {
      throw ConfigError("scale grid values must be >= 0");
    }
    ThresholdModel candidate = fit.model;
    candidate.scale_C = c;
    const auto [mean_ece, drops] =
        detail::ece_and_drops(adaptive_threshold_transform(validation, candidate, weights), labels, selection);
    fit.candidates.push_back({c, mean_ece, drops, static_cast<double>(drops) <= budget});
  }
  const bool any_feasible =
      std::any_of(fit.candidates.begin(), fit.candidates.end(), [](const auto &c) { return c.feasible; });
  const ScaleCandidate *best = nullptr;
  for (const auto &c : fit.candidates) {
    if (any_feasible) {
      if (c.feasible && (!best || c.mean_ece < best->mean_ece)) best = &c;
    } else if (!best || c.n_exceeding < best->n_exceeding ||
               (c.n_exceeding == best->n_exceeding && c.mean_ece < best->mean_ece)) {
      best = &c;
    }
  }
  fit.model.scale_C = best->scale_C;
  return fit;
}

} // namespace anytime

#endif // ANYTIME_THRESHOLD_MODEL_HPP
