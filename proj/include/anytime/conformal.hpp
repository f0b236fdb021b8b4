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

// Split-conformal prediction sets with regularized adaptive (RAPS) scores,
// calibrated separately at every exit.

#ifndef ANYTIME_CONFORMAL_HPP
#define ANYTIME_CONFORMAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "anytime/detail/util.hpp"
#include "anytime/error.hpp"
#include "anytime/logit_store.hpp"
#include "anytime/trajectory.hpp"

namespace anytime {

struct RapsConfig {
  double alpha = 0.1;
  double lambda_reg = 0.01;
  std::size_t k_reg = 5;
  bool randomized = false;
  // Randomized sets only. Forcing at least one class over-covers when the
  // top class alone already exceeds the quantile; empty sets give exact
  // coverage.
  bool allow_empty = false;
  std::uint64_t seed = 0; // randomized scores only

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(lambda_reg >= 0.0)) throw ConfigError("lambda_reg must be >= 0");
    if (k_reg < 1) throw ConfigError("k_reg must be >= 1");
  }
};

struct ConformalCalibration {
  std::vector<double> quantiles; // one per exit
};

namespace detail {

/// Class indices by descending probability; ties keep the lower index first.
inline std::vector<std::size_t> descending_order(std::span<const double> probs) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return probs[a] > probs[b]; });
  return order;
}

inline double rank_penalty(const RapsConfig &cfg, std::size_t rank) {
  return cfg.lambda_reg * static_cast<double>(rank > cfg.k_reg ? rank - cfg.k_reg : 0);
}

} // namespace detail

/// Cumulative probability through the label's (1-based) rank plus
/// lambda * max(0, rank - k_reg); randomized scores subtract u * p_label.
/// An all-zero row scores 1 + lambda * max(0, K - k_reg).
inline double raps_score(std::span<const double> probs, std::size_t label, const RapsConfig &cfg,
                         double u = 1.0) {
  if (label >= probs.size()) {
    throw ConfigError("raps_score: label outside [0, K)");
  }
  if (std::all_of(probs.begin(), probs.end(), [](double p) { return p == 0.0; })) {
    return 1.0 + detail::rank_penalty(cfg, probs.size());
  }
  const auto order = detail::descending_order(probs);
  double cumulative = 0.0;
  std::size_t rank = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    cumulative += probs[order[r]];
    if (order[r] == label) {
      rank = r + 1;
      break;
    }
  }
  double score = cumulative + detail::rank_penalty(cfg, rank);
  if (cfg.randomized) {
    score -= u * probs[label];
  }
  return score;
}

/// Conformal quantile: the ceil((n+1)(1-alpha))-th smallest score, clamped
/// to the largest score when that index exceeds n.
inline double conformal_quantile(std::vector<double> scores, double alpha) {
  if (scores.empty()) {
    throw ConfigError("conformal calibration needs at least one score");
  }
  std::sort(scores.begin(), scores.end());
  const double n = static_cast<double>(scores.size());
  auto index = static_cast<std::size_t>(std::ceil((n + 1.0) * (1.0 - alpha) - 1e-12));
  index = std::clamp<std::size_t>(index, 1, scores.size());
  return scores[index - 1];
}

namespace detail {

// Per-(sample, exit) uniform draws for randomized scoring, stable under
// subsetting: the draw depends only on (seed, sample, exit).
inline double raps_uniform(std::uint64_t seed, std::size_t sample, std::size_t exit) {
  std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (sample + 1)) ^ (0xC2B2AE3D27D4EB4FULL * (exit + 1)));
  return unit_uniform(rng);
}

} // namespace detail

inline ConformalCalibration calibrate(const ProbTrajectory &traj, std::span<const std::int32_t> labels,
                                      const DatasetSplit &split, const RapsConfig &cfg) {
  cfg.validate();
  if (split.calibration_indices.empty()) {
    throw ConfigError("empty calibration set");
  }
  ConformalCalibration calib;
  for (std::size_t m = 0; m < traj.n_exits; ++m) {
    std::vector<double> scores;
    scores.reserve(split.calibration_indices.size());
    for (auto n : split.calibration_indices) {
      if (labels[n] == kUnlabeled) {
        throw DataError("calibration sample " + std::to_string(n) + " is unlabeled");
      }
      scores.push_back(raps_score(traj.row(n, m), static_cast<std::size_t>(labels[n]), cfg,
                                  detail::raps_uniform(cfg.seed, n, m)));
    }
    calib.quantiles.push_back(conformal_quantile(std::move(scores), cfg.alpha));
  }
  return calib;
}

/// The smallest prefix of descending-probability classes whose score
/// reaches q_hat (randomized: every rank whose randomized score is <= q_hat).
/// Always at least one class.
inline std::vector<std::size_t> prediction_set(std::span<const double> probs, double q_hat,
                                               const RapsConfig &cfg, double u = 1.0) {
  const auto order = detail::descending_order(probs);
  std::size_t size = 0;
  double cumulative = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    cumulative += probs[order[r]];
    const double score = cumulative + detail::rank_penalty(cfg, r + 1);
    if (cfg.randomized) {
      if (score - u * probs[order[r]] <= q_hat) {
        size = r + 1;
      } else {
        break;
      }
    } else {
      size = r + 1;
      if (score >= q_hat) {
        break;
      }
    }
  }
  if (!(cfg.randomized && cfg.allow_empty)) size = std::max<std::size_t>(size, 1);
  return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size)};
}

struct ExitCoverage {
  double coverage = 0.0;
  double mean_set_size = 0.0;
};

/// Per-sample set sizes, [sample][exit], for every sample in the trajectory.
inline std::vector<double> set_sizes(const ProbTrajectory &traj, const ConformalCalibration &calib,
                                     const RapsConfig &cfg) {
  std::vector<double> out(traj.n_samples * traj.n_exits);
  for (std::size_t n = 0; n < traj.n_samples; ++n) {
    for (std::size_t m = 0; m < traj.n_exits; ++m) {
      out[n * traj.n_exits + m] = static_cast<double>(
          prediction_set(traj.row(n, m), calib.quantiles[m], cfg, detail::raps_uniform(cfg.seed, n, m)).size());
    }
  }
  return out;
}

/// Empirical coverage and mean set size per exit over the evaluation indices.
inline std::vector<ExitCoverage> coverage_and_size(const ProbTrajectory &traj,
                                                   std::span<const std::int32_t> labels,
                                                   const ConformalCalibration &calib,
                                                   const DatasetSplit &split, const RapsConfig &cfg) {
  if (calib.quantiles.size() != traj.n_exits) {
    throw ConfigError("calibration does not match the trajectory's exit count");
  }
  std::vector<ExitCoverage> out(traj.n_exits);
  if (split.evaluation_indices.empty()) {
    return out;
  }
  const double n_eval = static_cast<double>(split.evaluation_indices.size());
  for (std::size_t m = 0; m < traj.n_exits; ++m) {
    std::size_t covered = 0, total_size = 0;
    for (auto n : split.evaluation_indices) {
      const auto set =
          prediction_set(traj.row(n, m), calib.quantiles[m], cfg, detail::raps_uniform(cfg.seed, n, m));
      total_size += set.size();
      if (labels[n] != kUnlabeled &&
          std::find(set.begin(), set.end(), static_cast<std::size_t>(labels[n])) != set.end()) {
        ++covered;
      }
    }
    out[m] = {static_cast<double>(covered) / n_eval, static_cast<double>(total_size) / n_eval};
  }
  return out;
}

} // namespace anytime

#endif // ANYTIME_CONFORMAL_HPP
