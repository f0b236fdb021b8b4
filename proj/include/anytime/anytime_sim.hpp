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

// Interruption simulator: every sample computes exit by exit until an
// environment halt signal arrives, then the policy's distribution at the
// last finished exit is served.
//
// Conventions: halts are drawn independently per sample, and a halt before
// the first exit's cost still serves exit 1.

#ifndef ANYTIME_ANYTIME_SIM_HPP
#define ANYTIME_ANYTIME_SIM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "anytime/detail/util.hpp"
#include "anytime/error.hpp"
#include "anytime/metrics.hpp"
#include "anytime/trajectory.hpp"

namespace anytime {

/// Last exit whose cumulative cost fits the budget (0-based), at least 0.
inline std::size_t interrupt_exit(double budget, std::span<const double> costs) {
  if (!(budget >= 0.0)) {
    throw ConfigError("budget must be >= 0");
  }
  std::size_t exit = 0;
  for (std::size_t m = 0; m < costs.size(); ++m) {
    if (costs[m] <= budget) {
      exit = m;
    }
  }
  return exit;
}

enum class HaltKind {
  uniform_over_exits, // exit ~ U{1..M}
  categorical,        // exit ~ Cat(p_1..p_M)
  uniform_cost,       // T ~ U[c_1, c_M], exit = interrupt_exit(T)
  fixed_budget,       // T = budget, deterministic
};

struct BudgetModel {
  std::vector<double> costs; // cumulative, strictly increasing
  HaltKind halt = HaltKind::uniform_over_exits;
  std::vector<double> probs; // categorical only
  double budget = 0.0;       // fixed_budget only
  std::uint64_t seed = 0;

  void validate() const {
    if (costs.empty()) throw ConfigError("budget model needs at least one exit cost");
    for (std::size_t m = 1; m < costs.size(); ++m) {
      if (!(costs[m] > costs[m - 1])) throw ConfigError("exit costs must be strictly increasing");
    }
    if (halt == HaltKind::categorical) {
      if (probs.size() != costs.size()) throw ConfigError("categorical halt needs one probability per exit");
      double total = 0.0;
      for (double p : probs) {
        if (!(p >= 0.0)) throw ConfigError("halt probabilities must be >= 0");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9) throw ConfigError("halt probabilities must sum to 1");
    }
    if (halt == HaltKind::fixed_budget && !(budget >= 0.0)) throw ConfigError("budget must be >= 0");
  }

  /// Closed-form probability of halting at each exit.
  std::vector<double> exit_probabilities() const {
    const std::size_t M = costs.size();
    std::vector<double> out(M, 0.0);
    switch (halt) {
    case HaltKind::uniform_over_exits:
      std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(M));
      break;
    case HaltKind::categorical:
      out = probs;
      break;
    case HaltKind::fixed_budget:
      out[interrupt_exit(budget, costs)] = 1.0;
      break;
    case HaltKind::uniform_cost:
      if (M == 1) {
        out[0] = 1.0;
        break;
      }
      for (std::size_t m = 0; m + 1 < M; ++m) {
        out[m] = (costs[m + 1] - costs[m]) / (costs.back() - costs.front());
      }
      break;
    }
    return out;
  }

  std::size_t draw_exit(std::mt19937_64 &rng) const {
    switch (halt) {
    case HaltKind::uniform_over_exits:
      return detail::uniform_index(rng, costs.size());
    case HaltKind::categorical: {
      const double u = detail::unit_uniform(rng);
      double acc = 0.0;
      for (std::size_t m = 0; m < probs.size(); ++m) {
        acc += probs[m];
        if (u < acc) return m;
      }
      // rounding left u above the total; take the last exit with mass
      for (std::size_t m = probs.size(); m-- > 0;) {
        if (probs[m] > 0.0) return m;
      }
      return 0;
    }
    case HaltKind::uniform_cost: {
      const double t = costs.front() + detail::unit_uniform(rng) * (costs.back() - costs.front());
      return interrupt_exit(t, costs);
    }
    case HaltKind::fixed_budget:
      return interrupt_exit(budget, costs);
    }
    return 0;
  }
};

struct SimulationResult {
  std::vector<double> trial_accuracy;
  std::vector<double> trial_gt_prob;
  double mean_accuracy = 0.0;
  double mean_gt_prob = 0.0;
  // halt-probability-weighted per-exit quality
  double expected_accuracy = 0.0;
  double expected_gt_prob = 0.0;
  // quality-vs-budget curve at each exit's cost
  std::vector<double> curve_cost;
  std::vector<double> curve_accuracy;
  std::vector<double> curve_gt_prob;
};

/// Per-exit accuracy and mean ground-truth probability over labeled samples.
struct PerExitQuality {
  std::vector<double> accuracy;
  std::vector<double> gt_prob;
  std::vector<std::size_t> labeled; // indices of labeled samples
};

inline PerExitQuality per_exit_quality(const ProbTrajectory &traj, std::span<const std::int32_t> labels) {
  PerExitQuality out{std::vector<double>(traj.n_exits, 0.0), std::vector<double>(traj.n_exits, 0.0), {}};
  for (std::size_t n = 0; n < traj.n_samples; ++n) {
    if (labels[n] != kUnlabeled) out.labeled.push_back(n);
  }
  if (out.labeled.empty()) return out;
  const auto q = quality(traj.subset(out.labeled), [&] {
    std::vector<std::int32_t> y;
    for (auto n : out.labeled) y.push_back(labels[n]);
    return y;
  }());
  const double count = static_cast<double>(out.labeled.size());
  for (std::size_t i = 0; i < out.labeled.size(); ++i) {
    for (std::size_t m = 0; m < traj.n_exits; ++m) {
      out.accuracy[m] += q.correct(i, m) ? 1.0 : 0.0;
      out.gt_prob[m] += q.gt_prob[i * traj.n_exits + m];
    }
  }
  for (std::size_t m = 0; m < traj.n_exits; ++m) {
    out.accuracy[m] /= count;
    out.gt_prob[m] /= count;
  }
  return out;
}

namespace detail {

// Exact when every value is the same (deterministic halts), which a plain
// sum-then-divide is not.
inline double mean_of(const std::vector<double> &v) {
  if (v.empty()) return 0.0;
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) return v.front();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace detail

/// Seed of trial t; independent streams per trial so trials parallelize.
inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) {
  return seed * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL * (trial + 1);
}

inline SimulationResult simulate(const ProbTrajectory &traj, std::span<const std::int32_t> labels,
                                 const BudgetModel &budget, std::size_t n_trials, unsigned threads = 1) {
  budget.validate();
  if (budget.costs.size() != traj.n_exits) {
    throw ConfigError("budget model has " + std::to_string(budget.costs.size()) + " exit costs, trajectory has " +
                      std::to_string(traj.n_exits) + " exits");
  }
  if (labels.size() != traj.n_samples) {
    throw DataError("label count does not match trajectory");
  }
  const auto per_exit = per_exit_quality(traj, labels);
  SimulationResult res;
  res.trial_accuracy.assign(n_trials, 0.0);
  res.trial_gt_prob.assign(n_trials, 0.0);

  std::vector<std::uint8_t> correct(traj.n_samples * traj.n_exits, 0);
  for (auto n : per_exit.labeled) {
    const auto y = static_cast<std::size_t>(labels[n]);
    for (std::size_t m = 0; m < traj.n_exits; ++m) {
      correct[n * traj.n_exits + m] = detail::argmax(traj.row(n, m)) == y ? 1 : 0;
    }
  }
  const double count = static_cast<double>(per_exit.labeled.size());
  detail::parallel_for(n_trials, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      std::mt19937_64 rng(trial_seed(budget.seed, t));
      double acc = 0.0, gt = 0.0;
      for (auto n : per_exit.labeled) {
        const auto m = budget.draw_exit(rng);
        acc += correct[n * traj.n_exits + m];
        gt += traj.prob(n, m, static_cast<std::size_t>(labels[n]));
      }
      res.trial_accuracy[t] = count > 0 ? acc / count : 0.0;
      res.trial_gt_prob[t] = count > 0 ? gt / count : 0.0;
    }
  });
  res.mean_accuracy = detail::mean_of(res.trial_accuracy);
  res.mean_gt_prob = detail::mean_of(res.trial_gt_prob);
  const auto halt_probs = budget.exit_probabilities();
  for (std::size_t m = 0; m < traj.n_exits; ++m) {
    res.expected_accuracy += halt_probs[m] * per_exit.accuracy[m];
    res.expected_gt_prob += halt_probs[m] * per_exit.gt_prob[m];
  }
  res.curve_cost = budget.costs;
  res.curve_accuracy = per_exit.accuracy;
  res.curve_gt_prob = per_exit.gt_prob;
  return res;
}

struct NamedPolicy {
  std::string name;
  ProbTrajectory trajectory;
};

struct BudgetLevel {
  std::string label;
  double parameter = 0.0;
  BudgetModel model;
};

struct SweepRow {
  std::string policy;
  std::string budget_label;
  double budget_parameter = 0.0;
  double accuracy = 0.0;
  double gt_prob = 0.0;
};

/// One row per (policy, budget level), policies outermost.
inline std::vector<SweepRow> budget_sweep(std::span<const NamedPolicy> policies,
                                          std::span<const std::int32_t> labels,
                                          std::span<const BudgetLevel> levels, std::size_t n_trials,
                                          unsigned threads = 1) {
  std::vector<SweepRow> rows;
  for (const auto &policy : policies) {
    for (const auto &level : levels) {
      const auto res = simulate(policy.trajectory, labels, level.model, n_trials, threads);
      rows.push_back({policy.name, level.label, level.parameter, res.mean_accuracy, res.mean_gt_prob});
    }
  }
  return rows;
}

} // namespace anytime

#endif // ANYTIME_ANYTIME_SIM_HPP
