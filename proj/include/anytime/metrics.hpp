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

// Anytime quality, monotonicity, calibration and uncertainty measures.
//
// Nothing here draws random numbers; every aggregate is a fixed-order fold
// over samples and therefore bit-reproducible.

#ifndef ANYTIME_METRICS_HPP
#define ANYTIME_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "anytime/detail/util.hpp"
#include "anytime/error.hpp"
#include "anytime/logit_store.hpp"
#include "anytime/trajectory.hpp"

namespace anytime {

/// Row-major samples x exits matrix of 0/1 correctness flags.
struct CorrectnessMatrix {
  std::size_t n_samples = 0;
  std::size_t n_exits = 0;
  std::vector<std::uint8_t> values;

  CorrectnessMatrix() = default;
  CorrectnessMatrix(std::size_t n, std::size_t m) : n_samples(n), n_exits(m), values(n * m, 0) {}
  CorrectnessMatrix(std::size_t n, std::size_t m, std::vector<std::uint8_t> v)
      : n_samples(n), n_exits(m), values(std::move(v)) {
    if (values.size() != n * m) {
      throw ConfigError("correctness matrix size mismatch");
    }
  }
  bool operator()(std::size_t n, std::size_t m) const { return values[n * n_exits + m] != 0; }
  std::span<const std::uint8_t> row(std::size_t n) const { return {values.data() + n * n_exits, n_exits}; }
};

struct TrajectoryQuality {
  std::size_t n_samples = 0;
  std::size_t n_exits = 0;
  std::vector<double> gt_prob;         // [sample][exit]
  CorrectnessMatrix correct;           // [sample][exit]
  std::vector<double> full_model_prob; // [sample][exit], class = argmax of the final exit

  std::span<const double> gt_row(std::size_t n) const { return {gt_prob.data() + n * n_exits, n_exits}; }
  std::span<const double> full_model_row(std::size_t n) const {
    return {full_model_prob.data() + n * n_exits, n_exits};
  }
};

/// p_m(y_hat | x) where y_hat is the final exit's argmax. Needs no labels.
inline std::vector<double> full_model_prob(const ProbTrajectory &traj) {
  std::vector<double> out(traj.n_samples * traj.n_exits);
  for (std::size_t n = 0; n < traj.n_samples; ++n) {
    const auto y_hat = detail::argmax(traj.row(n, traj.n_exits - 1));
    for (std::size_t m = 0; m < traj.n_exits; ++m) {
      out[n * traj.n_exits + m] = traj.prob(n, m, y_hat);
    }
  }
  return out;
}

inline TrajectoryQuality quality(const ProbTrajectory &traj, std::span<const std::int32_t> labels) {
  if (labels.size() != traj.n_samples) {
    throw DataError("label count does not match trajectory");
  }
  TrajectoryQuality q;
  q.n_samples = traj.n_samples;
  q.n_exits = traj.n_exits;
  q.gt_prob.resize(traj.n_samples * traj.n_exits);
  q.correct = CorrectnessMatrix(traj.n_samples, traj.n_exits);
  for (std::size_t n = 0; n < traj.n_samples; ++n) {
    if (labels[n] == kUnlabeled) {
      throw DataError("sample " + std::to_string(n) + " is unlabeled; ground-truth metrics need labels");
    }
    const auto y = static_cast<std::size_t>(labels[n]);
    for (std::size_t m = 0; m < traj.n_exits; ++m) {
      q.gt_prob[n * traj.n_exits + m] = traj.prob(n, m, y);
      q.correct.values[n * traj.n_exits + m] = detail::argmax(traj.row(n, m)) == y ? 1 : 0;
    }
  }
  q.full_model_prob = full_model_prob(traj);
  return q;
}

/// max over m < m' of max(seq[m] - seq[m'], 0).
inline double mpd_star(std::span<const double> seq) {
  if (seq.empty()) {
    throw ConfigError("mpd_star of an empty sequence");
  }
  double best = 0.0;
  double running_max = seq[0];
  for (std::size_t i = 1; i < seq.size(); ++i) {
    best = std::max(best, running_max - seq[i]);
    running_max = std::max(running_max, seq[i]);
  }
  return best;
}

/// max over m < m' of max(seq[m'] - seq[m], 0).
inline double mui(std::span<const double> seq) {
  if (seq.empty()) {
    throw ConfigError("mui of an empty sequence");
  }
  double best = 0.0;
  double running_min = seq[0];
  for (std::size_t i = 1; i < seq.size(); ++i) {
    best = std::max(best, seq[i] - running_min);
    running_min = std::min(running_min, seq[i]);
  }
  return best;
}

/// N_tau = #{n : values[n] >= tau} for each tau (thresholds ascending).
inline std::vector<std::size_t> count_exceeding(std::span<const double> values,
                                                std::span<const double> thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw ConfigError("thresholds must be sorted ascending");
  }
  std::vector<std::size_t> counts(thresholds.size(), 0);
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    for (double v : values) {
      counts[t] += v >= thresholds[t] ? 1 : 0;
    }
  }
  return counts;
}

struct MonoZero {
  double mono_percent = 0.0;
  double zero_percent = 0.0;
};

inline MonoZero mono_zero_percent(const CorrectnessMatrix &correct) {
  if (correct.n_samples == 0) {
    return {};
  }
  std::size_t mono = 0, zero = 0;
  for (std::size_t n = 0; n < correct.n_samples; ++n) {
    const auto r = correct.row(n);
    mono += std::is_sorted(r.begin(), r.end()) ? 1 : 0;
    zero += std::none_of(r.begin(), r.end(), [](auto v) { return v != 0; }) ? 1 : 0;
  }
  const double total = static_cast<double>(correct.n_samples);
  return {100.0 * static_cast<double>(mono) / total, 100.0 * static_cast<double>(zero) / total};
}

struct Overthinking {
  double oracle_accuracy = 0.0;
  double final_accuracy = 0.0;
  double overthinking = 0.0;
};

inline Overthinking overthinking(const CorrectnessMatrix &correct) {
  if (correct.n_samples == 0 || correct.n_exits == 0) {
    return {};
  }
  std::size_t oracle = 0, final_ok = 0;
  for (std::size_t n = 0; n < correct.n_samples; ++n) {
    const auto r = correct.row(n);
    oracle += std::any_of(r.begin(), r.end(), [](auto v) { return v != 0; }) ? 1 : 0;
    final_ok += r.back() ? 1 : 0;
  }
  const double total = static_cast<double>(correct.n_samples);
  Overthinking out;
  out.oracle_accuracy = static_cast<double>(oracle) / total;
  out.final_accuracy = static_cast<double>(final_ok) / total;
  // computed on counts so that oracle == final gives exactly zero
  out.overthinking = static_cast<double>(oracle - final_ok) / total;
  return out;
}

/// HI_m in percent: among samples wrong at exit m, the share that some
/// earlier exit got right. 0 when nothing is wrong at m.
inline std::vector<double> hindsight_improvability(const CorrectnessMatrix &correct) {
  std::vector<double> out(correct.n_exits, 0.0);
  for (std::size_t m = 0; m < correct.n_exits; ++m) {
    std::size_t wrong = 0, improvable = 0;
    for (std::size_t n = 0; n < correct.n_samples; ++n) {
      if (correct(n, m)) {
        continue;
      }
      ++wrong;
      for (std::size_t prev = 0; prev < m; ++prev) {
        if (correct(n, prev)) {
          ++improvable;
          break;
        }
      }
    }
    out[m] = wrong == 0 ? 0.0 : 100.0 * static_cast<double>(improvable) / static_cast<double>(wrong);
  }
  return out;
}

struct LearnForget {
  std::vector<std::size_t> learned; // correct at m for the first time
  std::vector<std::size_t> forgot;  // correct at m-1, wrong at m; forgot[0] = 0
};

enum class ForgetCounting {
  every_transition, // each correct -> wrong step counts
  first_only,       // only a sample's first correct -> wrong step counts
};

inline LearnForget learn_forget(const CorrectnessMatrix &correct,
                                ForgetCounting counting = ForgetCounting::every_transition) {
  LearnForget out{std::vector<std::size_t>(correct.n_exits, 0), std::vector<std::size_t>(correct.n_exits, 0)};
  for (std::size_t n = 0; n < correct.n_samples; ++n) {
    bool seen_correct = false;
    bool forgot_once = false;
    for (std::size_t m = 0; m < correct.n_exits; ++m) {
      if (correct(n, m) && !seen_correct) {
        ++out.learned[m];
      }
      if (m > 0 && correct(n, m - 1) && !correct(n, m)) {
        if (counting == ForgetCounting::every_transition || !forgot_once) {
          ++out.forgot[m];
        }
        forgot_once = true;
      }
      seen_correct = seen_correct || correct(n, m);
    }
  }
  return out;
}

/// Expected calibration error with equal-width bins over [0, 1].
inline double ece(std::span<const double> confidences, std::span<const std::uint8_t> correct,
                  std::size_t n_bins = 15) {
  if (confidences.size() != correct.size()) {
    throw ConfigError("ece: confidence and correctness lengths differ");
  }
  if (n_bins == 0) {
    throw ConfigError("ece: need at least one bin");
  }
  if (confidences.empty()) {
    return 0.0;
  }
  std::vector<double> conf_sum(n_bins, 0.0), acc_sum(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) {
      throw ConfigError("ece: confidence outside [0, 1]");
    }
    const auto bin = std::min(static_cast<std::size_t>(c * static_cast<double>(n_bins)), n_bins - 1);
    conf_sum[bin] += c;
    acc_sum[bin] += correct[i] ? 1.0 : 0.0;
    ++count[bin];
  }
  double total = 0.0;
  const double n = static_cast<double>(confidences.size());
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0) {
      continue;
    }
    const double size = static_cast<double>(count[b]);
    total += (size / n) * std::abs(acc_sum[b] / size - conf_sum[b] / size);
  }
  return total;
}

/// Shannon entropy in nats with 0 log 0 = 0.
inline double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) {
      h -= p * std::log(p);
    }
  }
  return h;
}

inline std::vector<double> entropy_per_sample(const ProbTrajectory &traj) {
  std::vector<double> out(traj.n_samples * traj.n_exits);
  for (std::size_t n = 0; n < traj.n_samples; ++n) {
    for (std::size_t m = 0; m < traj.n_exits; ++m) {
      out[n * traj.n_exits + m] = entropy(traj.row(n, m));
    }
  }
  return out;
}

inline std::vector<double> entropy_per_exit(const ProbTrajectory &traj) {
  std::vector<double> out(traj.n_exits, 0.0);
  if (traj.n_samples == 0) {
    return out;
  }
  for (std::size_t n = 0; n < traj.n_samples; ++n) {
    for (std::size_t m = 0; m < traj.n_exits; ++m) {
      out[m] += entropy(traj.row(n, m));
    }
  }
  for (double &h : out) {
    h /= static_cast<double>(traj.n_samples);
  }
  return out;
}

/// Area under the ROC curve of `scores` for `positive`, Mann-Whitney form
/// with midranks for ties. NaN when either class is empty.
inline double auroc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      ++j;
    }
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (positive[order[t]]) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

/// Oracle-collaborative AUROC: the ceil(fraction * N) least confident
/// samples are handed to an oracle (marked correct), then AUROC of
/// confidence against correctness. Returns NaN if the deferred labels are
/// all one class.
inline double oc_auroc(std::span<const double> confidences, std::span<const std::uint8_t> correct,
                       double deferral_fraction = 0.005) {
  if (!(deferral_fraction >= 0.0 && deferral_fraction < 1.0)) {
    throw ConfigError("deferral fraction must lie in [0, 1)");
  }
  if (confidences.size() != correct.size()) {
    throw ConfigError("oc_auroc: confidence and correctness lengths differ");
  }
  const std::size_t n = confidences.size();
  const auto n_defer = static_cast<std::size_t>(
      std::ceil(deferral_fraction * static_cast<double>(n) - 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return confidences[a] < confidences[b]; });
  std::vector<std::uint8_t> labels(correct.begin(), correct.end());
  for (std::size_t i = 0; i < std::min(n_defer, n); ++i) {
    labels[order[i]] = 1;
  }
  return auroc(confidences, labels);
}

/// Max class probability per (sample, exit).
inline std::vector<double> max_confidence(const ProbTrajectory &traj) {
  std::vector<double> out(traj.n_samples * traj.n_exits);
  for (std::size_t n = 0; n < traj.n_samples; ++n) {
    for (std::size_t m = 0; m < traj.n_exits; ++m) {
      const auto r = traj.row(n, m);
      out[n * traj.n_exits + m] = *std::max_element(r.begin(), r.end());
    }
  }
  return out;
}

/// Column m of a row-major [sample][exit] table.
template <typename T>
std::vector<T> exit_column(std::span<const T> table, std::size_t n_exits, std::size_t exit) {
  std::vector<T> out(table.size() / n_exits);
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = table[n * n_exits + exit];
  }
  return out;
}

/// Applies `reduce` (mpd_star, mui, ...) to every row of a [sample][exit] table.
template <typename Reduce>
std::vector<double> per_sample(std::span<const double> table, std::size_t n_exits, Reduce &&reduce) {
  std::vector<double> out(n_exits == 0 ? 0 : table.size() / n_exits);
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = reduce(table.subspan(n * n_exits, n_exits));
  }
  return out;
}

} // namespace anytime

#endif // ANYTIME_METRICS_HPP
