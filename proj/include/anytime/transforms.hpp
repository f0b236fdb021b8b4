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

// Anytime predictive distributions built from per-exit logits.
//
// Every transform is a pure function of (dataset, config). Samples are
// independent, so all of them accept a thread count and produce identical
// output for any value of it.

#ifndef ANYTIME_TRANSFORMS_HPP
#define ANYTIME_TRANSFORMS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "anytime/activations.hpp"
#include "anytime/detail/util.hpp"
#include "anytime/logit_store.hpp"
#include "anytime/trajectory.hpp"

namespace anytime {

/// What to serve when a product's unnormalized mass is zero everywhere.
enum class Fallback {
  softmax, // softmax of the current exit's logits
  zero,    // leave the all-zero row in place
};

/// Latest-exit softmax: the standard EENN behaviour.
inline ProbTrajectory softmax_latest(const LogitDataset &ds, unsigned threads = 1) {
  ProbTrajectory out(ds.n_samples, ds.n_exits, ds.n_classes);
  detail::parallel_for(ds.n_samples, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      for (std::size_t m = 0; m < ds.n_exits; ++m) {
        detail::softmax(ds.row(n, m), out.row(n, m));
      }
    }
  });
  return out;
}

/// Product of Heaviside experts [f_i(x)_y > b]: uniform over the classes
/// that cleared the threshold at every exit so far. The weights only enter
/// as exponents of 0/1 factors and therefore do not change the result.
inline ProbTrajectory hard_poe(const LogitDataset &ds, double b, const ExitWeights &weights,
                               Fallback fallback = Fallback::softmax, unsigned threads = 1) {
  weights.validate(ds.n_exits);
  ProbTrajectory out(ds.n_samples, ds.n_exits, ds.n_classes);
  detail::parallel_for(ds.n_samples, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<char> support(ds.n_classes);
    for (std::size_t n = begin; n < end; ++n) {
      std::fill(support.begin(), support.end(), 1);
      for (std::size_t m = 0; m < ds.n_exits; ++m) {
        const auto f = ds.row(n, m);
        std::size_t alive = 0;
        for (std::size_t k = 0; k < ds.n_classes; ++k) {
          support[k] = support[k] && f[k] > b;
          alive += support[k] ? 1 : 0;
        }
        auto p = out.row(n, m);
        if (alive == 0) {
          out.degenerate[n * ds.n_exits + m] = 1;
          if (fallback == Fallback::softmax) {
            detail::softmax(f, p);
          }
          continue;
        }
        const double mass = 1.0 / static_cast<double>(alive);
        for (std::size_t k = 0; k < ds.n_classes; ++k) {
          p[k] = support[k] ? mass : 0.0;
        }
      }
    }
  });
  return out;
}

namespace detail {

// Shared product-of-experts core. `log_member(n, m, f, out)` writes
// log-scores for exit m of sample n, -inf for zero mass. Scores are
// accumulated as weighted log sums over an explicit support mask, so long
// exit chains cannot underflow.
template <typename LogMember>
ProbTrajectory product_combine(const LogitDataset &ds, const ExitWeights &weights, Fallback fallback,
                               unsigned threads, LogMember &&log_member) {
  weights.validate(ds.n_exits);
  ProbTrajectory out(ds.n_samples, ds.n_exits, ds.n_classes);
  parallel_for(ds.n_samples, threads, [&](std::size_t begin, std::size_t end) {
    const std::size_t K = ds.n_classes;
    std::vector<double> acc(K), member(K);
    std::vector<char> support(K);
    for (std::size_t n = begin; n < end; ++n) {
      std::fill(acc.begin(), acc.end(), 0.0);
      std::fill(support.begin(), support.end(), 1);
      for (std::size_t m = 0; m < ds.n_exits; ++m) {
        const auto f = ds.row(n, m);
        log_member(n, m, f, std::span<double>(member));
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
          if (!support[k]) {
            continue;
          }
          if (std::isinf(member[k]) && member[k] < 0.0) {
            support[k] = 0;
            continue;
          }
          acc[k] += weights.values[m] * member[k];
          peak = std::max(peak, acc[k]);
        }
        auto p = out.row(n, m);
        if (std::isinf(peak)) {
          out.degenerate[n * ds.n_exits + m] = 1;
          if (fallback == Fallback::softmax) {
            softmax(f, p);
          } else {
            std::fill(p.begin(), p.end(), 0.0);
          }
          continue;
        }
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          p[k] = support[k] ? std::exp(acc[k] - peak) : 0.0;
          total += p[k];
        }
        for (double &v : p) {
          v /= total;
        }
      }
    }
  });
  return out;
}

} // namespace detail

/// Product Anytime: p_m(y) proportional to prod_{i<=m} a(f_i(x)_y)^{w_i}.
/// Zero-mass rows are flagged degenerate and replaced per `fallback`.
inline ProbTrajectory product_anytime(const LogitDataset &ds, const ExitWeights &weights,
                                      const ActivationSpec &act, Fallback fallback = Fallback::softmax,
                                      unsigned threads = 1) {
  act.validate();
  const std::size_t K = ds.n_classes;
  return detail::product_combine(ds, weights, fallback, threads,
                                 [&](std::size_t, std::size_t, std::span<const double> f, std::span<double> out) {
                                   for (std::size_t k = 0; k < K; ++k) {
                                     out[k] = log_activate(act, f[k], K);
                                   }
                                 });
}

/// Serves, at each exit, the distribution of the most confident exit seen
/// so far (confidence = max class probability; ties keep the earlier exit).
/// Served-exit indices compose, so applying the transform twice is a no-op.
inline ProbTrajectory caching_anytime(const ProbTrajectory &traj) {
  ProbTrajectory out = traj;
  for (std::size_t n = 0; n < traj.n_samples; ++n) {
    std::size_t best = 0;
    double best_conf = -1.0;
    for (std::size_t m = 0; m < traj.n_exits; ++m) {
      const auto row = traj.row(n, m);
      const double conf = *std::max_element(row.begin(), row.end());
      if (conf > best_conf) {
        best_conf = conf;
        best = m;
      }
      std::copy(traj.row(n, best).begin(), traj.row(n, best).end(), out.row(n, m).begin());
      out.degenerate[n * traj.n_exits + m] = traj.degenerate[n * traj.n_exits + best];
      out.served_exit[n * traj.n_exits + m] = traj.served_exit[n * traj.n_exits + best];
    }
  }
  return out;
}

/// Mixture of experts: the uniform average of the first m normalized
/// members a(f_i) / sum a(f_i). An all-zero member contributes a uniform
/// distribution.
inline ProbTrajectory mixture_anytime(const LogitDataset &ds, const ActivationSpec &act,
                                      unsigned threads = 1) {
  act.validate();
  ProbTrajectory out(ds.n_samples, ds.n_exits, ds.n_classes);
  const std::size_t K = ds.n_classes;
  detail::parallel_for(ds.n_samples, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> member(K), running(K);
    for (std::size_t n = begin; n < end; ++n) {
      std::fill(running.begin(), running.end(), 0.0);
      for (std::size_t m = 0; m < ds.n_exits; ++m) {
        const auto f = ds.row(n, m);
        if (act.kind == ActivationKind::exponential) {
          detail::softmax(f, member);
        } else {
          double total = 0.0;
          for (std::size_t k = 0; k < K; ++k) {
            member[k] = activate(act, f[k], K);
            total += member[k];
          }
          for (double &v : member) {
            v = total > 0.0 ? v / total : 1.0 / static_cast<double>(K);
          }
        }
        auto p = out.row(n, m);
        const double count = static_cast<double>(m + 1);
        for (std::size_t k = 0; k < K; ++k) {
          running[k] += member[k];
          p[k] = running[k] / count;
        }
      }
    }
  });
  return out;
}

} // namespace anytime

#endif // ANYTIME_TRANSFORMS_HPP
