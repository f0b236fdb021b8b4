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

// Anytime regression with uniform-likelihood members. The product of
// uniform densities U(a_m, b_m) is U(max a, min b), so the anytime
// prediction after m members is an interval intersection.

#ifndef ANYTIME_INTERVALS_HPP
#define ANYTIME_INTERVALS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "anytime/activations.hpp"
#include "anytime/detail/util.hpp"
#include "anytime/error.hpp"
#include "anytime/toy_eenn.hpp"

namespace anytime {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double width() const { return upper - lower; }
  friend bool operator==(const Interval &, const Interval &) = default;
};

/// (max lower, min upper), or nullopt when the members do not overlap.
inline std::optional<Interval> product_intervals(std::span<const Interval> members) {
  if (members.empty()) {
    throw ConfigError("interval product needs at least one member");
  }
  Interval out{members[0].lower, members[0].upper};
  for (const auto &iv : members) {
    if (!(iv.lower < iv.upper)) {
      throw ConfigError("interval member must satisfy lower < upper");
    }
    out.lower = std::max(out.lower, iv.lower);
    out.upper = std::min(out.upper, iv.upper);
  }
  if (!(out.lower < out.upper)) {
    return std::nullopt;
  }
  return out;
}

/// Products after 1, 2, ..., M members.
inline std::vector<std::optional<Interval>> anytime_intervals(std::span<const Interval> members) {
  std::vector<std::optional<Interval>> out;
  for (std::size_t m = 1; m <= members.size(); ++m) {
    out.push_back(product_intervals(members.first(m)));
  }
  return out;
}

/// One ensemble member: 1 -> hidden (tanh) -> (center, raw half-width).
struct IntervalMember {
  // Keeps lower < upper after rounding.
  static constexpr double min_half_width = 1e-6;

  /// softplus keeps d(half)/d(raw) <= 1; an exp link let one large step blow
  /// the width up to overflow.
  static double half_width(double raw) { return softplus(raw) + min_half_width; }

  std::size_t hidden = 16;
  std::vector<double> w1, b1; // hidden
  std::vector<double> w2;     // 2 x hidden
  std::vector<double> b2;     // 2

  IntervalMember() = default;
  IntervalMember(std::size_t hidden_units, std::uint64_t seed)
      : hidden(hidden_units), w1(hidden_units), b1(hidden_units), w2(2 * hidden_units), b2(2) {
    std::mt19937_64 rng(seed);
    auto draw = [&](double s) { return s * (2.0 * detail::unit_uniform(rng) - 1.0); };
    for (auto &v : w1) v = draw(3.0);
    for (auto &v : b1) v = draw(3.0);
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_units));
    for (auto &v : w2) v = draw(s2);
    b2 = {0.0, 0.0};
  }

  Interval predict(double x) const {
    double center = b2[0], raw = b2[1];
    for (std::size_t j = 0; j < hidden; ++j) {
      const double h = std::tanh(w1[j] * x + b1[j]);
      center += w2[j] * h;
      raw += w2[hidden + j] * h;
    }
    const double half = half_width(raw);
    return {center - half, center + half};
  }
};

struct IntervalTrainConfig {
  std::size_t hidden = 16;
  std::size_t epochs = 400;
  double learning_rate = 0.001;
  std::size_t batch_size = 16;
  double momentum = 0.9;
  // hinge weight on |y - center| exceeding the half-width
  double containment_penalty = 20.0;
  std::uint64_t seed = 0;
};

namespace detail {

// half + penalty * max(0, |y - c| - half); returns the loss and
// accumulates its gradient into the g* buffers.
inline double interval_loss(const IntervalMember &m, double x, double y, double penalty, std::span<double> gw1,
                            std::span<double> gb1, std::span<double> gw2, std::span<double> gb2) {
  const std::size_t H = m.hidden;
  std::vector<double> h(H);
  double center = m.b2[0], raw = m.b2[1];
  for (std::size_t j = 0; j < H; ++j) {
    h[j] = std::tanh(m.w1[j] * x + m.b1[j]);
    center += m.w2[j] * h[j];
    raw += m.w2[H + j] * h[j];
  }
  const double half = IntervalMember::half_width(raw);
  const double resid = y - center;
  const double excess = std::abs(resid) - half;
  // Linear in the width: a log-width term would be unbounded below against a
  // linear hinge and collapses members to zero width. At the optimum about
  // 1/penalty of the targets fall outside.
  double loss = half;
  double d_center = 0.0, d_half = 1.0;
  if (excess > 0.0) {
    loss += penalty * excess;
    d_center = -penalty * (resid > 0.0 ? 1.0 : -1.0);
    d_half -= penalty;
  }
  const double d_raw = d_half * sigmoid(raw);
  gb2[0] += d_center;
  gb2[1] += d_raw;
  for (std::size_t j = 0; j < H; ++j) {
    gw2[j] += d_center * h[j];
    gw2[H + j] += d_raw * h[j];
    const double dh = (d_center * m.w2[j] + d_raw * m.w2[H + j]) * (1.0 - h[j] * h[j]);
    gw1[j] += dh * x;
    gb1[j] += dh;
  }
  return loss;
}

} // namespace detail

/// Fits one member by minimizing the half-width with a hinge penalty for
/// targets outside the interval.
inline IntervalMember train_interval_member(const RegressionData &data, const IntervalTrainConfig &cfg,
                                            std::uint64_t seed) {
  IntervalMember m(cfg.hidden, seed);
  const std::size_t H = cfg.hidden;
  std::vector<double> gw1(H), gb1(H), gw2(2 * H), gb2(2);
  std::vector<double> vw1(H, 0.0), vb1(H, 0.0), vw2(2 * H, 0.0), vb2(2, 0.0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  auto step = [&](std::vector<double> &p, std::vector<double> &v, const std::vector<double> &g, double scale) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = cfg.momentum * v[j] - cfg.learning_rate * g[j] * scale;
      p[j] += v[j];
    }
  };
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[detail::uniform_index(rng, i)]);
    }
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::fill(gw1.begin(), gw1.end(), 0.0);
      std::fill(gb1.begin(), gb1.end(), 0.0);
      std::fill(gw2.begin(), gw2.end(), 0.0);
      std::fill(gb2.begin(), gb2.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        detail::interval_loss(m, data.x[order[b]], data.y[order[b]], cfg.containment_penalty, gw1, gb1, gw2, gb2);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      step(m.w1, vw1, gw1, scale);
      step(m.b1, vb1, gb1, scale);
      step(m.w2, vw2, gw2, scale);
      step(m.b2, vb2, gb2, scale);
    }
  }
  return m;
}

struct IntervalEnsemble {
  std::vector<IntervalMember> members;

  std::vector<Interval> predict(double x) const {
    std::vector<Interval> out;
    out.reserve(members.size());
    for (const auto &m : members) out.push_back(m.predict(x));
    return out;
  }
};

inline IntervalEnsemble train_interval_ensemble(const RegressionData &data, std::size_t n_members,
                                                const IntervalTrainConfig &cfg) {
  IntervalEnsemble ens;
  for (std::size_t i = 0; i < n_members; ++i) {
    ens.members.push_back(train_interval_member(data, cfg, cfg.seed * 1000003ULL + i));
  }
  return ens;
}

} // namespace anytime

#endif // ANYTIME_INTERVALS_HPP
