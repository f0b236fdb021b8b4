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

#ifndef ANYTIME_ACTIVATIONS_HPP
#define ANYTIME_ACTIVATIONS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "anytime/error.hpp"

namespace anytime {

/// Maps a logit to a non-negative unnormalized likelihood.
enum class ActivationKind {
  exponential,  // exp(x); the softmax likelihood
  relu,         // max(x, 0)
  heaviside,    // [x > b]
  gated_relu,   // x * [x > b]
  clipped,      // C_b * max(min(x, b), 0), C_b = max(1, 1/b)
  softplus,     // log(1 + exp(x))
  shifted_relu, // max(x + shift, 0), shift defaults to 1/K
};

inline std::string_view to_string(ActivationKind kind) {
  switch (kind) {
  case ActivationKind::exponential: return "exponential";
  case ActivationKind::relu: return "relu";
  case ActivationKind::heaviside: return "heaviside";
  case ActivationKind::gated_relu: return "gated_relu";
  case ActivationKind::clipped: return "clipped";
  case ActivationKind::softplus: return "softplus";
  case ActivationKind::shifted_relu: return "shifted_relu";
  }
  return "?";
}

inline ActivationKind parse_activation(std::string_view name) {
  if (name == "exponential" || name == "softmax" || name == "exp") return ActivationKind::exponential;
  if (name == "relu") return ActivationKind::relu;
  if (name == "heaviside") return ActivationKind::heaviside;
  if (name == "gated_relu" || name == "gated") return ActivationKind::gated_relu;
  if (name == "clipped") return ActivationKind::clipped;
  if (name == "softplus") return ActivationKind::softplus;
  if (name == "shifted_relu" || name == "shifted") return ActivationKind::shifted_relu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

struct ActivationSpec {
  ActivationKind kind = ActivationKind::relu;
  double b = 0.0;
  std::optional<double> shift; // shifted_relu only; unset means 1/K

  void validate() const {
    if (kind == ActivationKind::clipped && !(b > 0.0)) {
      throw ConfigError("clipped activation requires b > 0");
    }
    if ((kind == ActivationKind::heaviside || kind == ActivationKind::gated_relu) && !(b >= 0.0)) {
      throw ConfigError("heaviside/gated_relu activation requires b >= 0");
    }
  }
};

inline double clipped_activation(double x, double b) {
  if (!(b > 0.0)) {
    throw ConfigError("clipped activation requires b > 0");
  }
  const double scale = std::max(1.0, 1.0 / b);
  return scale * std::max(std::min(x, b), 0.0);
}

inline double softplus(double x) {
  // log1p(exp(x)) without overflow
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// a(x) for one logit. `n_classes` resolves the default shift.
inline double activate(const ActivationSpec &act, double x, std::size_t n_classes) {
  switch (act.kind) {
  case ActivationKind::exponential: return std::exp(x);
  case ActivationKind::relu: return std::max(x, 0.0);
  case ActivationKind::heaviside: return x > act.b ? 1.0 : 0.0;
  case ActivationKind::gated_relu: return x > act.b ? x : 0.0;
  case ActivationKind::clipped: return clipped_activation(x, act.b);
  case ActivationKind::softplus: return softplus(x);
  case ActivationKind::shifted_relu:
    return std::max(x + act.shift.value_or(1.0 / static_cast<double>(n_classes)), 0.0);
  }
  return 0.0;
}

/// log a(x), -inf where a(x) == 0. Exact in the tails where a(x) itself
/// would underflow (exponential, softplus).
inline double log_activate(const ActivationSpec &act, double x, std::size_t n_classes) {
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  switch (act.kind) {
  case ActivationKind::exponential: return x;
  case ActivationKind::softplus:
    // softplus(x) = exp(x) (1 - exp(x)/2 + ...) for very negative x
    return x < -30.0 ? x : std::log(softplus(x));
  default: {
    const double a = activate(act, x, n_classes);
    return a > 0.0 ? std::log(a) : neg_inf;
  }
  }
}

/// max(f + 1/K, 0) elementwise.
inline std::vector<double> shifted_relu_member(std::span<const double> f, std::size_t n_classes) {
  if (n_classes < 2) {
    throw ConfigError("shifted relu needs at least two classes");
  }
  const double shift = 1.0 / static_cast<double>(n_classes);
  std::vector<double> out(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) {
    out[k] = std::max(f[k] + shift, 0.0);
  }
  return out;
}

/// Per-exit ensemble weights w_1..w_M, all strictly positive.
struct ExitWeights {
  enum class Scheme { linear_over_M, uniform_one, custom };
  Scheme scheme = Scheme::linear_over_M;
  std::vector<double> values;

  /// w_i = i / M (1-based i).
  static ExitWeights linear(std::size_t n_exits) {
    ExitWeights w{Scheme::linear_over_M, std::vector<double>(n_exits)};
    for (std::size_t i = 0; i < n_exits; ++i) {
      w.values[i] = static_cast<double>(i + 1) / static_cast<double>(n_exits);
    }
    return w;
  }
  static ExitWeights uniform(std::size_t n_exits) {
    return {Scheme::uniform_one, std::vector<double>(n_exits, 1.0)};
  }
  static ExitWeights custom(std::vector<double> values) {
    ExitWeights w{Scheme::custom, std::move(values)};
    w.validate(w.values.size());
    return w;
  }

  void validate(std::size_t n_exits) const {
    if (values.size() != n_exits) {
      throw ConfigError("exit weight count " + std::to_string(values.size()) +
                        " does not match M=" + std::to_string(n_exits));
    }
    for (double v : values) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ConfigError("exit weights must be finite and > 0");
      }
    }
  }
};

inline ExitWeights make_weights(std::string_view scheme, std::size_t n_exits,
                                const std::vector<double> &custom = {}) {
  if (scheme == "linear_over_M" || scheme == "linear") return ExitWeights::linear(n_exits);
  if (scheme == "uniform_one" || scheme == "uniform") return ExitWeights::uniform(n_exits);
  if (scheme == "custom") {
    auto w = ExitWeights::custom(custom);
    w.validate(n_exits);
    return w;
  }
  throw ConfigError("unknown weights scheme '" + std::string(scheme) + "'");
}

} // namespace anytime

#endif // ANYTIME_ACTIVATIONS_HPP
