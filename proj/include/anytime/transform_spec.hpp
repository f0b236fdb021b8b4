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

// JSON-configurable dispatch over the transforms:
//   {"name": "...", "method": "...", "activation": "...", "b": 0,
//    "shift": null, "weights_scheme": "linear_over_M", "fallback": "softmax"}

#ifndef ANYTIME_TRANSFORM_SPEC_HPP
#define ANYTIME_TRANSFORM_SPEC_HPP

#include <optional>
#include <string>
#include <vector>

#include "anytime/activations.hpp"
#include "anytime/error.hpp"
#include "anytime/logit_store.hpp"
#include "anytime/threshold_model.hpp"
#include "anytime/transforms.hpp"
#include "json.hpp"

namespace anytime {

enum class Method { softmax_latest, hard_poe, product_anytime, caching_anytime, mixture, adaptive };

inline std::string to_string(Method m) {
  switch (m) {
  case Method::softmax_latest: return "softmax_latest";
  case Method::hard_poe: return "hard_poe";
  case Method::product_anytime: return "product_anytime";
  case Method::caching_anytime: return "caching_anytime";
  case Method::mixture: return "mixture";
  case Method::adaptive: return "adaptive";
  }
  return "?";
}

struct TransformSpec {
  std::string name;
  Method method = Method::product_anytime;
  ActivationSpec activation;
  std::string weights_scheme = "linear_over_M";
  std::vector<double> custom_weights;
  Fallback fallback = Fallback::softmax;
  // adaptive thresholds only
  std::vector<double> c_grid{0.0, 0.5, 1.0, 2.0, 4.0};
  double validation_fraction = 0.2;
};

inline TransformSpec parse_transform_spec(const nlohmann::json &j) {
  if (!j.is_object()) throw ConfigError("transform spec must be a JSON object");
  TransformSpec spec;
  const auto method = j.value("method", std::string("product_anytime"));
  std::optional<ActivationKind> implied;
  if (method == "softmax_latest" || method == "softmax" || method == "baseline") {
    spec.method = Method::softmax_latest;
  } else if (method == "hard_poe" || method == "poe") {
    spec.method = Method::hard_poe;
  } else if (method == "product_anytime" || method == "pa") {
    spec.method = Method::product_anytime;
  } else if (method == "clipped") {
    spec.method = Method::product_anytime;
    implied = ActivationKind::clipped;
  } else if (method == "shifted") {
    spec.method = Method::product_anytime;
    implied = ActivationKind::shifted_relu;
  } else if (method == "caching_anytime" || method == "ca") {
    spec.method = Method::caching_anytime;
  } else if (method == "mixture" || method == "moe") {
    spec.method = Method::mixture;
  } else if (method == "adaptive") {
    spec.method = Method::adaptive;
  } else {
    throw ConfigError("unknown method '" + method + "'");
  }
  spec.name = j.value("name", method);
  if (j.contains("activation")) {
    spec.activation.kind = parse_activation(j.at("activation").get<std::string>());
    if (implied && spec.activation.kind != *implied) {
      throw ConfigError("method '" + method + "' conflicts with activation '" +
                        j.at("activation").get<std::string>() + "'");
    }
  } else if (implied) {
    spec.activation.kind = *implied;
  }
  spec.activation.b = j.value("b", 0.0);
  if (j.contains("shift") && !j.at("shift").is_null()) spec.activation.shift = j.at("shift").get<double>();
  spec.activation.validate();
  spec.weights_scheme = j.value("weights_scheme", std::string("linear_over_M"));
  if (j.contains("weights")) spec.custom_weights = j.at("weights").get<std::vector<double>>();
  const auto fallback = j.value("fallback", std::string("softmax"));
  if (fallback == "softmax") {
    spec.fallback = Fallback::softmax;
  } else if (fallback == "zero" || fallback == "none") {
    spec.fallback = Fallback::zero;
  } else {
    throw ConfigError("unknown fallback '" + fallback + "'");
  }
  if (j.contains("c_grid")) spec.c_grid = j.at("c_grid").get<std::vector<double>>();
  spec.validation_fraction = j.value("validation_fraction", spec.validation_fraction);
  return spec;
}

inline nlohmann::json to_json(const TransformSpec &spec) {
  nlohmann::json j{{"name", spec.name},
                   {"method", to_string(spec.method)},
                   {"activation", std::string(to_string(spec.activation.kind))},
                   {"b", spec.activation.b},
                   {"shift", spec.activation.shift ? nlohmann::json(*spec.activation.shift) : nlohmann::json()},
                   {"weights_scheme", spec.weights_scheme},
                   {"fallback", spec.fallback == Fallback::softmax ? "softmax" : "zero"}};
  if (!spec.custom_weights.empty()) j["weights"] = spec.custom_weights;
  if (spec.method == Method::adaptive) {
    j["c_grid"] = spec.c_grid;
    j["validation_fraction"] = spec.validation_fraction;
  }
  return j;
}

struct TransformOutput {
  ProbTrajectory trajectory;
  std::optional<ThresholdFit> threshold_fit; // adaptive only
};

/// Runs one spec. Adaptive thresholds are fitted on a seeded labeled split of
/// `validation_fraction` of the samples and then applied to every sample.
inline TransformOutput apply_transform(const LogitDataset &ds, const TransformSpec &spec, std::uint64_t seed = 0,
                                       unsigned threads = 1) {
  const auto weights = make_weights(spec.weights_scheme, ds.n_exits, spec.custom_weights);
  switch (spec.method) {
  case Method::softmax_latest:
    return {softmax_latest(ds, threads), std::nullopt};
  case Method::hard_poe:
    return {hard_poe(ds, spec.activation.b, weights, spec.fallback, threads), std::nullopt};
  case Method::product_anytime:
    return {product_anytime(ds, weights, spec.activation, spec.fallback, threads), std::nullopt};
  case Method::caching_anytime:
    return {caching_anytime(softmax_latest(ds, threads)), std::nullopt};
  case Method::mixture:
    return {mixture_anytime(ds, spec.activation, threads), std::nullopt};
  case Method::adaptive: {
    std::vector<std::size_t> labeled;
    for (std::size_t n = 0; n < ds.n_samples; ++n) {
      if (ds.labeled(n)) labeled.push_back(n);
    }
    const auto parts = split(labeled.size(), spec.validation_fraction, seed);
    std::vector<std::size_t> fit_indices;
    for (auto i : parts.calibration_indices) fit_indices.push_back(labeled[i]);
    const auto validation = ds.subset(fit_indices);
    const auto preds = full_model_predictions(validation);
    auto fit = fit_threshold_model(validation, preds, validation.labels, spec.c_grid, weights);
    auto traj = adaptive_threshold_transform(ds, fit.model, weights, spec.fallback, threads);
    return {std::move(traj), std::move(fit)};
  }
  }
  throw ConfigError("unhandled method");
}

} // namespace anytime

#endif // ANYTIME_TRANSFORM_SPEC_HPP
