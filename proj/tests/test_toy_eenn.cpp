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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "anytime.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace anytime;

namespace {

ToyEENN random_model(std::mt19937_64 &rng, std::size_t M, std::size_t K) {
  std::uniform_int_distribution<std::size_t> dim(1, 3), width(2, 5);
  ToyEENN model(dim(rng), width(rng), M, K, rng());
  std::normal_distribution<double> g(0.0, 0.7);
  for (double &p : model.params()) p = g(rng);
  return model;
}

ClassificationData blobs(std::size_t n_per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  ClassificationData d;
  d.dim = 2;
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      d.x.push_back((c ? 2.0 : -2.0) + g(rng));
      d.x.push_back(g(rng));
      d.y.push_back(c);
    }
  }
  return d;
}

double accuracy(const ToyEENN &model, const ClassificationData &d, std::size_t exit) {
  double ok = 0;
  for (std::size_t n = 0; n < d.size(); ++n) {
    const auto f = forward_exit(model, d.input(n), exit);
    ok += static_cast<std::int32_t>(std::max_element(f.begin(), f.end()) - f.begin()) == d.y[n];
  }
  return ok / static_cast<double>(d.size());
}

} // namespace

TEST(Spirals, ShapeDeterminismAndGeometry) {
  const auto d = generate_spirals(250, 4, 0.03, 5);
  EXPECT_EQ(d.size(), 1000u);
  for (int c = 0; c < 4; ++c) EXPECT_EQ(std::count(d.y.begin(), d.y.end(), c), 250);
  EXPECT_EQ(d.x, generate_spirals(250, 4, 0.03, 5).x);
  EXPECT_NE(d.x, generate_spirals(250, 4, 0.03, 6).x);
  const double pi = std::acos(-1.0);
  const auto clean = generate_spirals(50, 3, 0.0, 1);
  for (std::size_t n = 0; n < clean.size(); ++n) {
    const double x = clean.x[2 * n], y = clean.x[2 * n + 1];
    const double r = std::hypot(x, y);
    ASSERT_GE(r, 0.1 - 1e-12);
    ASSERT_LE(r, 1.0 + 1e-12);
    const double angle = 2.0 * pi * clean.y[n] / 3.0 + r * kDefaultSpiralArc;
    EXPECT_NEAR(x, r * std::cos(angle), 1e-12);
    EXPECT_NEAR(y, r * std::sin(angle), 1e-12);
  }
  EXPECT_THROW(generate_spirals(10, 1, 0.0, 0), ConfigError);
}

TEST(Simple1d, ClustersGapAndDeterminism) {
  const auto d = generate_simple1d(500, 3);
  EXPECT_EQ(d.size(), 500u);
  for (double x : d.x) {
    const bool left = x >= -1.5 && x <= -0.5;
    const bool right = x >= 0.5 && x <= 1.5;
    EXPECT_TRUE(left || right) << x;
  }
  EXPECT_GT(std::count_if(d.x.begin(), d.x.end(), [](double x) { return x < 0; }), 150);
  EXPECT_GT(std::count_if(d.x.begin(), d.x.end(), [](double x) { return x > 0; }), 150);
  EXPECT_EQ(d.y, generate_simple1d(500, 3).y);
}

TEST(ToyEENN, ParametersAreNestedByBlock) {
  const ToyEENN model(2, 16, 5, 4, 1);
  EXPECT_EQ(model.block(0).in, 2u);
  std::size_t prefix = 0;
  for (std::size_t m = 0; m < 5; ++m) {
    // theta_m = blocks 1..m occupy a growing prefix of the flat vector
    EXPECT_EQ(model.block(m).weight_offset, prefix);
    prefix = model.block(m).end();
    EXPECT_EQ(model.head(m).in, 16u);
    EXPECT_EQ(model.head(m).out, 4u);
  }
  EXPECT_EQ(model.head(4).end(), model.params().size());
  // exit m must not depend on later blocks
  ToyEENN changed = model;
  for (std::size_t i = changed.block(3).weight_offset; i < changed.block(3).end(); ++i) changed.params()[i] += 1.0;
  const std::vector<double> x{0.3, -0.2};
  EXPECT_EQ(forward_exit(model, x, 2), forward_exit(changed, x, 2));
  EXPECT_NE(forward_exit(model, x, 3), forward_exit(changed, x, 3));
}

TEST(ToyEENN, ZeroHeadsGiveZeroLogitsAndUniformLoss) {
  ToyEENN model(2, 8, 3, 4, 2);
  for (std::size_t m = 0; m < 3; ++m) {
    auto w = model.weights(model.head(m));
    auto b = model.biases(model.head(m));
    std::fill(w.begin(), w.end(), 0.0);
    std::fill(b.begin(), b.end(), 0.0);
  }
  const std::vector<double> x{0.5, 0.25};
  for (const auto &f : forward_all_exits(model, x))
    for (double v : f) EXPECT_EQ(v, 0.0);
  const std::vector<double> ones(3, 1.0);
  EXPECT_NEAR(standard_loss(model, x, 1, ones), 3.0 * std::log(4.0), 1e-12);
}

TEST(ToyEENN, SingleExitIsAPlainMlp) {
  const ToyEENN model(3, 4, 1, 2, 7);
  const std::vector<double> x{0.1, -0.4, 0.9};
  const auto p = model.params();
  const auto &b = model.block(0);
  const auto &h = model.head(0);
  std::vector<double> hidden(4);
  for (std::size_t r = 0; r < 4; ++r) {
    double z = p[b.bias_offset + r];
    for (std::size_t c = 0; c < 3; ++c) z += p[b.weight_offset + r * 3 + c] * x[c];
    hidden[r] = std::tanh(z);
  }
  const auto f = forward_exit(model, x, 0);
  for (std::size_t k = 0; k < 2; ++k) {
    double z = p[h.bias_offset + k];
    for (std::size_t c = 0; c < 4; ++c) z += p[h.weight_offset + k * 4 + c] * hidden[c];
    EXPECT_NEAR(f[k], z, 1e-15);
  }
  EXPECT_THROW(forward_exit(model, std::vector<double>{1.0}, 0), ConfigError);
}

TEST(ToyEENN, StandardLossGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t M = 1 + trial % 4, K = 2 + trial % 3;
    const auto model = random_model(rng, M, K);
    std::vector<double> x(model.input_dim());
    for (double &v : x) v = std::normal_distribution<double>(0.0, 1.0)(rng);
    std::vector<double> w(M);
    for (double &v : w) v = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    const auto y = static_cast<std::int32_t>(trial % K);
    std::vector<double> grad(model.params().size(), 0.0);
    standard_loss(model, x, y, w, grad);
    const auto fd = oracle::fd_gradient(model, [&](const ToyEENN &m) { return standard_loss(m, x, y, w); });
    EXPECT_LT(oracle::relative_error(grad, fd), 1e-6);
  }
}

TEST(ToyEENN, PaLossGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t M = 1 + trial % 4, K = 2 + trial % 3;
    const auto model = random_model(rng, M, K);
    std::vector<double> x(model.input_dim());
    for (double &v : x) v = std::normal_distribution<double>(0.0, 1.0)(rng);
    const auto w = ExitWeights::linear(M).values;
    const auto y = static_cast<std::int32_t>(trial % K);
    std::vector<double> grad(model.params().size(), 0.0);
    pa_loss(model, x, y, w, grad);
    const auto fd = oracle::fd_gradient(model, [&](const ToyEENN &m) { return pa_loss(m, x, y, w); });
    EXPECT_LT(oracle::relative_error(grad, fd), 1e-6);
  }
}

TEST(ToyEENN, ZeroExitWeightFreezesThatHead) {
  std::mt19937_64 rng(17);
  const auto model = random_model(rng, 3, 3);
  std::vector<double> x(model.input_dim(), 0.4);
  std::vector<double> grad(model.params().size(), 0.0);
  standard_loss(model, x, 1, std::vector<double>{1.0, 0.0, 0.0}, grad);
  for (std::size_t m = 1; m < 3; ++m) {
    for (std::size_t i = model.head(m).weight_offset; i < model.head(m).end(); ++i) EXPECT_EQ(grad[i], 0.0);
    // later blocks only feed later heads
    for (std::size_t i = model.block(m).weight_offset; i < model.block(m).end(); ++i) EXPECT_EQ(grad[i], 0.0);
  }
  double head0 = 0;
  for (std::size_t i = model.head(0).weight_offset; i < model.head(0).end(); ++i) head0 += std::abs(grad[i]);
  EXPECT_GT(head0, 0.0);
}

TEST(ToyEENN, TrainsSeparableBlobs) {
  const auto d = blobs(100, 3);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 4;
  const auto res = train_standard(ToyEENN(2, 8, 2, 2, 1), d, cfg);
  EXPECT_GE(accuracy(res.model, d, 1), 0.99);
  EXPECT_EQ(res.loss_curve.size(), 31u);
  EXPECT_LT(res.loss_curve.back(), res.loss_curve.front());
}

TEST(ToyEENN, TrainingIsDeterministic) {
  const auto d = generate_spirals(40, 3, 0.05, 1);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 9;
  const auto a = train_standard(ToyEENN(2, 6, 3, 3, 2), d, cfg);
  const auto b = train_standard(ToyEENN(2, 6, 3, 3, 2), d, cfg);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  cfg.seed = 10;
  EXPECT_FALSE(train_standard(ToyEENN(2, 6, 3, 3, 2), d, cfg).model == a.model);
}

TEST(ToyEENN, PaFinetuneLowersItsLossWithoutDegenerateRows) {
  const auto d = generate_spirals(60, 3, 0.05, 2);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 1;
  const auto base = train_standard(ToyEENN(2, 8, 3, 3, 3), d, cfg);
  const auto tuned = finetune_pa(base.model, d, cfg);
  EXPECT_EQ(tuned.loss_curve.size(), cfg.finetune_epochs() + 1);
  EXPECT_LT(tuned.loss_curve.back(), tuned.loss_curve.front());
  const auto logits = export_logits(tuned.model, d);
  const ActivationSpec softplus{ActivationKind::softplus, 0.0, std::nullopt};
  const auto pa = product_anytime(logits, ExitWeights::uniform(3), softplus, Fallback::zero);
  EXPECT_EQ(std::count(pa.degenerate.begin(), pa.degenerate.end(), 1), 0);

  cfg.objective = Objective::pa_finetune;
  const auto full = train(ToyEENN(2, 8, 3, 3, 3), d, cfg);
  EXPECT_EQ(full.loss_curve.size(), cfg.epochs + 1);
}

TEST(ToyEENN, ConfigValidation) {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  const auto d = blobs(5, 1);
  EXPECT_THROW(train_standard(ToyEENN(2, 4, 2, 2, 0), d, cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.exit_loss_weights = {1.0};
  EXPECT_THROW(train_standard(ToyEENN(2, 4, 2, 2, 0), d, cfg), ConfigError);
  EXPECT_THROW(ToyEENN(2, 4, 0, 2, 0), ConfigError);
}

TEST(ToyEENN, DivergenceIsReported) {
  const auto d = blobs(20, 2);
  TrainConfig cfg;
  cfg.epochs = 5;
  ToyEENN model(2, 4, 2, 2, 0);
  model.params()[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    train_standard(model, d, cfg);
    ADD_FAILURE() << "expected DivergenceError";
  } catch (const DivergenceError &e) {
    EXPECT_EQ(e.epoch(), 1);
  }
}

TEST(ToyEENN, ExportAndModelRoundTrip) {
  TempDir dir;
  const ToyEENN model(2, 5, 3, 4, 8);
  save_model(model, dir / "m.aexm");
  EXPECT_EQ(load_model(dir / "m.aexm"), model);
  const auto d = generate_spirals(10, 4, 0.1, 3);
  const auto ds = export_logits(model, d);
  EXPECT_EQ(ds.n_exits, 3u);
  EXPECT_EQ(ds.labels, d.y);
  EXPECT_EQ(export_logits(model, d, 3), ds);
  save_binary(ds, dir / "l.aexl");
  EXPECT_EQ(load_binary(dir / "l.aexl").logits, ds.logits);
  write_text(dir / "bad.aexm", "AEXX");
  EXPECT_THROW(load_model(dir / "bad.aexm"), DataError);
}

TEST(Intervals, HandExamples) {
  const std::vector<Interval> overlap{{0, 2}, {1, 3}};
  EXPECT_EQ(product_intervals(overlap), (Interval{1, 2}));
  const std::vector<Interval> disjoint{{0, 1}, {2, 3}};
  EXPECT_FALSE(product_intervals(disjoint).has_value());
  EXPECT_THROW(product_intervals(std::vector<Interval>{}), ConfigError);
  EXPECT_THROW(product_intervals(std::vector<Interval>{{1, 1}}), ConfigError);
}

TEST(Intervals, MatchSweepOracleAndNeverWiden) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Interval> members(1 + trial % 6);
    for (auto &iv : members) {
      const double a = u(rng), b = u(rng);
      iv = {std::min(a, b), std::max(a, b) + 1e-9};
    }
    EXPECT_EQ(product_intervals(members), oracle::intersect(members));
    const auto steps = anytime_intervals(members);
    for (std::size_t m = 1; m < steps.size(); ++m) {
      if (!steps[m - 1]) {
        EXPECT_FALSE(steps[m].has_value());
      }
      if (steps[m] && steps[m - 1]) {
        EXPECT_LE(steps[m]->width(), steps[m - 1]->width());
      }
    }
    auto shuffled = members;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(product_intervals(shuffled), product_intervals(members));
  }
}

TEST(Intervals, TrainedEnsembleCoversTrainingData) {
  const auto d = generate_simple1d(200, 4);
  IntervalTrainConfig cfg;
  cfg.epochs = 150;
  cfg.seed = 2;
  const auto ens = train_interval_ensemble(d, 3, cfg);
  ASSERT_EQ(ens.members.size(), 3u);
  double covered = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto iv = ens.members[0].predict(d.x[i]);
    covered += iv.lower <= d.y[i] && d.y[i] <= iv.upper;
  }
  EXPECT_GT(covered / static_cast<double>(d.size()), 0.8);
  EXPECT_EQ(train_interval_ensemble(d, 3, cfg).members[1].w2, ens.members[1].w2);
}
