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

// anytime: command-line front end.
//
//   anytime transform  --config cfg.json --out dir
//   anytime evaluate   --config cfg.json --out dir
//   anytime train-toy  --config cfg.json --out dir [--regression]
//   anytime conformal  --config cfg.json --out dir
//   anytime simulate   --config cfg.json --out dir
//   anytime report     --config cfg.json --out dir   (or --metrics metrics.csv)
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "anytime.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace anytime;

namespace {

struct Context {
  std::string command;
  json config = json::object();
  fs::path config_dir = ".";
  std::uint64_t seed = 0;
  unsigned threads = 1;
  fs::path out = "anytime_out";
  std::string hash;
};

json read_json(const fs::path &path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception &e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

fs::path resolve(const Context &ctx, const std::string &p) {
  const fs::path path(p);
  return path.is_absolute() ? path : ctx.config_dir / path;
}

template <typename T> T get_or(const json &j, const char *key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// Hash of everything that determines the outputs; thread count and output
// directory are excluded because results do not depend on them.
std::string config_hash(const Context &ctx, const json &extra = json::object()) {
  const json canonical{{"command", ctx.command}, {"config", ctx.config}, {"seed", ctx.seed}, {"extra", extra}};
  return hex(detail::fnv1a(canonical.dump()));
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << text;
}

void write_json(const fs::path &path, const json &j) { write_text(path, j.dump(2) + "\n"); }

std::string fmt(double v) { return detail::format_value(v); }

// --- inputs ------------------------------------------------------------------

LogitDataset load_input(const Context &ctx) {
  if (!ctx.config.contains("input")) throw ConfigError("config needs an 'input' AEXL or CSV path");
  const auto path = resolve(ctx, ctx.config.at("input").get<std::string>());
  if (!fs::exists(path)) throw DataError("input file not found: " + path.string());
  if (path.extension() == ".csv") {
    const auto m = get_or<std::size_t>(ctx.config, "n_exits", 0);
    const auto k = get_or<std::size_t>(ctx.config, "n_classes", 0);
    if (m == 0 || k == 0) throw ConfigError("CSV input needs 'n_exits' and 'n_classes'");
    return load_csv(path, m, k);
  }
  return load_binary(path);
}

std::vector<TransformSpec> transform_specs(const Context &ctx, bool required) {
  std::vector<TransformSpec> specs;
  if (!ctx.config.contains("transforms")) {
    if (required) throw ConfigError("config needs a non-empty 'transforms' list");
    specs.push_back(parse_transform_spec(json{{"method", "softmax_latest"}}));
    specs.push_back(parse_transform_spec(json{{"method", "product_anytime"}, {"activation", "relu"}}));
    return specs;
  }
  const auto &list = ctx.config.at("transforms");
  if (!list.is_array() || list.empty()) throw ConfigError("'transforms' must be a non-empty list");
  std::set<std::string> names;
  for (const auto &item : list) {
    specs.push_back(parse_transform_spec(item));
    if (!names.insert(specs.back().name).second) {
      throw ConfigError("duplicate transform name '" + specs.back().name + "'");
    }
  }
  return specs;
}

struct Policies {
  std::vector<NamedPolicy> policies;
  std::vector<std::int32_t> labels;
  std::vector<double> costs;
};

// Either precomputed trajectories ('trajectories': [path | {name, path}]) or
// an input dataset plus transform specs.
Policies load_policies(const Context &ctx) {
  Policies out;
  if (ctx.config.contains("trajectories")) {
    const auto &list = ctx.config.at("trajectories");
    if (!list.is_array() || list.empty()) throw ConfigError("'trajectories' must be a non-empty list");
    for (const auto &item : list) {
      std::string name, path;
      if (item.is_string()) {
        path = item.get<std::string>();
        name = fs::path(path).stem().string();
      } else {
        path = get_or<std::string>(item, "path", "");
        name = get_or<std::string>(item, "name", fs::path(path).stem().string());
      }
      const auto full = resolve(ctx, path);
      if (!fs::exists(full)) throw DataError("trajectory file not found: " + full.string());
      auto file = load_trajectory(full);
      if (out.policies.empty()) {
        out.labels = file.labels;
      } else if (file.labels != out.labels || file.trajectory.n_exits != out.policies[0].trajectory.n_exits) {
        throw DataError("trajectory " + full.string() + " does not match the first trajectory's samples");
      }
      out.policies.push_back({name, std::move(file.trajectory)});
    }
    const std::size_t M = out.policies[0].trajectory.n_exits;
    out.costs.resize(M);
    std::iota(out.costs.begin(), out.costs.end(), 1.0);
  } else {
    const auto ds = load_input(ctx);
    for (const auto &spec : transform_specs(ctx, false)) {
      out.policies.push_back({spec.name, apply_transform(ds, spec, ctx.seed, ctx.threads).trajectory});
    }
    out.labels = ds.labels;
    out.costs = ds.exit_costs();
  }
  if (ctx.config.contains("costs")) out.costs = ctx.config.at("costs").get<std::vector<double>>();
  return out;
}

std::optional<RapsConfig> raps_config(const Context &ctx, double *fraction) {
  if (!ctx.config.contains("conformal") || ctx.config.at("conformal").is_null()) return std::nullopt;
  const auto &c = ctx.config.at("conformal");
  RapsConfig cfg;
  cfg.alpha = get_or(c, "alpha", cfg.alpha);
  cfg.lambda_reg = get_or(c, "lambda", cfg.lambda_reg);
  cfg.k_reg = get_or(c, "k_reg", cfg.k_reg);
  cfg.randomized = get_or(c, "randomized", cfg.randomized);
  cfg.allow_empty = get_or(c, "allow_empty", cfg.allow_empty);
  cfg.seed = ctx.seed;
  cfg.validate();
  if (fraction) *fraction = get_or(c, "calibration_fraction", 0.5);
  return cfg;
}

// --- subcommands -------------------------------------------------------------

int cmd_transform(Context &ctx) {
  const auto ds = load_input(ctx);
  const auto specs = transform_specs(ctx, true);
  ctx.hash = config_hash(ctx);
  fs::create_directories(ctx.out);
  json manifest{{"config_hash", ctx.hash},
                {"input", ctx.config.at("input")},
                {"n_samples", ds.n_samples},
                {"n_exits", ds.n_exits},
                {"n_classes", ds.n_classes},
                {"outputs", json::array()}};
  for (const auto &spec : specs) {
    const auto result = apply_transform(ds, spec, ctx.seed, ctx.threads);
    const auto file = spec.name + ".aexp";
    save_trajectory(result.trajectory, ds.labels, ctx.out / file);
    const auto degenerate =
        std::accumulate(result.trajectory.degenerate.begin(), result.trajectory.degenerate.end(), std::size_t{0});
    json entry{{"name", spec.name}, {"path", file}, {"spec", to_json(spec)}, {"degenerate_rows", degenerate}};
    if (result.threshold_fit) {
      const auto &fit = *result.threshold_fit;
      entry["threshold_model"] = {{"weights", fit.model.weights},
                                  {"bias", fit.model.bias},
                                  {"scale_C", fit.model.scale_C},
                                  {"constant", fit.model.constant},
                                  {"static_n_exceeding", fit.static_n_exceeding}};
      if (!fit.model.warning.empty()) {
        entry["threshold_model"]["warning"] = fit.model.warning;
        std::cerr << "warning: " << spec.name << ": " << fit.model.warning << '\n';
      }
    }
    write_json(detail::sidecar_path(ctx.out / file), {{"config_hash", ctx.hash}, {"spec", to_json(spec)}});
    manifest["outputs"].push_back(entry);
    std::cout << "wrote " << (ctx.out / file).string() << " (" << degenerate << " degenerate rows)\n";
  }
  write_json(ctx.out / "manifest.json", manifest);
  return 0;
}

const std::vector<std::string> kPerExitColumns{"accuracy",
                                               "mean_gt_prob",
                                               "ece",
                                               "oc_auroc",
                                               "mean_entropy",
                                               "mean_confidence",
                                               "mean_full_model_prob",
                                               "degenerate_percent",
                                               "hindsight_improvability",
                                               "learned",
                                               "forgot",
                                               "conformal_quantile",
                                               "conformal_coverage",
                                               "mean_set_size"};

void write_per_exit_csv(const MetricReport &report, const std::vector<NamedPolicy> &policies, const fs::path &path,
                        const std::string &hash) {
  std::ostringstream os;
  os << "# config_hash=" << hash << "\nmethod,exit";
  for (const auto &c : kPerExitColumns) os << ',' << c;
  os << '\n';
  for (const auto &p : policies) {
    for (std::size_t m = 1; m <= p.trajectory.n_exits; ++m) {
      os << p.name << ',' << m;
      for (const auto &c : kPerExitColumns) {
        os << ',';
        if (auto v = report.find(p.name, m, c)) os << fmt(*v);
      }
      os << '\n';
    }
  }
  write_text(path, os.str());
}

int cmd_evaluate(Context &ctx) {
  const auto inputs = load_policies(ctx);
  EvaluateOptions opts;
  opts.thresholds = get_or(ctx.config, "thresholds", opts.thresholds);
  opts.ece_bins = get_or(ctx.config, "ece_bins", opts.ece_bins);
  opts.deferral_fraction = get_or(ctx.config, "deferral_fraction", opts.deferral_fraction);
  const auto counting = get_or<std::string>(ctx.config, "forget_counting", "every_transition");
  if (counting == "first_only") {
    opts.forget_counting = ForgetCounting::first_only;
  } else if (counting != "every_transition") {
    throw ConfigError("forget_counting must be every_transition or first_only");
  }
  double fraction = 0.5;
  opts.conformal = raps_config(ctx, &fraction);
  if (opts.conformal) opts.conformal_split = split(inputs.labels.size(), fraction, ctx.seed);

  const bool any_labeled = std::any_of(inputs.labels.begin(), inputs.labels.end(), [](auto y) { return y != kUnlabeled; });
  if (!any_labeled) {
    std::cerr << "warning: no labeled samples; label-dependent metrics are skipped\n";
  }
  MetricReport report;
  for (const auto &p : inputs.policies) report.append(evaluate(p.name, p.trajectory, inputs.labels, opts));

  ctx.hash = config_hash(ctx);
  fs::create_directories(ctx.out);
  const std::size_t M = inputs.policies.front().trajectory.n_exits;
  write_metrics_csv(report, ctx.out / "metrics.csv", ctx.hash);
  write_per_exit_csv(report, inputs.policies, ctx.out / "per_exit.csv", ctx.hash);
  write_samples_csv(report, M, ctx.out / "samples.csv", ctx.hash);
  write_ntau_csv(report, ctx.out / "ntau.csv", ctx.hash);
  write_json(ctx.out / "metrics.json", to_json(report, ctx.hash));
  for (const auto &p : inputs.policies) {
    const auto acc = report.find(p.name, M, "accuracy");
    const auto n01 = report.find(p.name, 0, threshold_key("n_mpd_ge_", 0.1));
    std::cout << p.name << ": final accuracy " << (acc ? std::to_string(*acc) : "n/a") << ", N(MPD*>=0.1) "
              << (n01 ? fmt(*n01) : "n/a") << '\n';
  }
  return 0;
}

int cmd_conformal(Context &ctx) {
  const auto inputs = load_policies(ctx);
  if (!ctx.config.contains("conformal")) ctx.config["conformal"] = json::object();
  double fraction = 0.5;
  const auto cfg = *raps_config(ctx, &fraction);
  const auto parts = split(inputs.labels.size(), fraction, ctx.seed);
  ctx.hash = config_hash(ctx);
  fs::create_directories(ctx.out);
  json summary{{"config_hash", ctx.hash},
               {"alpha", cfg.alpha},
               {"lambda", cfg.lambda_reg},
               {"k_reg", cfg.k_reg},
               {"randomized", cfg.randomized},
               {"allow_empty", cfg.allow_empty},
               {"n_calibration", parts.calibration_indices.size()},
               {"n_evaluation", parts.evaluation_indices.size()},
               {"methods", json::object()}};
  std::ostringstream csv;
  csv << "# config_hash=" << ctx.hash << "\nmethod,exit,quantile,coverage,mean_set_size\n";
  for (const auto &p : inputs.policies) {
    const auto calib = calibrate(p.trajectory, inputs.labels, parts, cfg);
    const auto cov = coverage_and_size(p.trajectory, inputs.labels, calib, parts, cfg);
    json entry{{"quantiles", calib.quantiles}, {"coverage", json::array()}, {"mean_set_size", json::array()}};
    for (std::size_t m = 0; m < cov.size(); ++m) {
      entry["coverage"].push_back(cov[m].coverage);
      entry["mean_set_size"].push_back(cov[m].mean_set_size);
      csv << p.name << ',' << m + 1 << ',' << fmt(calib.quantiles[m]) << ',' << fmt(cov[m].coverage) << ','
          << fmt(cov[m].mean_set_size) << '\n';
    }
    summary["methods"][p.name] = entry;
    std::cout << p.name << ": coverage at exit M " << fmt(cov.back().coverage) << ", mean set size "
              << fmt(cov.back().mean_set_size) << '\n';
  }
  write_json(ctx.out / "conformal.json", summary);
  write_text(ctx.out / "coverage.csv", csv.str());
  return 0;
}

HaltKind parse_halt(const std::string &name) {
  if (name == "uniform_over_exits" || name == "uniform") return HaltKind::uniform_over_exits;
  if (name == "categorical") return HaltKind::categorical;
  if (name == "uniform_cost") return HaltKind::uniform_cost;
  if (name == "fixed_budget" || name == "fixed") return HaltKind::fixed_budget;
  throw ConfigError("unknown halt kind '" + name + "'");
}

int cmd_simulate(Context &ctx) {
  if (!ctx.config.contains("budgets") || !ctx.config.at("budgets").is_array() || ctx.config.at("budgets").empty()) {
    throw ConfigError("config needs a non-empty 'budgets' list");
  }
  const auto inputs = load_policies(ctx);
  const auto n_trials = get_or<std::size_t>(ctx.config, "n_trials", 1000);
  std::vector<BudgetLevel> levels;
  for (const auto &b : ctx.config.at("budgets")) {
    if (!b.is_object()) throw ConfigError("each budget must be an object");
    BudgetLevel level;
    const auto halt_name = get_or<std::string>(b, "halt", "");
    if (halt_name.empty()) throw ConfigError("budget entry needs 'halt'");
    level.model.halt = parse_halt(halt_name);
    level.model.costs = inputs.costs;
    level.model.seed = ctx.seed;
    level.model.probs = get_or(b, "probs", std::vector<double>{});
    if (level.model.halt == HaltKind::fixed_budget) {
      if (!b.contains("budget")) throw ConfigError("fixed_budget needs 'budget'");
      level.model.budget = b.at("budget").get<double>();
      level.parameter = level.model.budget;
    }
    level.label = get_or<std::string>(b, "label", level.model.halt == HaltKind::fixed_budget
                                                      ? "fixed_" + fmt(level.model.budget)
                                                      : halt_name);
    level.model.validate();
    if (level.model.costs.size() != inputs.policies.front().trajectory.n_exits) {
      throw ConfigError("'costs' needs one entry per exit");
    }
    levels.push_back(std::move(level));
  }
  ctx.hash = config_hash(ctx);
  fs::create_directories(ctx.out);
  std::ostringstream sweep, curve;
  sweep << "# config_hash=" << ctx.hash
        << "\npolicy,budget,halt_parameter,accuracy,gt_prob,expected_accuracy,expected_gt_prob\n";
  curve << "# config_hash=" << ctx.hash << "\npolicy,exit,cost,accuracy,gt_prob\n";
  for (const auto &p : inputs.policies) {
    for (const auto &level : levels) {
      const auto res = simulate(p.trajectory, inputs.labels, level.model, n_trials, ctx.threads);
      sweep << p.name << ',' << level.label << ',' << fmt(level.parameter) << ',' << fmt(res.mean_accuracy) << ','
            << fmt(res.mean_gt_prob) << ',' << fmt(res.expected_accuracy) << ',' << fmt(res.expected_gt_prob)
            << '\n';
    }
    const auto q = per_exit_quality(p.trajectory, inputs.labels);
    for (std::size_t m = 0; m < q.accuracy.size(); ++m) {
      curve << p.name << ',' << m + 1 << ',' << fmt(inputs.costs[m]) << ',' << fmt(q.accuracy[m]) << ','
            << fmt(q.gt_prob[m]) << '\n';
    }
  }
  write_text(ctx.out / "sweep.csv", sweep.str());
  write_text(ctx.out / "curve.csv", curve.str());
  std::cout << "simulated " << inputs.policies.size() << " policies x " << levels.size() << " budgets\n";
  return 0;
}

TrainConfig train_config(const json &c) {
  TrainConfig cfg;
  cfg.epochs = get_or(c, "epochs", cfg.epochs);
  cfg.learning_rate = get_or(c, "learning_rate", cfg.learning_rate);
  cfg.batch_size = get_or(c, "batch_size", cfg.batch_size);
  cfg.momentum = get_or(c, "momentum", cfg.momentum);
  cfg.exit_loss_weights = get_or(c, "exit_loss_weights", cfg.exit_loss_weights);
  cfg.finetune_fraction = get_or(c, "finetune_fraction", cfg.finetune_fraction);
  cfg.finetune_lr_scale = get_or(c, "finetune_lr_scale", cfg.finetune_lr_scale);
  const auto objective = get_or<std::string>(c, "objective", "standard_nll");
  if (objective == "pa_finetune") {
    cfg.objective = Objective::pa_finetune;
  } else if (objective != "standard_nll") {
    throw ConfigError("objective must be standard_nll or pa_finetune");
  }
  return cfg;
}

int train_spirals(Context &ctx) {
  const auto &c = ctx.config;
  const auto n_classes = get_or<std::size_t>(c, "n_classes", 4);
  const auto n_exits = get_or<std::size_t>(c, "n_exits", 5);
  const auto width = get_or<std::size_t>(c, "width", 16);
  const auto noise = get_or(c, "noise", 0.03);
  const auto arc = get_or(c, "arc", kDefaultSpiralArc);
  auto cfg = train_config(c);
  cfg.seed = ctx.seed;
  cfg.validate(n_exits);
  const auto train_data = generate_spirals(get_or<std::size_t>(c, "n_per_class", 250), n_classes, noise,
                                           2 * ctx.seed + 1, arc);
  const auto test_data = generate_spirals(get_or<std::size_t>(c, "test_per_class", 1000), n_classes, noise,
                                          2 * ctx.seed + 2, arc);
  const auto result = train(ToyEENN(2, width, n_exits, n_classes, ctx.seed), train_data, cfg);

  ctx.hash = config_hash(ctx, {{"task", "spirals"}});
  fs::create_directories(ctx.out);
  std::ostringstream costs;
  for (std::size_t m = 1; m <= n_exits; ++m) costs << (m > 1 ? "," : "") << m;
  json manifest{{"config_hash", ctx.hash}, {"task", "spirals"}, {"files", json::array()}, {"test_accuracy", json::array()}};
  for (auto [name, data] : {std::pair{"train", &train_data}, std::pair{"test", &test_data}}) {
    auto ds = export_logits(result.model, *data, ctx.threads);
    ds.metadata = {{"config_hash", ctx.hash}, {"split", name}, {"exit_costs", costs.str()}, {"task", "spirals"}};
    save_binary(ds, ctx.out / (std::string(name) + ".aexl"));
    manifest["files"].push_back(std::string(name) + ".aexl");
    if (std::string(name) == "test") {
      const auto q = quality(softmax_latest(ds), ds.labels);
      for (std::size_t m = 0; m < n_exits; ++m) {
        double acc = 0.0;
        for (std::size_t n = 0; n < ds.n_samples; ++n) acc += q.correct(n, m);
        manifest["test_accuracy"].push_back(acc / static_cast<double>(ds.n_samples));
      }
    }
  }
  save_model(result.model, ctx.out / "model.aexm");
  manifest["files"].push_back("model.aexm");
  std::ostringstream loss;
  loss << "# config_hash=" << ctx.hash << "\nepoch,loss\n";
  for (std::size_t e = 0; e < result.loss_curve.size(); ++e) loss << e << ',' << fmt(result.loss_curve[e]) << '\n';
  write_text(ctx.out / "loss.csv", loss.str());
  manifest["files"].push_back("loss.csv");
  write_json(ctx.out / "manifest.json", manifest);
  std::cout << "trained " << n_exits << "-exit model; final test accuracy "
            << fmt(manifest["test_accuracy"].back().get<double>()) << '\n';
  return 0;
}

int train_regression(Context &ctx) {
  const auto &c = ctx.config;
  IntervalTrainConfig cfg;
  cfg.hidden = get_or(c, "hidden", cfg.hidden);
  cfg.epochs = get_or(c, "epochs", cfg.epochs);
  cfg.learning_rate = get_or(c, "learning_rate", cfg.learning_rate);
  cfg.batch_size = get_or(c, "batch_size", cfg.batch_size);
  cfg.momentum = get_or(c, "momentum", cfg.momentum);
  cfg.containment_penalty = get_or(c, "containment_penalty", cfg.containment_penalty);
  cfg.seed = ctx.seed;
  const auto n_members = get_or<std::size_t>(c, "n_members", 5);
  if (n_members < 1) throw ConfigError("n_members must be >= 1");
  const auto data = generate_simple1d(get_or<std::size_t>(c, "n_train", 200), ctx.seed);
  const auto ens = train_interval_ensemble(data, n_members, cfg);

  std::vector<std::vector<std::size_t>> orders;
  if (c.contains("orders")) {
    orders = c.at("orders").get<std::vector<std::vector<std::size_t>>>();
  } else {
    std::vector<std::size_t> fwd(n_members);
    std::iota(fwd.begin(), fwd.end(), std::size_t{0});
    orders = {fwd, std::vector<std::size_t>(fwd.rbegin(), fwd.rend())};
  }
  for (const auto &o : orders) {
    auto sorted = o;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted.size() != n_members || sorted[i] != i) throw ConfigError("each order must permute 0..n_members-1");
    }
  }
  const auto lo = get_or(c, "grid_min", -3.0), hi = get_or(c, "grid_max", 3.0);
  const auto points = get_or<std::size_t>(c, "grid_points", 121);
  if (points < 2 || !(hi > lo)) throw ConfigError("grid needs grid_max > grid_min and at least 2 points");

  ctx.hash = config_hash(ctx, {{"task", "regression"}});
  fs::create_directories(ctx.out);
  std::ostringstream grid, train_csv;
  grid << "# config_hash=" << ctx.hash
       << "\norder,x,members,member_lower,member_upper,product_lower,product_upper,product_width,empty\n";
  json report{{"config_hash", ctx.hash}, {"task", "regression"}, {"n_members", n_members}, {"orders", orders},
              {"per_order", json::array()}};
  for (std::size_t o = 0; o < orders.size(); ++o) {
    std::vector<double> coverage(n_members, 0.0), width(n_members, 0.0);
    std::vector<std::size_t> width_count(n_members, 0);
    for (std::size_t i = 0; i < points; ++i) {
      const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
      std::vector<Interval> members;
      for (auto idx : orders[o]) members.push_back(ens.members[idx].predict(x));
      const auto products = anytime_intervals(members);
      for (std::size_t m = 0; m < n_members; ++m) {
        grid << o << ',' << fmt(x) << ',' << m + 1 << ',' << fmt(members[m].lower) << ',' << fmt(members[m].upper)
             << ',';
        if (products[m]) {
          grid << fmt(products[m]->lower) << ',' << fmt(products[m]->upper) << ',' << fmt(products[m]->width())
               << ",0\n";
        } else {
          grid << ",,0,1\n";
        }
      }
    }
    for (std::size_t n = 0; n < data.size(); ++n) {
      std::vector<Interval> members;
      for (auto idx : orders[o]) members.push_back(ens.members[idx].predict(data.x[n]));
      const auto products = anytime_intervals(members);
      for (std::size_t m = 0; m < n_members; ++m) {
        if (!products[m]) continue;
        coverage[m] += products[m]->lower <= data.y[n] && data.y[n] <= products[m]->upper;
        width[m] += products[m]->width();
        ++width_count[m];
      }
    }
    for (std::size_t m = 0; m < n_members; ++m) {
      coverage[m] /= static_cast<double>(data.size());
      width[m] = width_count[m] ? width[m] / static_cast<double>(width_count[m]) : 0.0;
    }
    report["per_order"].push_back({{"train_coverage", coverage}, {"mean_train_width", width}});
  }
  train_csv << "# config_hash=" << ctx.hash << "\nx,y\n";
  for (std::size_t n = 0; n < data.size(); ++n) train_csv << fmt(data.x[n]) << ',' << fmt(data.y[n]) << '\n';
  write_text(ctx.out / "intervals.csv", grid.str());
  write_text(ctx.out / "regression_data.csv", train_csv.str());
  write_json(ctx.out / "regression_report.json", report);
  std::cout << "trained " << n_members << "-member interval ensemble\n";
  return 0;
}

int cmd_train_toy(Context &ctx, bool regression) {
  const auto task = get_or<std::string>(ctx.config, "task", "spirals");
  if (regression || task == "regression") return train_regression(ctx);
  if (task != "spirals") throw ConfigError("task must be spirals or regression");
  return train_spirals(ctx);
}

int cmd_report(Context &ctx, const std::string &metrics_flag) {
  std::string metrics_path = metrics_flag;
  if (metrics_path.empty()) metrics_path = get_or<std::string>(ctx.config, "metrics", "");
  if (metrics_path.empty()) throw ConfigError("report needs 'metrics' (a metrics.csv from evaluate)");
  const auto path = metrics_flag.empty() ? resolve(ctx, metrics_path) : fs::path(metrics_path);
  if (!fs::exists(path)) throw DataError("metrics file not found: " + path.string());
  const auto report = read_metrics_csv(path);
  ctx.hash = config_hash(ctx, {{"metrics", path.filename().string()}});
  fs::create_directories(ctx.out);

  std::vector<std::string> methods;
  for (const auto &r : report.rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  auto per_exit_series = [&](const std::string &metric) {
    std::vector<Series> out;
    for (const auto &method : methods) {
      Series s{method, {}, {}};
      for (const auto &r : report.rows) {
        if (r.method == method && r.exit > 0 && r.metric == metric) {
          s.x.push_back(static_cast<double>(r.exit));
          s.y.push_back(r.value);
        }
      }
      if (!s.x.empty()) out.push_back(std::move(s));
    }
    return out;
  };
  auto threshold_series = [&](const std::string &prefix) {
    std::vector<Series> out;
    for (const auto &method : methods) {
      Series s{method, {}, {}};
      for (const auto &r : report.rows) {
        if (r.method == method && r.exit == 0 && r.metric.rfind(prefix, 0) == 0) {
          s.x.push_back(std::stod(r.metric.substr(prefix.size())));
          s.y.push_back(r.value);
        }
      }
      if (!s.x.empty()) out.push_back(std::move(s));
    }
    return out;
  };
  struct Chart {
    std::string file, title, x, y;
    std::vector<Series> series;
  };
  const std::vector<Chart> charts{
      {"accuracy.svg", "Accuracy per exit", "exit", "accuracy", per_exit_series("accuracy")},
      {"gt_prob.svg", "Mean ground-truth probability", "exit", "p(y|x)", per_exit_series("mean_gt_prob")},
      {"ntau_mpd.svg", "Samples with ground-truth probability drop >= tau", "tau", "% of samples",
       threshold_series("pct_mpd_ge_")},
      {"ntau_mui_entropy.svg", "Samples with entropy increase >= tau", "tau", "% of samples",
       threshold_series("pct_mui_entropy_ge_")},
      {"hindsight.svg", "Hindsight improvability", "exit", "%", per_exit_series("hindsight_improvability")},
      {"set_size.svg", "Mean conformal set size", "exit", "classes", per_exit_series("mean_set_size")},
  };
  json index{{"config_hash", ctx.hash}, {"charts", json::array()}};
  for (const auto &chart : charts) {
    if (chart.series.empty()) continue;
    auto svg = svg_line_chart(chart.title, chart.x, chart.y, chart.series);
    svg.insert(svg.find('\n') + 1, "<!-- config_hash=" + ctx.hash + " -->\n");
    write_text(ctx.out / chart.file, svg);
    index["charts"].push_back(chart.file);
  }
  write_json(ctx.out / "report.json", index);
  std::cout << "wrote " << index["charts"].size() << " charts to " << ctx.out.string() << '\n';
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Anytime early-exit toolkit: transforms, metrics, conformal sets and budget simulation"};
  app.require_subcommand(1);
  std::string config_path, out, metrics;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool regression = false;

  struct Command {
    const char *name;
    const char *description;
    CLI::App *app = nullptr;
    CLI::Option *seed = nullptr;
    CLI::Option *out = nullptr;
  };
  std::vector<Command> commands{
      {"transform", "apply transform specs to an AEXL file, writing AEXP trajectories"},
      {"evaluate", "compute per-exit, per-sample and N_tau metrics"},
      {"train-toy", "train the toy early-exit MLP (or interval ensemble) and export logits"},
      {"conformal", "calibrate RAPS per exit and report coverage and set sizes"},
      {"simulate", "simulate budgeted interruption and sweep budgets"},
      {"report", "render SVG charts from an evaluate metrics.csv"},
  };
  for (auto &cmd : commands) {
    cmd.app = app.add_subcommand(cmd.name, cmd.description);
    auto *c = cmd.app->add_option("--config", config_path, "JSON configuration file")->envname("ANYTIME_CONFIG");
    if (std::string(cmd.name) != "report") c->required();
    cmd.seed = cmd.app->add_option("--seed", seed, "random seed (default: config 'seed' or 0)")
                   ->envname("ANYTIME_SEED");
    cmd.app->add_option("--threads", threads, "worker threads")
        ->envname("ANYTIME_THREADS")
        ->check(CLI::Range(1u, 1024u));
    cmd.out = cmd.app->add_option("--out", out, "output directory (default: config 'output_dir')")
                  ->envname("ANYTIME_OUT");
  }
  commands[2].app->add_flag("--regression", regression, "train the interval ensemble on simple-1d instead");
  commands[5].app->add_option("--metrics", metrics, "metrics.csv written by evaluate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    Context ctx;
    const auto &cmd = *std::find_if(commands.begin(), commands.end(), [](const Command &c) { return c.app->parsed(); });
    ctx.command = cmd.name;
    if (!config_path.empty()) {
      ctx.config = read_json(config_path);
      if (!ctx.config.is_object()) throw ConfigError("config must be a JSON object");
      ctx.config_dir = fs::path(config_path).parent_path();
      if (ctx.config_dir.empty()) ctx.config_dir = ".";
    }
    ctx.seed = cmd.seed->count() ? seed : get_or<std::uint64_t>(ctx.config, "seed", 0);
    ctx.threads = threads;
    if (cmd.out->count()) {
      ctx.out = out;
    } else if (ctx.config.contains("output_dir")) {
      ctx.out = resolve(ctx, ctx.config.at("output_dir").get<std::string>());
    }
    if (ctx.command == "transform") return cmd_transform(ctx);
    if (ctx.command == "evaluate") return cmd_evaluate(ctx);
    if (ctx.command == "train-toy") return cmd_train_toy(ctx, regression);
    if (ctx.command == "conformal") return cmd_conformal(ctx);
    if (ctx.command == "simulate") return cmd_simulate(ctx);
    return cmd_report(ctx, metrics);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const json::exception &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DivergenceError &e) {
    std::cerr << "training diverged at epoch " << e.epoch() << ": " << e.what() << '\n';
    return 2;
  } catch (const DataError &e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error &e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
}
