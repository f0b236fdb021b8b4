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

// MetricReport: per-exit and per-sample tables for one or more methods,
// written as CSV (method,exit,metric,value) and JSON.

#ifndef ANYTIME_REPORT_HPP
#define ANYTIME_REPORT_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "anytime/conformal.hpp"
#include "anytime/logit_store.hpp"
#include "anytime/metrics.hpp"
#include "anytime/trajectory.hpp"
#include "json.hpp"

namespace anytime {

inline const std::vector<double> kDefaultThresholds{0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.75};

struct EvaluateOptions {
  std::vector<double> thresholds = kDefaultThresholds;
  std::size_t ece_bins = 15;
  double deferral_fraction = 0.005;
  ForgetCounting forget_counting = ForgetCounting::every_transition;
  std::optional<RapsConfig> conformal;
  std::optional<DatasetSplit> conformal_split;
};

/// exit == 0 marks a method-level aggregate (written as "all").
struct MetricRow {
  std::string method;
  std::size_t exit = 0;
  std::string metric;
  double value = 0.0;
};

struct SampleRow {
  std::string method;
  std::size_t sample = 0;
  std::int32_t label = kUnlabeled;
  std::map<std::string, double> values;
  std::vector<double> gt_prob; // empty when unlabeled
};

struct MetricReport {
  std::vector<MetricRow> rows;
  std::vector<SampleRow> samples;
  nlohmann::json extras = nlohmann::json::object(); // per-method conformal quantiles etc.

  std::optional<double> find(const std::string &method, std::size_t exit, const std::string &metric) const {
    for (const auto &r : rows) {
      if (r.method == method && r.exit == exit && r.metric == metric) return r.value;
    }
    return std::nullopt;
  }

  void append(MetricReport other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    samples.insert(samples.end(), other.samples.begin(), other.samples.end());
    for (auto &[k, v] : other.extras.items()) extras[k] = v;
  }
};

inline std::string threshold_key(const std::string &prefix, double tau) {
  std::ostringstream os;
  os << prefix << tau;
  return os.str();
}

/// Full metric suite for one trajectory. Label-dependent metrics use the
/// labeled samples only; full-model-prediction metrics use every sample.
inline MetricReport evaluate(const std::string &method, const ProbTrajectory &traj,
                             std::span<const std::int32_t> labels, const EvaluateOptions &opts = {}) {
  MetricReport report;
  const std::size_t M = traj.n_exits;
  auto add = [&](std::size_t exit, const std::string &metric, double value) {
    report.rows.push_back({method, exit, metric, value});
  };

  std::vector<std::size_t> labeled;
  std::vector<std::int32_t> labeled_y;
  for (std::size_t n = 0; n < traj.n_samples; ++n) {
    if (labels[n] != kUnlabeled) {
      labeled.push_back(n);
      labeled_y.push_back(labels[n]);
    }
  }
  const auto sub = traj.subset(labeled);
  const auto q = quality(sub, labeled_y);
  const auto conf = max_confidence(sub);
  const auto ent_all = entropy_per_sample(traj);
  const auto conf_all = max_confidence(traj);
  const auto full_all = full_model_prob(traj);

  std::size_t degenerate_total = 0;
  for (std::size_t m = 0; m < M; ++m) {
    const auto c = exit_column<double>(conf, M, m);
    const auto ok = exit_column<std::uint8_t>(q.correct.values, M, m);
    const auto gt = exit_column<double>(q.gt_prob, M, m);
    double acc = 0.0, mean_gt = 0.0;
    for (std::size_t i = 0; i < ok.size(); ++i) {
      acc += ok[i];
      mean_gt += gt[i];
    }
    const double nl = static_cast<double>(ok.size());
    double mean_ent = 0.0, mean_conf = 0.0, mean_full = 0.0;
    std::size_t degenerate = 0;
    for (std::size_t n = 0; n < traj.n_samples; ++n) {
      mean_ent += ent_all[n * M + m];
      mean_conf += conf_all[n * M + m];
      mean_full += full_all[n * M + m];
      degenerate += traj.is_degenerate(n, m) ? 1 : 0;
    }
    degenerate_total += degenerate;
    const double na = static_cast<double>(traj.n_samples);
    if (!ok.empty()) {
      add(m + 1, "accuracy", acc / nl);
      add(m + 1, "mean_gt_prob", mean_gt / nl);
      add(m + 1, "ece", ece(c, ok, opts.ece_bins));
      add(m + 1, "oc_auroc", oc_auroc(c, ok, opts.deferral_fraction));
    }
    if (traj.n_samples > 0) {
      add(m + 1, "mean_entropy", mean_ent / na);
      add(m + 1, "mean_confidence", mean_conf / na);
      add(m + 1, "mean_full_model_prob", mean_full / na);
      add(m + 1, "degenerate_percent", 100.0 * static_cast<double>(degenerate) / na);
    }
  }
  if (traj.n_samples > 0) {
    add(0, "degenerate_percent", 100.0 * static_cast<double>(degenerate_total) / static_cast<double>(traj.n_samples * M));
  }

  if (!labeled.empty()) {
    const auto hi = hindsight_improvability(q.correct);
    const auto lf = learn_forget(q.correct, opts.forget_counting);
    for (std::size_t m = 0; m < M; ++m) {
      add(m + 1, "hindsight_improvability", hi[m]);
      add(m + 1, "learned", static_cast<double>(lf.learned[m]));
      add(m + 1, "forgot", static_cast<double>(lf.forgot[m]));
    }
    const auto mz = mono_zero_percent(q.correct);
    add(0, "mono_percent", mz.mono_percent);
    add(0, "zero_percent", mz.zero_percent);
    const auto ot = overthinking(q.correct);
    add(0, "oracle_accuracy", ot.oracle_accuracy);
    add(0, "final_accuracy", ot.final_accuracy);
    add(0, "overthinking", ot.overthinking);
  }

  // Conditional monotonicity curves: N_tau over MPD* of the ground-truth
  // probability, of the full-model-prediction probability, and of max
  // confidence; N_tau over MUI of entropy.
  const auto mpd_gt = per_sample(q.gt_prob, M, [](auto s) { return mpd_star(s); });
  const auto mpd_full = per_sample(full_all, M, [](auto s) { return mpd_star(s); });
  const auto mpd_conf = per_sample(conf_all, M, [](auto s) { return mpd_star(s); });
  const auto mui_ent = per_sample(ent_all, M, [](auto s) { return mui(s); });
  auto emit_counts = [&](const std::string &name, const std::vector<double> &values) {
    const auto counts = count_exceeding(values, opts.thresholds);
    for (std::size_t t = 0; t < counts.size(); ++t) {
      add(0, threshold_key("n_" + name + "_ge_", opts.thresholds[t]), static_cast<double>(counts[t]));
      add(0, threshold_key("pct_" + name + "_ge_", opts.thresholds[t]),
          values.empty() ? 0.0 : 100.0 * static_cast<double>(counts[t]) / static_cast<double>(values.size()));
    }
  };
  if (!labeled.empty()) emit_counts("mpd", mpd_gt);
  emit_counts("mpd_full", mpd_full);
  emit_counts("mpd_conf", mpd_conf);
  emit_counts("mui_entropy", mui_ent);
  std::size_t conf_drops = 0;
  for (double v : mpd_conf) conf_drops += v > 0.0 ? 1 : 0;
  add(0, "n_confidence_decreases", static_cast<double>(conf_drops));

  std::vector<double> set_size_table;
  if (opts.conformal && opts.conformal_split) {
    const auto calib = calibrate(traj, labels, *opts.conformal_split, *opts.conformal);
    const auto cov = coverage_and_size(traj, labels, calib, *opts.conformal_split, *opts.conformal);
    for (std::size_t m = 0; m < M; ++m) {
      add(m + 1, "conformal_quantile", calib.quantiles[m]);
      add(m + 1, "conformal_coverage", cov[m].coverage);
      add(m + 1, "mean_set_size", cov[m].mean_set_size);
    }
    report.extras[method] = {{"conformal_quantiles", calib.quantiles}};
    set_size_table = set_sizes(traj, calib, *opts.conformal);
    const auto mui_sets = per_sample(set_size_table, M, [](auto s) { return mui(s); });
    emit_counts("mui_set_size", mui_sets);
  }

  std::size_t li = 0;
  for (std::size_t n = 0; n < traj.n_samples; ++n) {
    SampleRow row{method, n, labels[n], {}, {}};
    row.values["mpd_full"] = mpd_full[n];
    row.values["mpd_conf"] = mpd_conf[n];
    row.values["mui_entropy"] = mui_ent[n];
    if (!set_size_table.empty()) {
      row.values["mui_set_size"] = mui(std::span<const double>(set_size_table).subspan(n * M, M));
    }
    if (labels[n] != kUnlabeled) {
      row.values["mpd_star"] = mpd_gt[li];
      const auto r = q.correct.row(li);
      row.values["mono"] = std::is_sorted(r.begin(), r.end()) ? 1.0 : 0.0;
      row.values["zero"] = std::none_of(r.begin(), r.end(), [](auto v) { return v != 0; }) ? 1.0 : 0.0;
      const auto g = q.gt_row(li);
      row.gt_prob.assign(g.begin(), g.end());
      ++li;
    }
    report.samples.push_back(std::move(row));
  }
  return report;
}

namespace detail {

inline std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

} // namespace detail

/// Header comment carrying the config hash, then method,exit,metric,value.
inline void write_metrics_csv(const MetricReport &report, const std::filesystem::path &path,
                              const std::string &config_hash) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << "# config_hash=" << config_hash << '\n';
  os << "method,exit,metric,value\n";
  for (const auto &r : report.rows) {
    os << r.method << ',' << (r.exit == 0 ? std::string("all") : std::to_string(r.exit)) << ',' << r.metric << ','
       << detail::format_value(r.value) << '\n';
  }
}

/// One row per (method, sample): scalar columns, then gt_prob_1..gt_prob_M.
inline void write_samples_csv(const MetricReport &report, std::size_t n_exits, const std::filesystem::path &path,
                              const std::string &config_hash) {
  static const std::vector<std::string> columns{"mpd_star", "mpd_full", "mpd_conf", "mui_entropy",
                                                "mui_set_size", "mono", "zero"};
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << "# config_hash=" << config_hash << '\n';
  os << "method,sample,label";
  for (const auto &c : columns) os << ',' << c;
  for (std::size_t m = 1; m <= n_exits; ++m) os << ",gt_prob_" << m;
  os << '\n';
  for (const auto &s : report.samples) {
    os << s.method << ',' << s.sample << ',' << s.label;
    for (const auto &c : columns) {
      os << ',';
      if (auto it = s.values.find(c); it != s.values.end()) os << detail::format_value(it->second);
    }
    for (std::size_t m = 0; m < n_exits; ++m) {
      os << ',';
      if (!s.gt_prob.empty()) os << detail::format_value(s.gt_prob[m]);
    }
    os << '\n';
  }
}

/// N_tau curve in plot-ready form: method,curve,tau,count,percent.
inline void write_ntau_csv(const MetricReport &report, const std::filesystem::path &path,
                           const std::string &config_hash) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << "# config_hash=" << config_hash << '\n';
  os << "method,curve,tau,count,percent\n";
  for (const auto &r : report.rows) {
    if (r.exit != 0 || r.metric.rfind("n_", 0) != 0) continue;
    const auto ge = r.metric.find("_ge_");
    if (ge == std::string::npos) continue;
    const auto curve = r.metric.substr(2, ge - 2);
    const auto tau = r.metric.substr(ge + 4);
    const auto pct = report.find(r.method, 0, "pct_" + r.metric.substr(2));
    os << r.method << ',' << curve << ',' << tau << ',' << detail::format_value(r.value) << ','
       << detail::format_value(pct.value_or(0.0)) << '\n';
  }
}

inline nlohmann::json to_json(const MetricReport &report, const std::string &config_hash) {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["rows"] = nlohmann::json::array();
  for (const auto &r : report.rows) {
    j["rows"].push_back({{"method", r.method},
                         {"exit", r.exit == 0 ? nlohmann::json("all") : nlohmann::json(r.exit)},
                         {"metric", r.metric},
                         {"value", std::isnan(r.value) ? nlohmann::json() : nlohmann::json(r.value)}});
  }
  j["extras"] = report.extras;
  return j;
}

/// Reads back a metrics CSV written by write_metrics_csv.
inline MetricReport read_metrics_csv(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  MetricReport report;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string method, exit, metric, value;
    std::getline(ss, method, ',');
    std::getline(ss, exit, ',');
    std::getline(ss, metric, ',');
    std::getline(ss, value, ',');
    report.rows.push_back({method, exit == "all" ? 0 : std::stoul(exit), metric,
                           value == "nan" ? std::nan("") : std::stod(value)});
  }
  return report;
}

/// Self-contained SVG line chart; one polyline per series.
struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

inline std::string svg_line_chart(const std::string &title, const std::string &x_label, const std::string &y_label,
                                  const std::vector<Series> &series) {
  static const char *palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};
  constexpr double W = 640, H = 400, left = 70, right = 160, top = 40, bottom = 50;
  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  for (const auto &s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  }
  if (x_lo > x_hi) x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  if (x_hi == x_lo) x_hi = x_lo + 1;
  if (y_hi == y_lo) y_hi = y_lo + 1;
  auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * (W - left - right); };
  auto py = [&](double y) { return H - bottom - (y - y_lo) / (y_hi - y_lo) * (H - top - bottom); };
  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << x_label
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2 << ")\" text-anchor=\"middle\">"
     << y_label << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double yv = y_lo + (y_hi - y_lo) * t / 4.0;
    const double xv = x_lo + (x_hi - x_lo) * t / 4.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << yv
       << "</text>\n";
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - bottom + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
       << xv << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char *color = palette[s % std::size(palette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (!std::isfinite(series[s].y[i])) continue;
      os << px(series[s].x[i]) << ',' << py(series[s].y[i]) << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << W - right + 10 << "\" y=\"" << top + 18 * (s + 1) << "\" fill=\"" << color
       << "\" font-size=\"12\">" << series[s].name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

} // namespace anytime

#endif // ANYTIME_REPORT_HPP
