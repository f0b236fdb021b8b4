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

#include <cstdlib>
#include <random>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "anytime.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace anytime;
using nlohmann::json;

namespace {

int run(const std::string &args, const std::string &env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + ANYTIME_CLI_PATH + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config(const TempDir &dir, const std::string &name, const json &j) {
  const auto path = dir / name;
  write_text(path, j.dump(2));
  return path.string();
}

// CSV body without the leading config-hash comment.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path &p) {
  std::istringstream is(read_text(p));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

void write_random_input(const TempDir &dir, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  save_binary(oracle::random_dataset(rng, 40, 3, 4), dir / "in.aexl");
}

} // namespace

TEST(Cli, TransformWritesDeterministicTrajectories) {
  TempDir dir;
  write_random_input(dir, 1);
  const auto cfg = config(dir, "t.json",
                          {{"input", "in.aexl"},
                           {"transforms", {{{"name", "pa"}, {"method", "product_anytime"}}, {{"name", "ca"}, {"method", "ca"}}}}});
  ASSERT_EQ(run("transform --config " + cfg + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run("transform --config " + cfg + " --out " + (dir / "b").string() + " --threads 3"), 0);
  EXPECT_EQ(read_text(dir / "a/pa.aexp"), read_text(dir / "b/pa.aexp"));
  EXPECT_EQ(read_text(dir / "a/manifest.json"), read_text(dir / "b/manifest.json"));
  const auto loaded = load_trajectory(dir / "a/pa.aexp");
  EXPECT_EQ(loaded.trajectory.n_exits, 3u);
  EXPECT_EQ(loaded.trajectory.degenerate.size(), 40u * 3u);
  const auto manifest = json::parse(read_text(dir / "a/manifest.json"));
  EXPECT_EQ(manifest["outputs"].size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "a/pa.meta.json"));
}

TEST(Cli, ErrorsMapToExitCodes) {
  TempDir dir;
  write_random_input(dir, 2);
  const auto unknown = config(dir, "u.json", {{"input", "in.aexl"}, {"transforms", {{{"method", "bogus"}}}}});
  EXPECT_EQ(run("transform --config " + unknown + " --out " + (dir / "o").string()), 1);
  const auto missing = config(dir, "m.json", {{"input", "nope.aexl"}});
  EXPECT_EQ(run("transform --config " + missing + " --out " + (dir / "o").string()), 2);
  write_text(dir / "bad.aexl", "XXXX0000");
  const auto bad = config(dir, "b.json", {{"input", "bad.aexl"}});
  EXPECT_EQ(run("evaluate --config " + bad + " --out " + (dir / "o").string()), 2);
  EXPECT_EQ(run("transform --config " + (dir / "absent.json").string()), 1);
  EXPECT_EQ(run("transform"), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("evaluate --config " + missing + " --threads 0"), 1);
}

TEST(Cli, EvaluateMonotoneInputHasNoDrops) {
  TempDir dir;
  // gt probability strictly rising at every exit
  LogitDataset ds(20, 4, 3);
  for (std::size_t n = 0; n < 20; ++n) {
    ds.labels[n] = static_cast<std::int32_t>(n % 3);
    for (std::size_t m = 0; m < 4; ++m) ds.at(n, m, static_cast<std::size_t>(ds.labels[n])) = static_cast<double>(m + 1);
  }
  save_binary(ds, dir / "mono.aexl");
  const auto cfg = config(dir, "e.json",
                          {{"input", "mono.aexl"}, {"transforms", {{{"name", "softmax"}, {"method", "softmax_latest"}}}}});
  ASSERT_EQ(run("evaluate --config " + cfg + " --out " + (dir / "o").string()), 0);
  const auto metrics = read_metrics_csv(dir / "o/metrics.csv");
  for (double tau : kDefaultThresholds) EXPECT_EQ(metrics.find("softmax", 0, threshold_key("n_mpd_ge_", tau)), 0.0);
  const auto samples = read_csv(dir / "o/samples.csv");
  ASSERT_EQ(samples.size(), 21u);
  EXPECT_EQ(samples[0][3], "mpd_star");
  for (std::size_t i = 1; i < samples.size(); ++i) EXPECT_EQ(samples[i][3], "0");
  EXPECT_TRUE(std::filesystem::exists(dir / "o/ntau.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "o/per_exit.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "o/metrics.json"));
}

TEST(Cli, TrainToySpiralsIsReproducible) {
  TempDir dir;
  const auto cfg = config(dir, "toy.json", {{"epochs", 3}, {"n_per_class", 30}, {"test_per_class", 20}});
  ASSERT_EQ(run("train-toy --config " + cfg + " --seed 0 --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run("train-toy --config " + cfg + " --seed 0 --out " + (dir / "b").string() + " --threads 2"), 0);
  const auto ds = load_binary(dir / "a/test.aexl");
  EXPECT_EQ(ds.n_exits, 5u);
  EXPECT_EQ(ds.n_classes, 4u);
  EXPECT_EQ(ds.n_samples, 80u);
  EXPECT_EQ(ds.exit_costs(), (std::vector<double>{1, 2, 3, 4, 5}));
  EXPECT_EQ(read_text(dir / "a/test.aexl"), read_text(dir / "b/test.aexl"));
  EXPECT_EQ(read_text(dir / "a/train.aexl"), read_text(dir / "b/train.aexl"));
  EXPECT_EQ(read_text(dir / "a/model.aexm"), read_text(dir / "b/model.aexm"));
  ASSERT_EQ(run("train-toy --config " + cfg + " --seed 1 --out " + (dir / "c").string()), 0);
  EXPECT_NE(read_text(dir / "a/test.aexl"), read_text(dir / "c/test.aexl"));
}

TEST(Cli, TrainToyRegressionWritesIntervalReport) {
  TempDir dir;
  const auto cfg = config(dir, "reg.json", {{"epochs", 20}, {"n_members", 3}, {"grid_points", 11}});
  ASSERT_EQ(run("train-toy --regression --config " + cfg + " --out " + (dir / "r").string()), 0);
  const auto report = json::parse(read_text(dir / "r/regression_report.json"));
  EXPECT_TRUE(report.contains("per_order"));
  const auto rows = read_csv(dir / "r/intervals.csv");
  ASSERT_GT(rows.size(), 1u);
  // two default orders x 11 grid points x 3 members
  EXPECT_EQ(rows.size() - 1, 2u * 11u * 3u);
}

TEST(Cli, SimulateFixedHaltMatchesEvaluateAccuracy) {
  TempDir dir;
  write_random_input(dir, 3);
  const json transforms = {{{"name", "softmax"}, {"method", "softmax_latest"}}, {{"name", "pa"}, {"method", "pa"}}};
  const auto cfg = config(dir, "s.json",
                          {{"input", "in.aexl"},
                           {"transforms", transforms},
                           {"n_trials", 5},
                           {"budgets", {{{"halt", "fixed_budget"}, {"budget", 1}},
                                        {{"halt", "fixed_budget"}, {"budget", 3}},
                                        {{"halt", "uniform_over_exits"}}}}});
  ASSERT_EQ(run("simulate --config " + cfg + " --out " + (dir / "o").string()), 0);
  ASSERT_EQ(run("evaluate --config " + cfg + " --out " + (dir / "o").string()), 0);
  const auto metrics = read_metrics_csv(dir / "o/metrics.csv");
  const auto sweep = read_csv(dir / "o/sweep.csv");
  ASSERT_EQ(sweep.size(), 1u + 2u * 3u);
  EXPECT_EQ(sweep[1][0], "softmax");
  EXPECT_EQ(sweep[4][0], "pa");
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    if (sweep[i][1].rfind("fixed_", 0) != 0) continue;
    const auto exit = static_cast<std::size_t>(std::stod(sweep[i][2]));
    EXPECT_EQ(std::stod(sweep[i][3]), *metrics.find(sweep[i][0], exit, "accuracy")) << sweep[i][1];
  }
  const auto bad = config(dir, "bad.json", {{"input", "in.aexl"}, {"budgets", {{{"halt", "fixed_budget"}, {"budget", -1}}}}});
  EXPECT_EQ(run("simulate --config " + bad + " --out " + (dir / "o").string()), 1);
  const auto none = config(dir, "none.json", {{"input", "in.aexl"}, {"budgets", json::array()}});
  EXPECT_EQ(run("simulate --config " + none + " --out " + (dir / "o").string()), 1);
}

TEST(Cli, ConformalAndReportOutputs) {
  TempDir dir;
  write_random_input(dir, 4);
  const auto cfg = config(dir, "c.json", {{"input", "in.aexl"}, {"conformal", {{"alpha", 0.2}}}});
  ASSERT_EQ(run("conformal --config " + cfg + " --out " + (dir / "o").string()), 0);
  const auto cov = read_csv(dir / "o/coverage.csv");
  EXPECT_EQ(cov[0][0], "method");
  EXPECT_GT(cov.size(), 1u);
  ASSERT_EQ(run("evaluate --config " + cfg + " --out " + (dir / "o").string()), 0);
  ASSERT_EQ(run("report --metrics " + (dir / "o/metrics.csv").string() + " --out " + (dir / "charts").string()), 0);
  const auto svg = read_text(dir / "charts/accuracy.svg");
  EXPECT_NE(svg.find("config_hash="), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "charts/ntau_mpd.svg"));
  EXPECT_TRUE(std::filesystem::exists(dir / "charts/report.json"));
  EXPECT_EQ(run("report --out " + (dir / "charts").string()), 1);
}

TEST(Cli, EnvironmentOverridesFlags) {
  TempDir dir;
  write_random_input(dir, 5);
  const auto cfg = config(dir, "t.json", {{"input", "in.aexl"}, {"transforms", {{{"name", "pa"}}}}});
  ASSERT_EQ(run("transform", "ANYTIME_CONFIG=" + cfg + " ANYTIME_OUT=" + (dir / "env").string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "env/manifest.json"));
  ASSERT_EQ(run("transform --seed 3", "ANYTIME_CONFIG=" + cfg + " ANYTIME_OUT=" + (dir / "s3").string()), 0);
  ASSERT_EQ(run("transform", "ANYTIME_SEED=3 ANYTIME_CONFIG=" + cfg + " ANYTIME_OUT=" + (dir / "e3").string()), 0);
  EXPECT_EQ(read_text(dir / "s3/manifest.json"), read_text(dir / "e3/manifest.json"));
  EXPECT_NE(read_text(dir / "s3/manifest.json"), read_text(dir / "env/manifest.json"));
}
