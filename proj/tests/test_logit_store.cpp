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

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include "anytime.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace anytime;
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> bytes_of(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path &p, const std::vector<unsigned char> &b) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os.write(reinterpret_cast<const char *>(b.data()), static_cast<std::streamsize>(b.size()));
}

// Little-endian encoder written independently of the library writer.
struct Encoder {
  std::vector<unsigned char> out;
  void tag(const char *s) { out.insert(out.end(), s, s + 4); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
};

} // namespace

TEST(LogitStore, LoadsHandEncodedFile) {
  TempDir dir;
  Encoder e;
  e.tag("AEXL");
  e.u32(1);
  e.u32(2);
  e.u32(2);
  e.u32(3);
  e.i32(1);
  e.i32(-1);
  for (int i = 0; i < 12; ++i) e.f32(0.25f * static_cast<float>(i) - 1.0f);
  write_bytes(dir / "a.aexl", e.out);
  const auto ds = load_binary(dir / "a.aexl");
  EXPECT_EQ(ds.n_samples, 2u);
  EXPECT_EQ(ds.n_exits, 2u);
  EXPECT_EQ(ds.n_classes, 3u);
  EXPECT_EQ(ds.labels, (std::vector<std::int32_t>{1, kUnlabeled}));
  EXPECT_DOUBLE_EQ(ds.at(1, 1, 2), 0.25 * 11 - 1.0);
  EXPECT_DOUBLE_EQ(ds.at(0, 1, 0), 0.25 * 3 - 1.0);
}

TEST(LogitStore, RejectsBadMagic) {
  TempDir dir;
  Encoder e;
  e.tag("XXXX");
  e.u32(1);
  e.u32(0);
  e.u32(1);
  e.u32(1);
  write_bytes(dir / "bad.aexl", e.out);
  EXPECT_THROW(load_binary(dir / "bad.aexl"), DataError);
}

TEST(LogitStore, RejectsVersionTruncationAndTrailingBytes) {
  TempDir dir;
  LogitDataset ds(2, 1, 2);
  ds.labels = {0, 1};
  save_binary(ds, dir / "ok.aexl");
  auto b = bytes_of(dir / "ok.aexl");

  auto v2 = b;
  v2[4] = 2;
  write_bytes(dir / "v2.aexl", v2);
  EXPECT_THROW(load_binary(dir / "v2.aexl"), DataError);

  auto shorter = b;
  shorter.pop_back();
  write_bytes(dir / "short.aexl", shorter);
  EXPECT_THROW(load_binary(dir / "short.aexl"), DataError);

  auto longer = b;
  longer.push_back(0);
  write_bytes(dir / "long.aexl", longer);
  EXPECT_THROW(load_binary(dir / "long.aexl"), DataError);
}

TEST(LogitStore, RejectsOutOfRangeLabelAndNonFiniteLogit) {
  TempDir dir;
  Encoder e;
  e.tag("AEXL");
  e.u32(1);
  e.u32(1);
  e.u32(1);
  e.u32(2);
  e.i32(2);
  e.f32(0.0f);
  e.f32(1.0f);
  write_bytes(dir / "label.aexl", e.out);
  EXPECT_THROW(load_binary(dir / "label.aexl"), DataError);

  Encoder f;
  f.tag("AEXL");
  f.u32(1);
  f.u32(1);
  f.u32(1);
  f.u32(2);
  f.i32(0);
  f.f32(std::numeric_limits<float>::quiet_NaN());
  f.f32(1.0f);
  write_bytes(dir / "nan.aexl", f.out);
  EXPECT_THROW(load_binary(dir / "nan.aexl"), DataError);
}

TEST(LogitStore, SmallestFileIs32Bytes) {
  TempDir dir;
  LogitDataset ds(1, 1, 2);
  ds.logits = {0.5, -0.5};
  ds.labels = {0};
  save_binary(ds, dir / "one.aexl");
  EXPECT_EQ(fs::file_size(dir / "one.aexl"), 32u);
  EXPECT_EQ(aexl_size(1, 1, 2), 32u);
  Encoder e;
  e.tag("AEXL");
  e.u32(1);
  e.u32(1);
  e.u32(1);
  e.u32(2);
  e.i32(0);
  e.f32(0.5f);
  e.f32(-0.5f);
  EXPECT_EQ(bytes_of(dir / "one.aexl"), e.out);
}

TEST(LogitStore, EmptyDatasetRoundTrips) {
  TempDir dir;
  LogitDataset ds(0, 3, 4);
  save_binary(ds, dir / "empty.aexl");
  EXPECT_EQ(fs::file_size(dir / "empty.aexl"), 20u);
  const auto back = load_binary(dir / "empty.aexl");
  EXPECT_EQ(back.n_samples, 0u);
  EXPECT_EQ(back.n_exits, 3u);
  EXPECT_EQ(back.n_classes, 4u);
}

TEST(LogitStore, RoundTripIsBitIdentical) {
  TempDir dir;
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto ds = oracle::random_dataset(rng, 1 + trial, 1 + trial % 4, 2 + trial % 5);
    for (double &v : ds.logits) v = static_cast<float>(v * 10.0);
    ds.labels[0] = kUnlabeled;
    save_binary(ds, dir / "a.aexl");
    const auto back = load_binary(dir / "a.aexl");
    EXPECT_EQ(back, ds);
    EXPECT_EQ(fs::file_size(dir / "a.aexl"), aexl_size(ds.n_samples, ds.n_exits, ds.n_classes));
    save_binary(back, dir / "b.aexl");
    EXPECT_EQ(bytes_of(dir / "a.aexl"), bytes_of(dir / "b.aexl"));
  }
}

TEST(LogitStore, SidecarMetadataRoundTrips) {
  TempDir dir;
  LogitDataset ds(1, 2, 2);
  ds.labels = {1};
  ds.metadata = {{"exit_costs", "1,3"}, {"source", "unit"}};
  save_binary(ds, dir / "m.aexl");
  EXPECT_TRUE(fs::exists(dir / "m.meta.json"));
  const auto back = load_binary(dir / "m.aexl");
  EXPECT_EQ(back.metadata, ds.metadata);
  EXPECT_EQ(back.exit_costs(), (std::vector<double>{1.0, 3.0}));
  LogitDataset plain(1, 3, 2);
  EXPECT_EQ(plain.exit_costs(), (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(LogitStore, CsvParsesUnicodeMinus) {
  TempDir dir;
  write_text(dir / "a.csv", "2, 1.0,0.0,\xE2\x88\x92" "1.0, 0.5,2.0,0.1\n");
  const auto ds = load_csv(dir / "a.csv", 2, 3);
  EXPECT_EQ(ds.n_samples, 1u);
  EXPECT_EQ(ds.labels[0], 2);
  EXPECT_DOUBLE_EQ(ds.at(0, 0, 2), -1.0);
  EXPECT_DOUBLE_EQ(ds.at(0, 1, 1), 2.0);
}

TEST(LogitStore, CsvRejectsWrongColumnCount) {
  TempDir dir;
  write_text(dir / "a.csv", "1,0.1,0.2,0.3,0.4\n");
  EXPECT_THROW(load_csv(dir / "a.csv", 2, 3), DataError);
  write_text(dir / "b.csv", "1,0.1,abc,0.3,0.4,0.5,0.6\n");
  EXPECT_THROW(load_csv(dir / "b.csv", 2, 3), DataError);
}

TEST(LogitStore, CsvBinaryCsvRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(11);
  auto ds = oracle::random_dataset(rng, 7, 3, 4);
  save_csv(ds, dir / "a.csv");
  const auto from_csv = load_csv(dir / "a.csv", 3, 4);
  save_binary(from_csv, dir / "a.aexl");
  const auto from_bin = load_binary(dir / "a.aexl");
  save_csv(from_bin, dir / "b.csv");
  EXPECT_EQ(bytes_of(dir / "a.csv"), bytes_of(dir / "b.csv"));
  for (std::size_t i = 0; i < ds.logits.size(); ++i) {
    EXPECT_EQ(from_bin.logits[i], static_cast<double>(static_cast<float>(ds.logits[i])));
  }
}

TEST(LogitStore, SplitCardinalityDeterminismAndPartition) {
  const auto a = split(10, 0.2, 7);
  EXPECT_EQ(a.calibration_indices.size(), 2u);
  EXPECT_EQ(a.evaluation_indices.size(), 8u);
  const auto b = split(10, 0.2, 7);
  EXPECT_EQ(a.calibration_indices, b.calibration_indices);
  EXPECT_EQ(a.evaluation_indices, b.evaluation_indices);

  const auto c = split(100, 0.2, 1);
  std::multiset<std::size_t> all(c.calibration_indices.begin(), c.calibration_indices.end());
  all.insert(c.evaluation_indices.begin(), c.evaluation_indices.end());
  EXPECT_EQ(all.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(all.count(i), 1u);

  EXPECT_THROW(split(10, 0.0, 1), ConfigError);
  EXPECT_THROW(split(10, 1.0, 1), ConfigError);
  EXPECT_THROW(split(3, 0.01, 1), ConfigError);
}

TEST(Trajectory, AexpRoundTripAndSize) {
  TempDir dir;
  std::mt19937_64 rng(5);
  const auto ds = oracle::random_dataset(rng, 6, 3, 4);
  const auto traj = product_anytime(ds, ExitWeights::linear(3), ActivationSpec{});
  save_trajectory(traj, ds.labels, dir / "t.aexp");
  EXPECT_EQ(fs::file_size(dir / "t.aexp"), aexp_size(6, 3, 4));
  const auto back = load_trajectory(dir / "t.aexp");
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.trajectory.degenerate, traj.degenerate);
  for (std::size_t i = 0; i < traj.probs.size(); ++i) {
    EXPECT_EQ(back.trajectory.probs[i], static_cast<double>(static_cast<float>(traj.probs[i])));
  }
  EXPECT_THROW(load_binary(dir / "t.aexp"), DataError);
}
