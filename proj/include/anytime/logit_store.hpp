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

// Per-exit logit datasets and the AEXL interchange format.
//
// AEXL layout (all little-endian):
//   bytes  0..3   magic "AEXL"
//   bytes  4..7   u32 version (= 1)
//   bytes  8..19  u32 N, M, K
//   then N        i32 labels (-1 = unlabeled)
//   then N*M*K    f32 logits, sample-major, then exit, then class
//
// Metadata lives in an optional `<stem>.meta.json` sidecar.

#ifndef ANYTIME_LOGIT_STORE_HPP
#define ANYTIME_LOGIT_STORE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "anytime/detail/util.hpp"
#include "anytime/error.hpp"
#include "json.hpp"

namespace anytime {

inline constexpr std::int32_t kUnlabeled = -1;

struct LogitDataset {
  std::size_t n_samples = 0;
  std::size_t n_exits = 0;
  std::size_t n_classes = 0;
  std::vector<double> logits; // [sample][exit][class]
  std::vector<std::int32_t> labels;
  std::map<std::string, std::string> metadata;

  LogitDataset() = default;
  LogitDataset(std::size_t n, std::size_t m, std::size_t k)
      : n_samples(n), n_exits(m), n_classes(k), logits(n * m * k, 0.0), labels(n, kUnlabeled) {}

  std::span<const double> row(std::size_t sample, std::size_t exit) const {
    return {logits.data() + (sample * n_exits + exit) * n_classes, n_classes};
  }
  std::span<double> row(std::size_t sample, std::size_t exit) {
    return {logits.data() + (sample * n_exits + exit) * n_classes, n_classes};
  }
  double &at(std::size_t sample, std::size_t exit, std::size_t cls) {
    return logits[(sample * n_exits + exit) * n_classes + cls];
  }
  double at(std::size_t sample, std::size_t exit, std::size_t cls) const {
    return logits[(sample * n_exits + exit) * n_classes + cls];
  }
  bool labeled(std::size_t sample) const { return labels[sample] != kUnlabeled; }

  /// Throws DataError when any structural invariant is broken.
  void validate() const {
    if (logits.size() != n_samples * n_exits * n_classes) {
      throw DataError("logit tensor length does not equal N*M*K");
    }
    if (labels.size() != n_samples) {
      throw DataError("label count does not equal N");
    }
    if (n_samples > 0 && (n_exits == 0 || n_classes == 0)) {
      throw DataError("non-empty dataset needs M >= 1 and K >= 1");
    }
    for (std::size_t n = 0; n < n_samples; ++n) {
      const auto y = labels[n];
      if (y != kUnlabeled && (y < 0 || static_cast<std::size_t>(y) >= n_classes)) {
        throw DataError("label " + std::to_string(y) + " of sample " + std::to_string(n) +
                        " is outside [0, K)");
      }
    }
    for (std::size_t i = 0; i < logits.size(); ++i) {
      if (!std::isfinite(logits[i])) {
        throw DataError("non-finite logit at flat index " + std::to_string(i));
      }
    }
  }

  /// Per-exit cumulative cost vector from metadata key "exit_costs"
  /// (comma-separated); falls back to 1, 2, ..., M.
  std::vector<double> exit_costs() const {
    std::vector<double> costs;
    if (auto it = metadata.find("exit_costs"); it != metadata.end()) {
      std::stringstream ss(it->second);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        costs.push_back(std::stod(cell));
      }
    }
    if (costs.size() != n_exits) {
      costs.resize(n_exits);
      std::iota(costs.begin(), costs.end(), 1.0);
    }
    return costs;
  }

  /// Copy holding only the listed samples, in the given order.
  LogitDataset subset(std::span<const std::size_t> indices) const {
    LogitDataset out(indices.size(), n_exits, n_classes);
    out.metadata = metadata;
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto src = row(indices[i], 0);
      std::copy_n(src.data(), n_exits * n_classes, out.row(i, 0).data());
      out.labels[i] = labels[indices[i]];
    }
    return out;
  }

  friend bool operator==(const LogitDataset &, const LogitDataset &) = default;
};

struct DatasetSplit {
  std::vector<std::size_t> calibration_indices;
  std::vector<std::size_t> evaluation_indices;
};

namespace detail {

inline constexpr char kAexlMagic[4] = {'A', 'E', 'X', 'L'};
inline constexpr std::uint32_t kFormatVersion = 1;

struct AexHeader {
  std::uint32_t n = 0, m = 0, k = 0;
};

inline void write_aex_header(std::ostream &os, const char (&magic)[4], std::size_t n, std::size_t m,
                             std::size_t k) {
  os.write(magic, 4);
  write_le<std::uint32_t>(os, kFormatVersion);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(n));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(m));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(k));
}

inline AexHeader read_aex_header(std::istream &is, const char (&magic)[4]) {
  char got[4];
  if (!is.read(got, 4)) {
    throw DataError("malformed header: file shorter than magic");
  }
  if (!std::equal(got, got + 4, magic)) {
    throw DataError(std::string("malformed header: expected magic ") + std::string(magic, 4) +
                    ", found " + std::string(got, 4));
  }
  const auto version = read_le<std::uint32_t>(is, "version");
  if (version != kFormatVersion) {
    throw DataError("unsupported format version " + std::to_string(version));
  }
  AexHeader h;
  h.n = read_le<std::uint32_t>(is, "N");
  h.m = read_le<std::uint32_t>(is, "M");
  h.k = read_le<std::uint32_t>(is, "K");
  return h;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path &path) {
  auto side = path;
  side.replace_extension(".meta.json");
  return side;
}

inline void expect_eof(std::istream &is) {
  if (is.peek() != std::char_traits<char>::eof()) {
    throw DataError("trailing bytes after payload");
  }
}

} // namespace detail

/// Exact AEXL file size for a given shape.
constexpr std::uint64_t aexl_size(std::uint64_t n, std::uint64_t m, std::uint64_t k) {
  return 20 + 4 * n + 4 * n * m * k;
}

inline void save_binary(const LogitDataset &ds, const std::filesystem::path &path) {
  ds.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw DataError("cannot open " + path.string() + " for writing");
  }
  detail::write_aex_header(os, detail::kAexlMagic, ds.n_samples, ds.n_exits, ds.n_classes);
  for (auto y : ds.labels) {
    detail::write_le<std::int32_t>(os, y);
  }
  for (double v : ds.logits) {
    detail::write_le<float>(os, static_cast<float>(v));
  }
  if (!os) {
    throw DataError("I/O failure writing " + path.string());
  }
  if (!ds.metadata.empty()) {
    std::ofstream side(detail::sidecar_path(path), std::ios::trunc);
    side << nlohmann::json(ds.metadata).dump(2) << '\n';
  }
}

inline LogitDataset load_binary(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw DataError("cannot open " + path.string());
  }
  const auto h = detail::read_aex_header(is, detail::kAexlMagic);
  LogitDataset ds(h.n, h.m, h.k);
  const auto expected = aexl_size(h.n, h.m, h.k);
  if (std::filesystem::file_size(path) < expected) {
    throw DataError("truncated payload: expected " + std::to_string(expected) + " bytes");
  }
  for (auto &y : ds.labels) {
    y = detail::read_le<std::int32_t>(is, "label");
  }
  for (double &v : ds.logits) {
    v = detail::read_le<float>(is, "logit");
  }
  detail::expect_eof(is);
  if (auto side = detail::sidecar_path(path); std::filesystem::exists(side)) {
    std::ifstream ms(side);
    const auto meta = nlohmann::json::parse(ms);
    for (const auto &[key, value] : meta.items()) {
      ds.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
  ds.validate();
  return ds;
}

/// Parses rows `label, f[1][1..K], ..., f[M][1..K]`. Blank lines and lines
/// starting with '#' are skipped.
inline LogitDataset load_csv(const std::filesystem::path &path, std::size_t n_exits,
                             std::size_t n_classes) {
  std::ifstream is(path);
  if (!is) {
    throw DataError("cannot open " + path.string());
  }
  const std::size_t expected_cols = 1 + n_exits * n_classes;
  LogitDataset ds(0, n_exits, n_classes);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    // U+2212 minus sign shows up in hand-edited files
    for (std::size_t pos; (pos = line.find("\xE2\x88\x92")) != std::string::npos;) {
      line.replace(pos, 3, "-");
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos || line.front() == '#') {
      continue;
    }
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(cell, &used);
      } catch (const std::exception &) {
        throw DataError("non-numeric cell '" + cell + "' on line " + std::to_string(line_no));
      }
      if (cell.find_first_not_of(" \t\r", used) != std::string::npos) {
        throw DataError("non-numeric cell '" + cell + "' on line " + std::to_string(line_no));
      }
      cells.push_back(value);
    }
    if (cells.size() != expected_cols) {
      throw DataError("line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " columns, expected " + std::to_string(expected_cols));
    }
    if (cells[0] != std::floor(cells[0])) {
      throw DataError("non-integer label on line " + std::to_string(line_no));
    }
    ds.labels.push_back(static_cast<std::int32_t>(cells[0]));
    ds.logits.insert(ds.logits.end(), cells.begin() + 1, cells.end());
    ++ds.n_samples;
  }
  ds.validate();
  return ds;
}

/// Writes the load_csv layout with enough digits for an exact f32 round trip.
inline void save_csv(const LogitDataset &ds, const std::filesystem::path &path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw DataError("cannot open " + path.string() + " for writing");
  }
  os << std::setprecision(9);
  for (std::size_t n = 0; n < ds.n_samples; ++n) {
    os << ds.labels[n];
    for (std::size_t i = 0; i < ds.n_exits * ds.n_classes; ++i) {
      os << ',' << static_cast<float>(ds.logits[n * ds.n_exits * ds.n_classes + i]);
    }
    os << '\n';
  }
}

/// Seeded random partition; |calibration| = round(fraction * N). Both index
/// lists are returned in ascending order.
inline DatasetSplit split(std::size_t n_samples, double calibration_fraction, std::uint64_t seed) {
  if (!(calibration_fraction > 0.0 && calibration_fraction < 1.0)) {
    throw ConfigError("calibration fraction must lie in (0, 1)");
  }
  const auto n_cal = static_cast<std::size_t>(std::llround(calibration_fraction * static_cast<double>(n_samples)));
  if (n_cal == 0 || n_cal >= n_samples) {
    throw ConfigError("calibration fraction leaves an empty part for N=" + std::to_string(n_samples));
  }
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n_samples - 1; i > 0; --i) {
    std::swap(order[i], order[detail::uniform_index(rng, i + 1)]);
  }
  DatasetSplit out;
  out.calibration_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_cal));
  out.evaluation_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_cal), order.end());
  std::sort(out.calibration_indices.begin(), out.calibration_indices.end());
  std::sort(out.evaluation_indices.begin(), out.evaluation_indices.end());
  return out;
}

inline DatasetSplit split(const LogitDataset &ds, double calibration_fraction, std::uint64_t seed) {
  return split(ds.n_samples, calibration_fraction, seed);
}

} // namespace anytime

#endif // ANYTIME_LOGIT_STORE_HPP
