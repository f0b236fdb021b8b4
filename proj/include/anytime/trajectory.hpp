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

// ProbTrajectory and its AEXP file format.
//
// AEXP layout: the AEXL header with magic "AEXP", then N i32 labels, then
// N*M*K f32 probabilities (sample, exit, class order), then N*M u8
// degeneracy flags (sample, exit order).

#ifndef ANYTIME_TRAJECTORY_HPP
#define ANYTIME_TRAJECTORY_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "anytime/detail/util.hpp"
#include "anytime/logit_store.hpp"

namespace anytime {

/// Per-sample sequence of M categorical distributions over K classes.
struct ProbTrajectory {
  std::size_t n_samples = 0;
  std::size_t n_exits = 0;
  std::size_t n_classes = 0;
  std::vector<double> probs;              // [sample][exit][class]
  std::vector<std::uint8_t> degenerate;   // [sample][exit]; pre-fallback mass was 0
  std::vector<std::int32_t> served_exit;  // [sample][exit]; 0-based, <= exit

  ProbTrajectory() = default;
  ProbTrajectory(std::size_t n, std::size_t m, std::size_t k)
      : n_samples(n), n_exits(m), n_classes(k), probs(n * m * k, 0.0), degenerate(n * m, 0),
        served_exit(n * m, 0) {
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t e = 0; e < m; ++e) {
        served_exit[s * m + e] = static_cast<std::int32_t>(e);
      }
    }
  }

  std::span<const double> row(std::size_t sample, std::size_t exit) const {
    return {probs.data() + (sample * n_exits + exit) * n_classes, n_classes};
  }
  std::span<double> row(std::size_t sample, std::size_t exit) {
    return {probs.data() + (sample * n_exits + exit) * n_classes, n_classes};
  }
  double prob(std::size_t sample, std::size_t exit, std::size_t cls) const {
    return probs[(sample * n_exits + exit) * n_classes + cls];
  }
  bool is_degenerate(std::size_t sample, std::size_t exit) const {
    return degenerate[sample * n_exits + exit] != 0;
  }
  std::int32_t served(std::size_t sample, std::size_t exit) const {
    return served_exit[sample * n_exits + exit];
  }

  /// Trajectory restricted to the listed samples.
  ProbTrajectory subset(std::span<const std::size_t> indices) const {
    ProbTrajectory out(indices.size(), n_exits, n_classes);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto src = indices[i];
      std::copy_n(row(src, 0).data(), n_exits * n_classes, out.row(i, 0).data());
      std::copy_n(degenerate.begin() + static_cast<std::ptrdiff_t>(src * n_exits), n_exits,
                  out.degenerate.begin() + static_cast<std::ptrdiff_t>(i * n_exits));
      std::copy_n(served_exit.begin() + static_cast<std::ptrdiff_t>(src * n_exits), n_exits,
                  out.served_exit.begin() + static_cast<std::ptrdiff_t>(i * n_exits));
    }
    return out;
  }

  friend bool operator==(const ProbTrajectory &, const ProbTrajectory &) = default;
};

struct TrajectoryFile {
  ProbTrajectory trajectory;
  std::vector<std::int32_t> labels;
};

namespace detail {
inline constexpr char kAexpMagic[4] = {'A', 'E', 'X', 'P'};
}

constexpr std::uint64_t aexp_size(std::uint64_t n, std::uint64_t m, std::uint64_t k) {
  return 20 + 4 * n + 4 * n * m * k + n * m;
}

inline void save_trajectory(const ProbTrajectory &traj, std::span<const std::int32_t> labels,
                            const std::filesystem::path &path) {
  if (labels.size() != traj.n_samples) {
    throw DataError("label count does not match trajectory sample count");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw DataError("cannot open " + path.string() + " for writing");
  }
  detail::write_aex_header(os, detail::kAexpMagic, traj.n_samples, traj.n_exits, traj.n_classes);
  for (auto y : labels) {
    detail::write_le<std::int32_t>(os, y);
  }
  for (double p : traj.probs) {
    detail::write_le<float>(os, static_cast<float>(p));
  }
  for (auto flag : traj.degenerate) {
    detail::write_le<std::uint8_t>(os, flag ? 1 : 0);
  }
  if (!os) {
    throw DataError("I/O failure writing " + path.string());
  }
}

/// Served-exit provenance is not stored on disk; loaded trajectories report
/// served_exit[m] = m.
inline TrajectoryFile load_trajectory(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw DataError("cannot open " + path.string());
  }
  const auto h = detail::read_aex_header(is, detail::kAexpMagic);
  if (std::filesystem::file_size(path) < aexp_size(h.n, h.m, h.k)) {
    throw DataError("truncated AEXP payload in " + path.string());
  }
  TrajectoryFile out{ProbTrajectory(h.n, h.m, h.k), std::vector<std::int32_t>(h.n)};
  for (auto &y : out.labels) {
    y = detail::read_le<std::int32_t>(is, "label");
    if (y != kUnlabeled && (y < 0 || static_cast<std::uint32_t>(y) >= h.k)) {
      throw DataError("label outside [0, K) in " + path.string());
    }
  }
  for (double &p : out.trajectory.probs) {
    p = detail::read_le<float>(is, "probability");
    if (!std::isfinite(p) || p < 0.0) {
      throw DataError("invalid probability in " + path.string());
    }
  }
  for (auto &flag : out.trajectory.degenerate) {
    flag = detail::read_le<std::uint8_t>(is, "degeneracy flag");
  }
  detail::expect_eof(is);
  return out;
}

} // namespace anytime

#endif // ANYTIME_TRAJECTORY_HPP
