// Copyright 2026 The LBPC Authors. All Rights Reserved.
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

// Point-to-point (D1) geometry PSNR between voxelized clouds.

#ifndef LBPC_METRICS_PSNR_HPP_
#define LBPC_METRICS_PSNR_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "lbpc/core/error.hpp"
#include "lbpc/pcloud/point_cloud.hpp"

namespace lbpc::metrics {

struct D1Result {
  double e_ba = 0.0;  // mean squared distance from points of B to A
  double e_ab = 0.0;
  bool infinite = false;  // identical geometry; `psnr` is meaningless then
  double psnr = 0.0;
  double peak = 0.0;
};

inline std::int64_t squared_distance(const pcloud::Voxel& a, const pcloud::Voxel& b) {
  std::int64_t s = 0;
  for (int i = 0; i < 3; ++i) {
    const std::int64_t d = static_cast<std::int64_t>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

// Exact nearest-neighbor squared distances by bucketing points into cubic
// cells (about one point per cell) and searching outward shell by shell.
class VoxelIndex {
 public:
  explicit VoxelIndex(const std::vector<pcloud::Voxel>& points) : points_(points), cell_(cell_size(points)) {
    for (std::size_t i = 0; i < points.size(); ++i) buckets_[key(cell_of(points[i]))].push_back(i);
    for (const auto& p : points) {
      for (int a = 0; a < 3; ++a) {
        lo_[a] = std::min(lo_[a], cell_of(p)[a]);
        hi_[a] = std::max(hi_[a], cell_of(p)[a]);
      }
    }
  }

  std::int64_t nearest_squared(const pcloud::Voxel& q) const {
    const auto c = cell_of(q);
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    int reach = 0;
    for (int a = 0; a < 3; ++a) reach = std::max({reach, c[a] - lo_[a], hi_[a] - c[a]});
    for (int r = 0; r <= reach; ++r) {
      for (int dx = std::max(-r, lo_[0] - c[0]); dx <= std::min(r, hi_[0] - c[0]); ++dx) {
        for (int dy = std::max(-r, lo_[1] - c[1]); dy <= std::min(r, hi_[1] - c[1]); ++dy) {
          const bool face = std::abs(dx) == r || std::abs(dy) == r;
          for (int dz = -r; dz <= r; dz += face ? 1 : 2 * std::max(r, 1)) {
            if (c[2] + dz < lo_[2] || c[2] + dz > hi_[2]) continue;
            const auto it = buckets_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
            if (it == buckets_.end()) continue;
            for (std::size_t i : it->second) best = std::min(best, squared_distance(q, points_[i]));
          }
        }
      }
      // Points beyond shell r lie at least r * cell + 1 away on some axis.
      const std::int64_t bound = static_cast<std::int64_t>(r) * cell_ + 1;
      if (best < bound * bound) break;
    }
    return best;
  }

 private:
  using Cell = std::array<int, 3>;
  static int cell_size(const std::vector<pcloud::Voxel>& points) {
    if (points.empty()) return 1;
    int extent = 1;
    for (int a = 0; a < 3; ++a) {
      const auto [lo, hi] = std::minmax_element(points.begin(), points.end(),
                                                [a](const auto& p, const auto& q) { return p[a] < q[a]; });
      extent = std::max(extent, (*hi)[a] - (*lo)[a] + 1);
    }
    const double per_axis = std::cbrt(static_cast<double>(points.size()));
    return std::max(1, static_cast<int>(std::ceil(extent / per_axis)));
  }
  Cell cell_of(const pcloud::Voxel& v) const { return {v[0] / cell_, v[1] / cell_, v[2] / cell_}; }
  static std::uint64_t key(const Cell& c) {
    auto u = [](int v) { return static_cast<std::uint64_t>(static_cast<std::uint32_t>(v + (1 << 20))) & 0x1FFFFF; };
    return (u(c[0]) << 42) | (u(c[1]) << 21) | u(c[2]);
  }

  const std::vector<pcloud::Voxel>& points_;
  int cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
  Cell lo_{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), std::numeric_limits<int>::max()};
  Cell hi_{std::numeric_limits<int>::min(), std::numeric_limits<int>::min(), std::numeric_limits<int>::min()};
};

namespace detail {

inline D1Result finish_d1(std::uint64_t sum_ba, std::size_t n_b, std::uint64_t sum_ab, std::size_t n_a,
                          int bit_depth) {
  D1Result r;
  r.e_ba = static_cast<double>(sum_ba) / static_cast<double>(n_b);
  r.e_ab = static_cast<double>(sum_ab) / static_cast<double>(n_a);
  r.peak = static_cast<double>((1 << bit_depth) - 1);
  const double e = std::max(r.e_ba, r.e_ab);
  r.infinite = e == 0.0;
  if (!r.infinite) r.psnr = 10.0 * std::log10(3.0 * r.peak * r.peak / e);
  return r;
}

inline void check_d1_args(const pcloud::PointCloudV& a, const pcloud::PointCloudV& b, int bit_depth) {
  require(!a.empty() && !b.empty(), ErrorKind::kArgument, "D1 PSNR needs two non-empty clouds");
  require(bit_depth >= 1 && bit_depth <= 16, ErrorKind::kArgument,
          "bit depth " + std::to_string(bit_depth) + " outside [1, 16]");
}

}  // namespace detail

// All-pairs reference implementation.
inline D1Result psnr_d1_brute(const pcloud::PointCloudV& a, const pcloud::PointCloudV& b, int bit_depth) {
  detail::check_d1_args(a, b, bit_depth);
  auto directed = [](const pcloud::PointCloudV& from, const pcloud::PointCloudV& to) {
    std::uint64_t sum = 0;
    for (const auto& p : from.points()) {
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for (const auto& q : to.points()) best = std::min(best, squared_distance(p, q));
      sum += static_cast<std::uint64_t>(best);
    }
    return sum;
  };
  return detail::finish_d1(directed(b, a), b.size(), directed(a, b), a.size(), bit_depth);
}

inline D1Result psnr_d1(const pcloud::PointCloudV& a, const pcloud::PointCloudV& b, int bit_depth) {
  detail::check_d1_args(a, b, bit_depth);
  auto directed = [](const pcloud::PointCloudV& from, const pcloud::PointCloudV& to) {
    const VoxelIndex index(to.points());
    std::uint64_t sum = 0;
    for (const auto& p : from.points()) sum += static_cast<std::uint64_t>(index.nearest_squared(p));
    return sum;
  };
  return detail::finish_d1(directed(b, a), b.size(), directed(a, b), a.size(), bit_depth);
}

}  // namespace lbpc::metrics

#endif  // LBPC_METRICS_PSNR_HPP_
