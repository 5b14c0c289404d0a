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

#ifndef LBPC_PCLOUD_FPS_HPP_
#define LBPC_PCLOUD_FPS_HPP_

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lbpc/core/error.hpp"
#include "lbpc/core/random.hpp"
#include "lbpc/pcloud/point_cloud.hpp"

namespace lbpc::pcloud {

inline double squared_distance(const Point& a, const Point& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

// Indices chosen by greedy farthest point sampling from index 0. Ties go to
// the lowest index.
inline std::vector<std::size_t> fps_indices(const std::vector<Point>& points, std::size_t n) {
  const std::size_t count = points.size();
  std::vector<std::size_t> chosen;
  if (count == 0 || n == 0) return chosen;
  n = std::min(n, count);
  chosen.reserve(n);
  std::vector<double> min_dist(count, std::numeric_limits<double>::infinity());
  std::size_t current = 0;
  for (std::size_t step = 0; step < n; ++step) {
    chosen.push_back(current);
    min_dist[current] = -1.0;
    std::size_t best = 0;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < count; ++i) {
      if (min_dist[i] < 0.0) continue;
      const double d = squared_distance(points[i], points[current]);
      if (d < min_dist[i]) min_dist[i] = d;
      if (min_dist[i] > best_dist) {
        best_dist = min_dist[i];
        best = i;
      }
    }
    current = best;
  }
  return chosen;
}

// Resamples to exactly n points. Larger clouds are thinned with FPS;
// smaller ones are padded by seeded uniform draws with replacement.
inline PointCloudF fps_resample(const PointCloudF& pc, long n, std::uint64_t seed = 0) {
  require(n > 0, ErrorKind::kArgument, "resample target must be positive, got " + std::to_string(n));
  require(!pc.empty(), ErrorKind::kArgument, "cannot resample an empty point cloud");
  const auto target = static_cast<std::size_t>(n);
  if (pc.size() == target) return pc;
  PointCloudF out;
  out.label = pc.label;
  if (pc.size() > target) {
    for (std::size_t i : fps_indices(pc.points, target)) out.points.push_back(pc.points[i]);
    return out;
  }
  out.points = pc.points;
  Rng rng(seed);
  while (out.points.size() < target) out.points.push_back(pc.points[rng.below(pc.size())]);
  return out;
}

}  // namespace lbpc::pcloud

#endif  // LBPC_PCLOUD_FPS_HPP_
