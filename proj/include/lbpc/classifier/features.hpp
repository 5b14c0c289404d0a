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

// Grid featurization: each of G^3 cells carries an occupancy flag followed
// by up to K point offsets, each normalized to [0, 1] within the cell.

#ifndef LBPC_CLASSIFIER_FEATURES_HPP_
#define LBPC_CLASSIFIER_FEATURES_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "lbpc/core/error.hpp"
#include "lbpc/nn/tensor.hpp"
#include "lbpc/pcloud/fps.hpp"
#include "lbpc/pcloud/point_cloud.hpp"

namespace lbpc::classifier {

// Sparse storage of a G x G x G x (3K + 1) feature tensor.
struct VoxelFeatureGrid {
  int grid = 0;
  int points_per_cell = 0;
  std::vector<std::uint32_t> cells;  // x-major cell index, ascending
  std::vector<float> offsets;        // 3K values per entry of `cells`

  std::size_t channels() const { return 3 * static_cast<std::size_t>(points_per_cell) + 1; }
  nn::Shape shape() const {
    const auto g = static_cast<std::size_t>(grid);
    return {g, g, g, channels()};
  }

  // Writes the dense tensor into `out`, which must hold G^3 (3K + 1) values.
  void write_dense(std::span<float> out) const {
    const std::size_t c = channels();
    require(out.size() == static_cast<std::size_t>(grid) * grid * grid * c, ErrorKind::kShape,
            "feature buffer has the wrong size");
    std::fill(out.begin(), out.end(), 0.0f);
    const std::size_t k3 = c - 1;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      float* dst = out.data() + static_cast<std::size_t>(cells[i]) * c;
      dst[0] = 1.0f;
      std::copy_n(offsets.begin() + static_cast<std::ptrdiff_t>(i * k3), k3, dst + 1);
    }
  }

  nn::Tensor<float> dense() const {
    nn::Tensor<float> t(shape());
    write_dense(t.data());
    return t;
  }
};

// Cell coordinate and in-cell offset of one coordinate in [-1, 1].
inline std::pair<int, double> bin_coordinate(double v, int grid) {
  const double u = std::clamp((v + 1.0) / 2.0, 0.0, 1.0) * grid;
  const int cell = std::min(grid - 1, static_cast<int>(std::floor(u)));
  return {cell, u - cell};
}

// Points are binned in index order; the first K points of a cell supply its
// offsets. Cells holding fewer than K points keep all-zero offsets.
inline VoxelFeatureGrid featurize(const pcloud::PointCloudF& pc, int grid, int points_per_cell) {
  require(!pc.empty(), ErrorKind::kArgument, "cannot featurize an empty point cloud");
  require(grid >= 1, ErrorKind::kArgument, "grid size must be positive");
  require(points_per_cell >= 0, ErrorKind::kArgument, "points per cell must be >= 0");
  const auto k = static_cast<std::size_t>(points_per_cell);
  std::map<std::uint32_t, std::vector<std::array<double, 3>>> bins;
  const auto g = static_cast<std::uint32_t>(grid);
  for (const auto& p : pc.points) {
    std::array<int, 3> cell{};
    std::array<double, 3> off{};
    for (int a = 0; a < 3; ++a) std::tie(cell[a], off[a]) = bin_coordinate(p[a], grid);
    const std::uint32_t idx = (static_cast<std::uint32_t>(cell[0]) * g + cell[1]) * g + cell[2];
    auto& list = bins[idx];
    if (list.size() < k) list.push_back(off);
  }
  VoxelFeatureGrid out{grid, points_per_cell, {}, {}};
  out.cells.reserve(bins.size());
  out.offsets.reserve(bins.size() * 3 * k);
  for (const auto& [idx, list] : bins) {
    out.cells.push_back(idx);
    const bool full = k > 0 && list.size() == k;
    for (std::size_t j = 0; j < k; ++j) {
      for (int a = 0; a < 3; ++a) out.offsets.push_back(full ? static_cast<float>(list[j][a]) : 0.0f);
    }
  }
  return out;
}

inline VoxelFeatureGrid featurize(const pcloud::PointCloudV& pc, int grid, int points_per_cell) {
  return featurize(pcloud::devoxelize(pc), grid, points_per_cell);
}

}  // namespace lbpc::classifier

#endif  // LBPC_CLASSIFIER_FEATURES_HPP_
