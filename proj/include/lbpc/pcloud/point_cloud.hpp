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

#ifndef LBPC_PCLOUD_POINT_CLOUD_HPP_
#define LBPC_PCLOUD_POINT_CLOUD_HPP_

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lbpc/core/error.hpp"

namespace lbpc::pcloud {

using Point = std::array<double, 3>;
using Voxel = std::array<std::int32_t, 3>;

// Floating-point geometry with coordinates in [-1, 1].
struct PointCloudF {
  std::vector<Point> points;
  std::optional<int> label;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  bool valid() const {
    return std::all_of(points.begin(), points.end(), [](const Point& p) {
      return std::all_of(p.begin(), p.end(), [](double c) { return std::isfinite(c) && c >= -1.0 && c <= 1.0; });
    });
  }
};

// Voxelized geometry: sorted, duplicate-free integer coordinates in
// [0, 2^bit_depth - 1].
class PointCloudV {
 public:
  PointCloudV() = default;
  PointCloudV(std::vector<Voxel> points, int bit_depth) : points_(std::move(points)), bit_depth_(bit_depth) {
    require(bit_depth >= 1 && bit_depth <= 16, ErrorKind::kArgument,
            "bit depth " + std::to_string(bit_depth) + " outside [1, 16]");
    const std::int32_t top = (1 << bit_depth) - 1;
    for (const Voxel& v : points_) {
      for (std::int32_t c : v) {
        require(c >= 0 && c <= top, ErrorKind::kArgument,
                "voxel coordinate " + std::to_string(c) + " outside [0, " + std::to_string(top) + "]");
      }
    }
    std::sort(points_.begin(), points_.end());
    points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
  }

  const std::vector<Voxel>& points() const { return points_; }
  int bit_depth() const { return bit_depth_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  std::int32_t peak() const { return (1 << bit_depth_) - 1; }

  friend bool operator==(const PointCloudV&, const PointCloudV&) = default;

 private:
  std::vector<Voxel> points_;
  int bit_depth_ = 8;
};

// One independently coded cube of the voxel grid. Occupancy is stored
// x-major: index = (x * size + y) * size + z.
struct Block {
  Voxel origin{};
  int size = 0;
  std::vector<std::uint8_t> occupancy;

  Block() = default;
  Block(Voxel o, int s) : origin(o), size(s), occupancy(static_cast<std::size_t>(s) * s * s, 0) {}

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * size + static_cast<std::size_t>(y)) * size + static_cast<std::size_t>(z);
  }
  std::size_t occupied_count() const {
    return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), std::uint8_t{1}));
  }

  template <typename F>
  void for_each_occupied(F&& f) const {
    std::size_t i = 0;
    for (int x = 0; x < size; ++x)
      for (int y = 0; y < size; ++y)
        for (int z = 0; z < size; ++z, ++i)
          if (occupancy[i]) f(x, y, z);
  }

  friend bool operator==(const Block&, const Block&) = default;
};

inline bool is_power_of_two(long v) { return v > 0 && std::has_single_bit(static_cast<unsigned long>(v)); }

// Round-half-up quantization of [-1, 1] onto [0, 2^b - 1], duplicates removed.
inline PointCloudV voxelize(const PointCloudF& pc, int bit_depth) {
  require(bit_depth >= 1 && bit_depth <= 16, ErrorKind::kArgument,
          "bit depth " + std::to_string(bit_depth) + " outside [1, 16]");
  const double top = static_cast<double>((1 << bit_depth) - 1);
  std::vector<Voxel> out;
  out.reserve(pc.size());
  for (const Point& p : pc.points) {
    Voxel v{};
    for (int a = 0; a < 3; ++a) {
      const double scaled = std::floor((p[a] + 1.0) * 0.5 * top + 0.5);
      v[a] = static_cast<std::int32_t>(std::clamp(scaled, 0.0, top));
    }
    out.push_back(v);
  }
  return PointCloudV(std::move(out), bit_depth);
}

// Maps voxel centers back into [-1, 1].
inline PointCloudF devoxelize(const PointCloudV& pc, std::optional<int> label = std::nullopt) {
  PointCloudF out;
  out.label = label;
  const double top = static_cast<double>(pc.peak());
  out.points.reserve(pc.size());
  for (const Voxel& v : pc.points()) {
    out.points.push_back({2.0 * v[0] / top - 1.0, 2.0 * v[1] / top - 1.0, 2.0 * v[2] / top - 1.0});
  }
  return out;
}

// Splits into non-empty BS^3 blocks, ordered by origin.
inline std::vector<Block> partition(const PointCloudV& pc, int block_size) {
  require(is_power_of_two(block_size) && block_size <= (1 << pc.bit_depth()), ErrorKind::kArgument,
          "block size " + std::to_string(block_size) + " must be a power of two dividing 2^" +
              std::to_string(pc.bit_depth()));
  std::map<Voxel, Block> blocks;
  for (const Voxel& v : pc.points()) {
    Voxel origin{};
    for (int a = 0; a < 3; ++a) origin[a] = v[a] / block_size * block_size;
    auto it = blocks.find(origin);
    if (it == blocks.end()) it = blocks.emplace(origin, Block(origin, block_size)).first;
    it->second.occupancy[it->second.index(v[0] - origin[0], v[1] - origin[1], v[2] - origin[2])] = 1;
  }
  std::vector<Block> out;
  out.reserve(blocks.size());
  for (auto& [origin, block] : blocks) out.push_back(std::move(block));
  return out;
}

// Set union of the blocks' occupied voxels, translated by their origins.
inline PointCloudV merge(std::span<const Block> blocks, int bit_depth) {
  std::vector<Voxel> out;
  for (const Block& b : blocks) {
    b.for_each_occupied([&](int x, int y, int z) {
      out.push_back({b.origin[0] + x, b.origin[1] + y, b.origin[2] + z});
    });
  }
  return PointCloudV(std::move(out), bit_depth);
}

// floor(v / SF) within the block; lossy and densifying.
inline Block downsample(const Block& block, int factor) {
  require(is_power_of_two(factor) && factor <= block.size, ErrorKind::kArgument,
          "sampling factor " + std::to_string(factor) + " must be a power of two <= block size");
  if (factor == 1) return block;
  Block out(block.origin, block.size / factor);
  block.for_each_occupied([&](int x, int y, int z) {
    out.occupancy[out.index(x / factor, y / factor, z / factor)] = 1;
  });
  return out;
}

// v * SF with no fill.
inline Block upsample(const Block& block, int factor) {
  require(is_power_of_two(factor), ErrorKind::kArgument,
          "sampling factor " + std::to_string(factor) + " must be a power of two");
  if (factor == 1) return block;
  Block out(block.origin, block.size * factor);
  block.for_each_occupied([&](int x, int y, int z) {
    out.occupancy[out.index(x * factor, y * factor, z * factor)] = 1;
  });
  return out;
}

}  // namespace lbpc::pcloud

#endif  // LBPC_PCLOUD_POINT_CLOUD_HPP_
