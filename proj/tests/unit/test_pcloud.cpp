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

#include <algorithm>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "lbpc/core/random.hpp"
#include "lbpc/pcloud/dataset.hpp"
#include "lbpc/pcloud/fps.hpp"
#include "lbpc/pcloud/io.hpp"
#include "lbpc/pcloud/point_cloud.hpp"
#include "oracles.hpp"

namespace lbpc::pcloud {
namespace {

PointCloudF cloud_of(std::vector<Point> pts) {
  PointCloudF pc;
  pc.points = std::move(pts);
  return pc;
}

PointCloudV random_voxels(std::size_t n, int bit_depth, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Voxel> v;
  const auto side = static_cast<std::uint64_t>(1) << bit_depth;
  for (std::size_t i = 0; i < n; ++i) {
    v.push_back({static_cast<std::int32_t>(rng.below(side)), static_cast<std::int32_t>(rng.below(side)),
                 static_cast<std::int32_t>(rng.below(side))});
  }
  return PointCloudV(std::move(v), bit_depth);
}

TEST(Voxelize, RangeEndpointsAndMidpoint) {
  auto lo = voxelize(cloud_of({{-1, -1, -1}}), 8);
  auto hi = voxelize(cloud_of({{1, 1, 1}}), 8);
  auto mid = voxelize(cloud_of({{0, 0, 0}}), 8);
  EXPECT_EQ(lo.points().front(), (Voxel{0, 0, 0}));
  EXPECT_EQ(hi.points().front(), (Voxel{255, 255, 255}));
  EXPECT_EQ(mid.points().front(), (Voxel{128, 128, 128}));
}

TEST(Voxelize, RejectsBitDepthOutOfRange) {
  auto pc = cloud_of({{0, 0, 0}});
  EXPECT_THROW(voxelize(pc, 0), Error);
  EXPECT_THROW(voxelize(pc, 17), Error);
  EXPECT_NO_THROW(voxelize(pc, 16));
}

TEST(Voxelize, RemovesDuplicates) {
  auto v = voxelize(cloud_of({{0.1, 0.1, 0.1}, {0.1001, 0.1, 0.1}, {0.5, 0.5, 0.5}}), 4);
  EXPECT_EQ(v.size(), 2u);
}

TEST(Voxelize, MonotonePerAxis) {
  Rng rng(3);
  for (int t = 0; t < 2000; ++t) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    const auto va = voxelize(cloud_of({{a, 0, 0}}), 7).points()[0][0];
    const auto vb = voxelize(cloud_of({{b, 0, 0}}), 7).points()[0][0];
    if (a <= b) EXPECT_LE(va, vb);
    else EXPECT_GE(va, vb);
  }
}

TEST(Voxelize, IdempotentOnGriddedInput) {
  auto v = random_voxels(300, 6, 11);
  auto again = voxelize(devoxelize(v), 6);
  EXPECT_EQ(again, v);
}

TEST(Partition, SinglePointAndCorners) {
  auto one = partition(PointCloudV({{0, 0, 0}}, 6), 32);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].origin, (Voxel{0, 0, 0}));
  auto two = partition(PointCloudV({{0, 0, 0}, {63, 63, 63}}, 6), 32);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].origin, (Voxel{0, 0, 0}));
  EXPECT_EQ(two[1].origin, (Voxel{32, 32, 32}));
  EXPECT_EQ(two[1].occupied_count(), 1u);
  EXPECT_EQ(two[1].occupancy[two[1].index(31, 31, 31)], 1);
}

TEST(Partition, RoundTripForEveryBlockSize) {
  for (int b : {4, 6}) {
    auto pc = random_voxels(500, b, 100 + b);
    for (int bs = 1; bs <= (1 << b); bs *= 2) {
      auto blocks = partition(pc, bs);
      for (const auto& blk : blocks) {
        EXPECT_GE(blk.occupied_count(), 1u);
        for (auto c : blk.origin) EXPECT_EQ(c % bs, 0);
      }
      EXPECT_EQ(merge(blocks, b), pc) << "bs=" << bs;
    }
  }
}

TEST(Partition, RejectsBadBlockSize) {
  auto pc = random_voxels(10, 6, 1);
  EXPECT_THROW(partition(pc, 3), Error);
  EXPECT_THROW(partition(pc, 128), Error);
}

TEST(Merge, EmptyAndSingle) {
  EXPECT_TRUE(merge({}, 6).empty());
  Block b({32, 0, 32}, 32);
  b.occupancy[b.index(1, 2, 3)] = 1;
  auto pc = merge(std::vector<Block>{b}, 6);
  ASSERT_EQ(pc.size(), 1u);
  EXPECT_EQ(pc.points()[0], (Voxel{33, 2, 35}));
}

TEST(Merge, DuplicatesCollapse) {
  Block b({0, 0, 0}, 4);
  b.occupancy[b.index(1, 1, 1)] = 1;
  EXPECT_EQ(merge(std::vector<Block>{b, b}, 4).size(), 1u);
}

TEST(Sampling, IdentityAtFactorOne) {
  auto blocks = partition(random_voxels(200, 5, 7), 32);
  EXPECT_EQ(downsample(blocks[0], 1), blocks[0]);
  EXPECT_EQ(upsample(blocks[0], 1), blocks[0]);
}

TEST(Sampling, FloorDivision) {
  Block b({0, 0, 0}, 4);
  for (int i = 0; i < 4; ++i) b.occupancy[b.index(i, i, i)] = 1;
  Block d = downsample(b, 4);
  EXPECT_EQ(d.size, 1);
  EXPECT_EQ(d.occupied_count(), 1u);
}

TEST(Sampling, ShrinksAndStaysNearOriginal) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto blocks = partition(random_voxels(400, 5, seed), 32);
    for (int sf : {2, 4, 8}) {
      Block d = downsample(blocks[0], sf);
      EXPECT_LE(d.occupied_count(), blocks[0].occupied_count());
      Block u = upsample(d, sf);
      ASSERT_EQ(u.size, 32);
      u.for_each_occupied([&](int x, int y, int z) {
        bool near = false;
        blocks[0].for_each_occupied([&](int a, int b, int c) {
          near = near || (a - x >= 0 && a - x <= sf - 1 && b - y >= 0 && b - y <= sf - 1 && c - z >= 0 &&
                          c - z <= sf - 1);
        });
        EXPECT_TRUE(near);
      });
    }
  }
}

TEST(Sampling, RejectsBadFactor) {
  Block b({0, 0, 0}, 4);
  EXPECT_THROW(downsample(b, 3), Error);
  EXPECT_THROW(downsample(b, 8), Error);
}

TEST(Fps, CollinearTieGoesToLowestIndex) {
  std::vector<Point> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({i / 16.0, 0, 0});
  auto out = fps_resample(cloud_of(pts), 3);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out.points[0][0], 0.0);
  EXPECT_EQ(out.points[1][0], 9 / 16.0);
  EXPECT_EQ(out.points[2][0], 4 / 16.0);
}

TEST(Fps, SingleTargetIsFirstPoint) {
  auto pc = generate_shape(2, 50, 9);
  auto out = fps_resample(pc, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.points[0], pc.points[0]);
}

TEST(Fps, EqualSizeIsIdentity) {
  auto pc = generate_shape(1, 64, 4);
  auto out = fps_resample(pc, 64);
  EXPECT_EQ(out.points, pc.points);
}

TEST(Fps, MatchesBruteForceOracle) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Rng rng(seed);
    const std::size_t count = 20 + rng.below(181);
    std::vector<Point> pts(count);
    for (auto& p : pts) {
      // Coarse lattice values force plenty of exact ties.
      p = {std::round(rng.uniform(-1, 1) * 4) / 4, std::round(rng.uniform(-1, 1) * 4) / 4,
           std::round(rng.uniform(-1, 1) * 4) / 4};
    }
    const std::size_t n = 1 + rng.below(count - 1);
    EXPECT_EQ(fps_indices(pts, n), testing::greedy_fps(pts, n)) << "seed " << seed;
  }
}

TEST(Fps, MaxMinProperty) {
  auto pc = generate_shape(3, 150, 77);
  auto idx = fps_indices(pc.points, 40);
  for (std::size_t step = 1; step < idx.size(); ++step) {
    auto min_to_selected = [&](std::size_t i) {
      double m = 1e300;
      for (std::size_t s = 0; s < step; ++s) m = std::min(m, squared_distance(pc.points[i], pc.points[idx[s]]));
      return m;
    };
    const double picked = min_to_selected(idx[step]);
    for (std::size_t i = 0; i < pc.size(); ++i) {
      if (std::find(idx.begin(), idx.begin() + step, i) != idx.begin() + step) continue;
      EXPECT_GE(picked, min_to_selected(i));
    }
  }
}

TEST(Fps, PadsSmallCloudsDeterministically) {
  auto pc = generate_shape(0, 10, 5);
  auto a = fps_resample(pc, 25, 99);
  auto b = fps_resample(pc, 25, 99);
  ASSERT_EQ(a.size(), 25u);
  EXPECT_EQ(a.points, b.points);
  EXPECT_TRUE(std::equal(pc.points.begin(), pc.points.end(), a.points.begin()));
  for (const auto& p : a.points) EXPECT_NE(std::find(pc.points.begin(), pc.points.end(), p), pc.points.end());
}

TEST(Fps, RejectsNonPositiveTargetAndEmptyInput) {
  auto pc = generate_shape(0, 10, 5);
  EXPECT_THROW(fps_resample(pc, 0), Error);
  EXPECT_THROW(fps_resample(PointCloudF{}, 4), Error);
}

TEST(Dataset, DeterministicAndValid) {
  auto a = generate_dataset(8, 5, 256, 42);
  auto b = generate_dataset(8, 5, 256, 42);
  ASSERT_EQ(a.samples.size(), 40u);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].cloud.points, b.samples[i].cloud.points);
    EXPECT_EQ(a.samples[i].cloud.size(), 256u);
    EXPECT_TRUE(a.samples[i].cloud.valid());
    EXPECT_EQ(a.samples[i].cloud.label, static_cast<int>(i / 5));
  }
  auto c = generate_dataset(8, 5, 256, 43);
  EXPECT_NE(a.samples[0].cloud.points, c.samples[0].cloud.points);
}

TEST(Dataset, SplitProportions) {
  auto ds = generate_dataset(2, 120, 16, 1);
  EXPECT_EQ(ds.subset(Split::kTrain).size(), 168u);
  EXPECT_EQ(ds.subset(Split::kVal).size(), 36u);
  EXPECT_EQ(ds.subset(Split::kTest).size(), 36u);
}

TEST(Dataset, ScaleWithinRange) {
  for (int f = 0; f < kShapeFamilies; ++f) {
    auto pc = generate_shape(f, 2000, 1000 + f);
    double r = 0.0;
    for (const auto& p : pc.points) r = std::max(r, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
    EXPECT_GT(r, 0.6) << kShapeNames[f];
    EXPECT_LT(r, 1.06) << kShapeNames[f];
  }
}

TEST(Dataset, RejectsTooManyClasses) { EXPECT_THROW(generate_dataset(9, 2, 8, 0), Error); }

TEST(Ply, FloatRoundTripIsExact) {
  auto pc = generate_shape(4, 100, 8);
  auto back = ply_to_float(parse_ply(to_ply(pc)));
  EXPECT_EQ(back.points, pc.points);
  EXPECT_EQ(back.label, pc.label);
}

TEST(Ply, VoxelRoundTrip) {
  auto v = random_voxels(100, 6, 2);
  auto back = ply_to_voxels(parse_ply(to_ply(v)), 8);
  EXPECT_EQ(back, v);
}

TEST(Ply, ReadsForeignHeaderWithExtraProperties) {
  const std::string text =
      "ply\nformat ascii 1.0\nelement vertex 2\nproperty float nx\nproperty float x\nproperty float y\n"
      "property float z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n"
      "9 0.5 0.25 -0.5\n9 -1 1 0\n";
  auto d = parse_ply(text);
  ASSERT_EQ(d.points.size(), 2u);
  EXPECT_EQ(d.points[0], (Point{0.5, 0.25, -0.5}));
  EXPECT_FALSE(d.integer);
}

TEST(Ply, TruncatedBodyIsReported) {
  const std::string text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty int x\nproperty int y\n"
                           "property int z\nend_header\n1 2 3\n";
  try {
    parse_ply(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTruncated);
  }
}

TEST(Manifest, SaveLoadRoundTrip) {
  auto ds = generate_dataset(3, 4, 32, 5);
  auto dir = std::filesystem::temp_directory_path() / "lbpc_test_manifest";
  std::filesystem::remove_all(dir);
  save_dataset(dir, ds);
  auto back = load_dataset(dir);
  ASSERT_EQ(back.samples.size(), ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].cloud.points, ds.samples[i].cloud.points);
    EXPECT_EQ(back.samples[i].cloud.label, ds.samples[i].cloud.label);
    EXPECT_EQ(back.samples[i].split, ds.samples[i].split);
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace lbpc::pcloud
