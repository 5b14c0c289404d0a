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

// Synthetic labeled shapes sampled from eight parametric surfaces.

#ifndef LBPC_PCLOUD_DATASET_HPP_
#define LBPC_PCLOUD_DATASET_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "lbpc/core/error.hpp"
#include "lbpc/core/random.hpp"
#include "lbpc/pcloud/point_cloud.hpp"

namespace lbpc::pcloud {

inline constexpr int kShapeFamilies = 8;

inline constexpr std::array<std::string_view, kShapeFamilies> kShapeNames = {
    "sphere", "cube", "cylinder", "torus", "cone", "crossed_planes", "helix", "pyramid"};

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  fail(ErrorKind::kFormat, "unknown split '" + std::string(s) + "'");
}

struct Sample {
  std::size_t id = 0;
  PointCloudF cloud;
  Split split = Split::kTrain;
};

struct DatasetSpec {
  int num_classes = 6;
  int per_class = 120;
  int points_per_cloud = 2048;
  std::uint64_t seed = 0;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<Sample> samples;

  std::vector<const Sample*> subset(Split s) const {
    std::vector<const Sample*> out;
    for (const Sample& x : samples)
      if (x.split == s) out.push_back(&x);
    return out;
  }
};

namespace detail {

using Vec3 = std::array<double, 3>;

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline Vec3 triangle_point(Rng& rng, const Vec3& a, const Vec3& b, const Vec3& c) {
  double u = rng.uniform(), v = rng.uniform();
  if (u + v > 1.0) {
    u = 1.0 - u;
    v = 1.0 - v;
  }
  Vec3 p{};
  for (int i = 0; i < 3; ++i) p[i] = a[i] + u * (b[i] - a[i]) + v * (c[i] - a[i]);
  return p;
}

inline Vec3 sample_surface(int family, Rng& rng) {
  constexpr double pi = std::numbers::pi;
  switch (family) {
    case 0: {  // sphere shell
      Vec3 p{rng.normal(), rng.normal(), rng.normal()};
      const double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
      if (n == 0.0) return {1.0, 0.0, 0.0};
      return {p[0] / n, p[1] / n, p[2] / n};
    }
    case 1: {  // cube shell
      const auto face = static_cast<int>(rng.below(6));
      Vec3 p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      p[face / 2] = face % 2 ? 1.0 : -1.0;
      return p;
    }
    case 2: {  // closed cylinder, radius 0.5, height 1.6
      const double r = 0.5, h = 0.8;
      const double side = 2.0 * pi * r * 2.0 * h, caps = 2.0 * pi * r * r;
      const double t = rng.uniform(0.0, 2.0 * pi);
      if (rng.uniform() * (side + caps) < side) return {r * std::cos(t), r * std::sin(t), rng.uniform(-h, h)};
      const double rr = r * std::sqrt(rng.uniform());
      return {rr * std::cos(t), rr * std::sin(t), rng.uniform() < 0.5 ? -h : h};
    }
    case 3: {  // torus, area-uniform by rejection
      const double big = 0.65, small = 0.3;
      for (;;) {
        const double u = rng.uniform(0.0, 2.0 * pi), v = rng.uniform(0.0, 2.0 * pi);
        if (rng.uniform() * (big + small) > big + small * std::cos(v)) continue;
        const double ring = big + small * std::cos(v);
        return {ring * std::cos(u), ring * std::sin(u), small * std::sin(v)};
      }
    }
    case 4: {  // cone with base disk
      const double r = 0.6, h = 0.7;
      const double slant = std::sqrt(r * r + 4.0 * h * h);
      const double side = pi * r * slant, base = pi * r * r;
      const double t = rng.uniform(0.0, 2.0 * pi);
      if (rng.uniform() * (side + base) < side) {
        const double s = std::sqrt(rng.uniform());
        return {s * r * std::cos(t), s * r * std::sin(t), h - 2.0 * h * s};
      }
      const double rr = r * std::sqrt(rng.uniform());
      return {rr * std::cos(t), rr * std::sin(t), -h};
    }
    case 5: {  // two orthogonal squares sharing the z axis
      const double a = rng.uniform(-0.7, 0.7), z = rng.uniform(-0.7, 0.7);
      if (rng.uniform() < 0.5) return {a, 0.0, z};
      return {0.0, a, z};
    }
    case 6: {  // helix tube
      const double turns = 2.0, radius = 0.6, tube = 0.1, half = 0.8;
      const double t = rng.uniform(0.0, 2.0 * pi * turns);
      const double rise = 2.0 * half / (2.0 * pi * turns);
      const Vec3 center{radius * std::cos(t), radius * std::sin(t), -half + rise * t};
      Vec3 tangent{-radius * std::sin(t), radius * std::cos(t), rise};
      const double tn = std::sqrt(tangent[0] * tangent[0] + tangent[1] * tangent[1] + tangent[2] * tangent[2]);
      for (double& c : tangent) c /= tn;
      const Vec3 normal{std::cos(t), std::sin(t), 0.0};
      const Vec3 binormal = cross(tangent, normal);
      const double phi = rng.uniform(0.0, 2.0 * pi);
      Vec3 p{};
      for (int i = 0; i < 3; ++i)
        p[i] = center[i] + tube * (std::cos(phi) * normal[i] + std::sin(phi) * binormal[i]);
      return p;
    }
    case 7: {  // square pyramid with base
      const double half = 0.6, low = -0.5;
      const Vec3 apex{0.0, 0.0, 0.7};
      const std::array<Vec3, 4> base = {
          Vec3{-half, -half, low}, Vec3{half, -half, low}, Vec3{half, half, low}, Vec3{-half, half, low}};
      const double slant = std::sqrt(half * half + (apex[2] - low) * (apex[2] - low));
      const double face = half * slant;
      const double bottom = 4.0 * half * half;
      const double pick = rng.uniform() * (4.0 * face + bottom);
      if (pick >= 4.0 * face) return {rng.uniform(-half, half), rng.uniform(-half, half), low};
      const auto f = std::min<std::size_t>(static_cast<std::size_t>(pick / face), 3);
      return triangle_point(rng, base[f], base[(f + 1) % 4], apex);
    }
    default:
      fail(ErrorKind::kArgument, "unknown shape family " + std::to_string(family));
  }
}

// Uniform random rotation from a normalized Gaussian quaternion.
inline std::array<double, 9> random_rotation(Rng& rng) {
  double w, x, y, z, n;
  do {
    w = rng.normal();
    x = rng.normal();
    y = rng.normal();
    z = rng.normal();
    n = std::sqrt(w * w + x * x + y * y + z * z);
  } while (n < 1e-12);
  w /= n;
  x /= n;
  y /= n;
  z /= n;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
          2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

}  // namespace detail

// One shape instance, deterministic from (family, seed).
inline PointCloudF generate_shape(int family, int points, std::uint64_t seed) {
  require(points > 0, ErrorKind::kArgument, "points per cloud must be positive");
  Rng rng(seed);
  std::vector<Point> raw(static_cast<std::size_t>(points));
  double radius = 0.0;
  for (auto& p : raw) {
    p = detail::sample_surface(family, rng);
    radius = std::max(radius, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
  }
  const auto rot = detail::random_rotation(rng);
  const double scale = rng.uniform(0.7, 1.0) / std::max(radius, 1e-12);
  PointCloudF out;
  out.label = family;
  out.points.reserve(raw.size());
  for (const auto& p : raw) {
    Point q{};
    for (int i = 0; i < 3; ++i) {
      const double r = rot[3 * i] * p[0] + rot[3 * i + 1] * p[1] + rot[3 * i + 2] * p[2];
      q[i] = std::clamp(r * scale + 0.01 * rng.normal(), -1.0, 1.0);
    }
    out.points.push_back(q);
  }
  return out;
}

// Per class: the first 70% train, the next 15% validation, the rest test.
inline Split split_for(int index_in_class, int per_class) {
  const int train = static_cast<int>(std::lround(0.70 * per_class));
  const int val = static_cast<int>(std::lround(0.15 * per_class));
  if (index_in_class < train) return Split::kTrain;
  if (index_in_class < train + val) return Split::kVal;
  return Split::kTest;
}

inline Dataset generate_dataset(const DatasetSpec& spec) {
  require(spec.num_classes >= 1 && spec.num_classes <= kShapeFamilies, ErrorKind::kArgument,
          "num_classes must be in [1, " + std::to_string(kShapeFamilies) + "], got " +
              std::to_string(spec.num_classes));
  require(spec.per_class >= 1, ErrorKind::kArgument, "per_class must be positive");
  Dataset ds;
  ds.spec = spec;
  ds.samples.reserve(static_cast<std::size_t>(spec.num_classes) * spec.per_class);
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int i = 0; i < spec.per_class; ++i) {
      Sample s;
      s.id = ds.samples.size();
      s.cloud = generate_shape(c, spec.points_per_cloud, derive_seed(spec.seed, s.id));
      s.split = split_for(i, spec.per_class);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

inline Dataset generate_dataset(int num_classes, int per_class, int points_per_cloud, std::uint64_t seed) {
  return generate_dataset(DatasetSpec{num_classes, per_class, points_per_cloud, seed});
}

}  // namespace lbpc::pcloud

#endif  // LBPC_PCLOUD_DATASET_HPP_
