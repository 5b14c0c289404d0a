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
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "lbpc/core/random.hpp"
#include "lbpc/metrics/accuracy.hpp"
#include "lbpc/metrics/bd.hpp"
#include "lbpc/metrics/psnr.hpp"
#include "lbpc/metrics/svg.hpp"
#include "oracles.hpp"

namespace lbpc::metrics {
namespace {

using pcloud::PointCloudV;
using pcloud::Voxel;

PointCloudV random_cloud(Rng& rng, std::size_t n, int bit_depth, bool clustered) {
  const int top = (1 << bit_depth) - 1;
  std::vector<Voxel> pts;
  Voxel center{static_cast<int>(rng.below(top + 1)), static_cast<int>(rng.below(top + 1)),
               static_cast<int>(rng.below(top + 1))};
  for (std::size_t i = 0; i < n; ++i) {
    Voxel v;
    for (int a = 0; a < 3; ++a) {
      const int c = clustered ? center[a] + static_cast<int>(rng.below(9)) - 4 : static_cast<int>(rng.below(top + 1));
      v[a] = std::clamp(c, 0, top);
    }
    pts.push_back(v);
  }
  return PointCloudV(std::move(pts), bit_depth);
}

TEST(PsnrD1, MatchesAllPairsOracleExactly) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int depth = 4 + trial % 7;
    const auto a = random_cloud(rng, 1 + rng.below(500), depth, trial % 3 == 0);
    const auto b = random_cloud(rng, 1 + rng.below(500), depth, trial % 4 == 0);
    const D1Result fast = psnr_d1(a, b, depth);
    const D1Result brute = psnr_d1_brute(a, b, depth);
    EXPECT_EQ(fast.e_ba, testing::mean_nn_sq(b, a)) << trial;
    EXPECT_EQ(fast.e_ab, testing::mean_nn_sq(a, b)) << trial;
    EXPECT_EQ(fast.e_ba, brute.e_ba);
    EXPECT_EQ(fast.e_ab, brute.e_ab);
    EXPECT_EQ(fast.psnr, brute.psnr);
    EXPECT_EQ(fast.infinite, brute.infinite);
  }
}

TEST(PsnrD1, UnitOffsetHandCase) {
  const PointCloudV a({{0, 0, 0}}, 10), b({{0, 0, 1}}, 10);
  const D1Result r = psnr_d1(a, b, 10);
  EXPECT_EQ(r.e_ba, 1.0);
  EXPECT_EQ(r.e_ab, 1.0);
  EXPECT_EQ(r.peak, 1023.0);
  EXPECT_FALSE(r.infinite);
  EXPECT_NEAR(r.psnr, 64.97, 0.01);
  EXPECT_NEAR(r.psnr, 10.0 * std::log10(3.0 * 1023.0 * 1023.0), 1e-12);
}

TEST(PsnrD1, IdenticalCloudsAreFlaggedInfinite) {
  Rng rng(2);
  const auto a = random_cloud(rng, 200, 6, false);
  const D1Result r = psnr_d1(a, a, 6);
  EXPECT_TRUE(r.infinite);
  EXPECT_EQ(r.e_ab, 0.0);
  EXPECT_EQ(r.e_ba, 0.0);
}

TEST(PsnrD1, SymmetricUnderSwap) {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const auto a = random_cloud(rng, 50 + rng.below(100), 7, false);
    const auto b = random_cloud(rng, 50 + rng.below(100), 7, true);
    const auto ab = psnr_d1(a, b, 7), ba = psnr_d1(b, a, 7);
    EXPECT_EQ(ab.psnr, ba.psnr);
    EXPECT_EQ(ab.e_ab, ba.e_ba);
  }
}

TEST(PsnrD1, RejectsEmptyCloud) {
  const PointCloudV a({{1, 1, 1}}, 6), empty({}, 6);
  EXPECT_THROW(psnr_d1(a, empty, 6), Error);
  EXPECT_THROW(psnr_d1(empty, a, 6), Error);
}

TEST(TopK, AllCorrectAndFullRankAreHundred) {
  std::vector<std::vector<std::size_t>> ranked = {{0, 1, 2}, {1, 0, 2}, {2, 1, 0}};
  const std::vector<std::size_t> truth = {0, 1, 2};
  EXPECT_EQ(topk_accuracy(ranked, truth, 1), 100.0);
  const std::vector<std::size_t> wrong = {2, 2, 1};
  EXPECT_EQ(topk_accuracy(ranked, wrong, 3), 100.0);
}

TEST(TopK, MatchesScalarLoopAndIsMonotone) {
  Rng rng(8);
  const std::size_t classes = 6, n = 300;
  std::vector<std::vector<std::size_t>> ranked(n);
  std::vector<std::size_t> truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    ranked[i].resize(classes);
    std::iota(ranked[i].begin(), ranked[i].end(), 0);
    for (std::size_t j = classes; j > 1; --j) std::swap(ranked[i][j - 1], ranked[i][rng.below(j)]);
    truth[i] = rng.below(classes);
  }
  double previous = 0.0;
  for (std::size_t k = 1; k <= classes; ++k) {
    int hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) hits += ranked[i][j] == truth[i] ? 1 : 0;
    }
    const double got = topk_accuracy(ranked, truth, k);
    EXPECT_DOUBLE_EQ(got, 100.0 * hits / static_cast<double>(n));
    EXPECT_GE(got, previous);
    previous = got;
  }
  EXPECT_EQ(previous, 100.0);
}

TEST(TopK, RejectsLengthMismatch) {
  std::vector<std::vector<std::size_t>> ranked = {{0}};
  const std::vector<std::size_t> truth = {0, 1};
  EXPECT_THROW(topk_accuracy(ranked, truth, 1), Error);
}

RDCurve curve(std::vector<std::pair<double, double>> pts) {
  RDCurve c;
  for (auto [r, q] : pts) c.push_back({r, q});
  return c;
}

const RDCurve kRef = curve({{0.1, 30.0}, {0.2, 33.5}, {0.4, 36.2}, {0.8, 38.0}});

TEST(Bd, IdenticalCurvesGiveZero) { EXPECT_LE(std::abs(bd_metric(kRef, kRef)), 1e-9); }

TEST(Bd, ConstantOffsetIsPreserved) {
  RDCurve shifted = kRef;
  for (auto& p : shifted) p.quality += 2.0;
  EXPECT_NEAR(bd_metric(shifted, kRef), 2.0, 1e-6);
  EXPECT_NEAR(bd_metric(kRef, shifted), -2.0, 1e-6);
}

TEST(Bd, Antisymmetric) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    RDCurve a, b;
    for (int i = 0; i < 4 + t % 3; ++i) {
      a.push_back({0.05 * (i + 1) + 0.01 * rng.uniform(), 30 + 3 * i + rng.uniform()});
      b.push_back({0.06 * (i + 1) + 0.01 * rng.uniform(), 29 + 3 * i + rng.uniform()});
    }
    EXPECT_NEAR(bd_metric(a, b), -bd_metric(b, a), 1e-9);
  }
}

// Cubic through four points in Lagrange form, integrated by a dense
// trapezoid rule.
double lagrange(const std::vector<double>& x, const std::vector<double>& y, double t) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double l = 1.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (j != i) l *= (t - x[j]) / (x[i] - x[j]);
    }
    s += y[i] * l;
  }
  return s;
}

TEST(Bd, MatchesTrapezoidIntegrationOfInterpolants) {
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    std::vector<double> xt, yt, xr, yr;
    RDCurve a, b;
    double rt = 0.03, rr = 0.04;
    for (int i = 0; i < 4; ++i) {
      rt *= 1.6 + rng.uniform();
      rr *= 1.6 + rng.uniform();
      a.push_back({rt, 25 + 4 * i + rng.uniform()});
      b.push_back({rr, 24 + 4 * i + rng.uniform()});
      xt.push_back(std::log10(rt));
      yt.push_back(a.back().quality);
      xr.push_back(std::log10(rr));
      yr.push_back(b.back().quality);
    }
    const double lo = std::max(xt.front(), xr.front()), hi = std::min(xt.back(), xr.back());
    if (hi <= lo) continue;
    const int steps = 200000;
    double integral = 0.0;
    for (int s = 0; s <= steps; ++s) {
      const double x = lo + (hi - lo) * s / steps;
      const double w = (s == 0 || s == steps) ? 0.5 : 1.0;
      integral += w * (lagrange(xt, yt, x) - lagrange(xr, yr, x));
    }
    EXPECT_NEAR(bd_metric(a, b), integral / steps, 1e-6) << t;
  }
}

TEST(Bd, ReproducesGoldenDeltas) {
  std::ifstream in(std::string(LBPC_TEST_DATA_DIR) + "/bd_golden.json");
  ASSERT_TRUE(in.good());
  const auto golden = nlohmann::json::parse(in);
  ASSERT_GE(golden.at("cases").size(), 4u);
  for (const auto& c : golden.at("cases")) {
    auto read = [](const nlohmann::json& pts) {
      RDCurve out;
      for (const auto& p : pts) out.push_back({p[0].get<double>(), p[1].get<double>()});
      return out;
    };
    EXPECT_NEAR(bd_metric(read(c.at("test")), read(c.at("reference"))), c.at("delta").get<double>(), 1e-9)
        << c.at("name").get<std::string>();
  }
}

TEST(Bd, RejectsDegenerateInputs) {
  const RDCurve three = curve({{0.1, 30}, {0.2, 32}, {0.4, 34}});
  EXPECT_THROW(bd_metric(three, kRef), Error);
  const RDCurve dup = curve({{0.1, 30}, {0.1, 31}, {0.2, 32}, {0.4, 34}});
  EXPECT_THROW(bd_metric(dup, kRef), Error);
  const RDCurve far = curve({{2, 30}, {3, 32}, {4, 34}, {5, 35}});
  EXPECT_THROW(bd_metric(far, kRef), Error);
}

TEST(Bd, ReducedOrderIsFlagged) {
  const RDCurve a = curve({{0.1, 30}, {0.2, 32}, {0.4, 34}});
  RDCurve b = a;
  for (auto& p : b) p.quality -= 1.5;
  const BdResult r = bd_metric_ex(a, b, true);
  EXPECT_TRUE(r.reduced);
  EXPECT_EQ(r.order, 2);
  EXPECT_NEAR(r.delta, 1.5, 1e-9);
  EXPECT_FALSE(bd_metric_ex(kRef, kRef, true).reduced);
  EXPECT_THROW(bd_metric_ex(curve({{0.1, 30}}), curve({{0.1, 30}}), true), Error);
}

TEST(Bd, InfinitePointsAreLeftOut) {
  RDCurve a = kRef;
  a.push_back({1.6, 0.0, true});
  EXPECT_LE(std::abs(bd_metric(a, kRef)), 1e-9);
}

TEST(RdCurve, SortsAndRejectsDuplicates) {
  const RDCurve c = rd_curve({{0.4, 3}, {0.1, 1}, {0.2, 2}});
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].rate, 0.1);
  EXPECT_EQ(c[2].rate, 0.4);
  std::vector<RDPoint> pts = {{0.4, 3}, {0.1, 1}, {0.2, 2}, {0.8, 4}};
  Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    for (std::size_t j = pts.size(); j > 1; --j) std::swap(pts[j - 1], pts[rng.below(j)]);
    const RDCurve s = rd_curve(pts);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i].quality, static_cast<double>(i + 1));
  }
  EXPECT_THROW(rd_curve({{0.1, 1}, {0.1, 2}}), Error);
  EXPECT_THROW(rd_curve({{0.0, 1}}), Error);
}

TEST(Svg, OnePolylinePerSeries) {
  const std::string svg = svg_plot("RD <toy>", "bpp", "PSNR", {{"codec", {{0.1, 30}, {0.4, 35}}, false},
                                                               {"original", {{0.0, 33}}, true}});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  std::size_t count = 0;
  for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++count;
  EXPECT_EQ(count, 2u);
  EXPECT_NE(svg.find("RD &lt;toy&gt;"), std::string::npos);
  EXPECT_EQ(svg, svg_plot("RD <toy>", "bpp", "PSNR", {{"codec", {{0.1, 30}, {0.4, 35}}, false},
                                                     {"original", {{0.0, 33}}, true}}));
}

}  // namespace
}  // namespace lbpc::metrics
