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

// Rate-quality curves and the Bjontegaard delta of their quality axis.

#ifndef LBPC_METRICS_BD_HPP_
#define LBPC_METRICS_BD_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lbpc/core/error.hpp"

namespace lbpc::metrics {

struct RDPoint {
  double rate = 0.0;      // bits per input point
  double quality = 0.0;   // dB or percent
  bool infinite = false;  // lossless PSNR; left out of fits
  friend bool operator==(const RDPoint&, const RDPoint&) = default;
};

using RDCurve = std::vector<RDPoint>;

// Sorted by rate; rates must be positive and distinct.
inline RDCurve rd_curve(std::vector<RDPoint> points) {
  std::stable_sort(points.begin(), points.end(), [](const RDPoint& a, const RDPoint& b) { return a.rate < b.rate; });
  for (std::size_t i = 0; i < points.size(); ++i) {
    require(points[i].rate > 0.0 && std::isfinite(points[i].rate), ErrorKind::kArgument,
            "rate " + std::to_string(points[i].rate) + " is not a positive number");
    require(i == 0 || points[i].rate > points[i - 1].rate, ErrorKind::kArgument,
            "duplicate rate " + std::to_string(points[i].rate) + " in RD curve");
  }
  return points;
}

// Least-squares polynomial, coefficients by ascending power.
inline std::vector<double> polyfit(const std::vector<double>& x, const std::vector<double>& y, int order) {
  require(x.size() == y.size() && static_cast<int>(x.size()) > order, ErrorKind::kArgument,
          "need more points than the polynomial order");
  Eigen::MatrixXd v(static_cast<Eigen::Index>(x.size()), order + 1);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    double p = 1.0;
    for (int j = 0; j <= order; ++j, p *= x[i]) v(static_cast<Eigen::Index>(i), j) = p;
    rhs(static_cast<Eigen::Index>(i)) = y[i];
  }
  const Eigen::VectorXd c = v.colPivHouseholderQr().solve(rhs);
  return {c.data(), c.data() + c.size()};
}

inline double poly_integral(const std::vector<double>& c, double lo, double hi) {
  double s = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double e = static_cast<double>(j + 1);
    s += c[j] * (std::pow(hi, e) - std::pow(lo, e)) / e;
  }
  return s;
}

struct BdResult {
  double delta = 0.0;
  int order = 3;         // polynomial order used for both curves
  bool reduced = false;  // fewer than four points forced a lower order
};

// Average quality difference of `test` over `reference` across their
// common log10-rate interval, from a cubic fit per curve. With
// `allow_reduced_order`, curves of two or three points fall back to a fit
// of order points - 1 and the result is flagged.
inline BdResult bd_metric_ex(const RDCurve& test, const RDCurve& reference, bool allow_reduced_order) {
  auto prepare = [](const RDCurve& curve, const char* which) {
    std::vector<double> x, y;
    for (const auto& p : curve) {
      if (p.infinite) continue;
      require(p.rate > 0.0, ErrorKind::kArgument, std::string(which) + " curve has a non-positive rate");
      x.push_back(std::log10(p.rate));
      y.push_back(p.quality);
    }
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), ErrorKind::kArgument,
            std::string(which) + " curve has duplicate rates");
    return std::make_pair(x, y);
  };
  const auto [xt, yt] = prepare(test, "test");
  const auto [xr, yr] = prepare(reference, "reference");
  const std::size_t n = std::min(xt.size(), xr.size());
  BdResult out;
  if (n < 4) {
    require(allow_reduced_order && n >= 2, ErrorKind::kArgument,
            "BD needs at least 4 finite points per curve, got " + std::to_string(xt.size()) + " and " +
                std::to_string(xr.size()));
    out.order = static_cast<int>(n) - 1;
    out.reduced = true;
  }
  const double lo = std::max(*std::min_element(xt.begin(), xt.end()), *std::min_element(xr.begin(), xr.end()));
  const double hi = std::min(*std::max_element(xt.begin(), xt.end()), *std::max_element(xr.begin(), xr.end()));
  require(hi > lo, ErrorKind::kArgument, "RD curves have no overlapping rate interval");
  const auto ct = polyfit(xt, yt, out.order);
  const auto cr = polyfit(xr, yr, out.order);
  out.delta = (poly_integral(ct, lo, hi) - poly_integral(cr, lo, hi)) / (hi - lo);
  return out;
}

inline double bd_metric(const RDCurve& test, const RDCurve& reference) {
  return bd_metric_ex(test, reference, false).delta;
}

}  // namespace lbpc::metrics

#endif  // LBPC_METRICS_BD_HPP_
