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

// Independent reference implementations used only by tests. None of these
// call into the code paths they check.

#ifndef LBPC_TESTS_ORACLES_HPP_
#define LBPC_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "lbpc/core/random.hpp"
#include "lbpc/nn/network.hpp"

namespace lbpc::testing {

using nn::Shape;
using nn::Tensor;

// Direct 3D convolution, one item, channels-last, "same" padding placing
// the extra pad cell on the high side.
inline std::vector<double> naive_conv3d(const std::vector<double>& x, std::size_t d, std::size_t h,
                                        std::size_t w, std::size_t cin, const std::vector<double>& weight,
                                        const std::vector<double>& bias, std::size_t cout, int k, int s,
                                        bool same, std::size_t& od_out, std::size_t& oh_out,
                                        std::size_t& ow_out) {
  auto out_extent = [&](std::size_t n) -> std::size_t {
    return same ? (n + s - 1) / s : (n - k) / s + 1;
  };
  auto pad_lo = [&](std::size_t n) -> long {
    if (!same) return 0;
    long total = static_cast<long>((out_extent(n) - 1) * s + k) - static_cast<long>(n);
    return total > 0 ? total / 2 : 0;
  };
  const std::size_t od = out_extent(d), oh = out_extent(h), ow = out_extent(w);
  const long pd = pad_lo(d), ph = pad_lo(h), pw = pad_lo(w);
  std::vector<double> y(od * oh * ow * cout, 0.0);
  for (std::size_t a = 0; a < od; ++a)
    for (std::size_t b = 0; b < oh; ++b)
      for (std::size_t c = 0; c < ow; ++c)
        for (std::size_t co = 0; co < cout; ++co) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (int kd = 0; kd < k; ++kd)
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                const long id = static_cast<long>(a) * s + kd - pd;
                const long ih = static_cast<long>(b) * s + kh - ph;
                const long iw = static_cast<long>(c) * s + kw - pw;
                if (id < 0 || ih < 0 || iw < 0 || id >= static_cast<long>(d) || ih >= static_cast<long>(h) ||
                    iw >= static_cast<long>(w))
                  continue;
                for (std::size_t ci = 0; ci < cin; ++ci) {
                  acc += x[((id * h + ih) * w + iw) * cin + ci] *
                         weight[(((static_cast<std::size_t>(kd) * k + kh) * k + kw) * cin + ci) * cout + co];
                }
              }
          y[((a * oh + b) * ow + c) * cout + co] = acc;
        }
  od_out = od;
  oh_out = oh;
  ow_out = ow;
  return y;
}

// Scatter form of the stride-s transposed convolution ("same": output n*s).
inline std::vector<double> naive_conv_transpose3d(const std::vector<double>& x, std::size_t n, std::size_t cin,
                                                  const std::vector<double>& weight,
                                                  const std::vector<double>& bias, std::size_t cout, int k,
                                                  int s) {
  const std::size_t big = n * s;
  const long total = static_cast<long>((n - 1) * s + k) - static_cast<long>(big);
  const long pad = total > 0 ? total / 2 : 0;
  std::vector<double> y(big * big * big * cout, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        for (int kd = 0; kd < k; ++kd)
          for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw) {
              const long od = static_cast<long>(a) * s + kd - pad;
              const long oh = static_cast<long>(b) * s + kh - pad;
              const long ow = static_cast<long>(c) * s + kw - pad;
              if (od < 0 || oh < 0 || ow < 0 || od >= static_cast<long>(big) || oh >= static_cast<long>(big) ||
                  ow >= static_cast<long>(big))
                continue;
              for (std::size_t co = 0; co < cout; ++co)
                for (std::size_t ci = 0; ci < cin; ++ci) {
                  y[((od * big + oh) * big + ow) * cout + co] +=
                      x[((a * n + b) * n + c) * cin + ci] *
                      weight[(((static_cast<std::size_t>(kd) * k + kh) * k + kw) * cout + co) * cin + ci];
                }
            }
  for (std::size_t p = 0; p < big * big * big; ++p)
    for (std::size_t co = 0; co < cout; ++co) y[p * cout + co] += bias.empty() ? 0.0 : bias[co];
  return y;
}

inline Tensor<double> random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor<double> t(shape);
  for (auto& v : t.data()) v = rng.uniform(-scale, scale);
  return t;
}

inline double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / denom;
}

// Central finite-difference check of every trainable parameter (and the
// input) against backward(), using loss = sum(r * forward(x)).
struct GradCheckResult {
  double max_param_error = 0.0;
  double max_input_error = 0.0;
  std::size_t checked = 0;
};

inline GradCheckResult gradient_check(nn::Network<double>& net, const Tensor<double>& input, std::uint64_t seed,
                                      double h = 1e-5) {
  Rng rng(seed);
  nn::ForwardCache<double> cache;
  Tensor<double> out = net.forward(input, nn::Mode::kTrain, &cache);
  Tensor<double> r = random_tensor(out.shape(), rng);
  auto grads = net.backward(cache, r, /*need_input_grad=*/true);

  // Forward passes for probing must not drift running statistics; work on a
  // copy each time.
  auto loss_at = [&](const nn::Network<double>& model, const Tensor<double>& x) {
    nn::Network<double> probe = model;
    Tensor<double> y = probe.forward(x, nn::Mode::kTrain);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  GradCheckResult result;
  for (std::size_t li = 0; li < net.size(); ++li) {
    if (net.layer(li).frozen) continue;
    for (std::size_t p = 0; p < net.layer(li).params.size(); ++p) {
      for (std::size_t e = 0; e < net.layer(li).params[p].size(); ++e) {
        nn::Network<double> plus = net;
        nn::Network<double> minus = net;
        plus.layer(li).params[p][e] += h;
        minus.layer(li).params[p][e] -= h;
        const double numeric = (loss_at(plus, input) - loss_at(minus, input)) / (2 * h);
        const double analytic = grads.layers[li][p][e];
        result.max_param_error = std::max(result.max_param_error, relative_error(analytic, numeric));
        ++result.checked;
      }
    }
  }
  for (std::size_t e = 0; e < input.size(); ++e) {
    Tensor<double> xp = input, xm = input;
    xp[e] += h;
    xm[e] -= h;
    const double numeric = (loss_at(net, xp) - loss_at(net, xm)) / (2 * h);
    result.max_input_error = std::max(result.max_input_error, relative_error(grads.input[e], numeric));
  }
  return result;
}

// Mean squared nearest-neighbor distance from each point of `from` to `to`,
// by scanning every pair.
template <typename Cloud>
double mean_nn_sq(const Cloud& from, const Cloud& to) {
  double sum = 0.0;
  for (const auto& p : from.points()) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to.points()) {
      const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

// Literal transcription of the greedy farthest-point rule: recompute every
// min distance from scratch at each step.
template <typename P>
std::vector<std::size_t> greedy_fps(const std::vector<P>& pts, std::size_t n) {
  std::vector<std::size_t> chosen{0};
  while (chosen.size() < n) {
    std::size_t best = pts.size();
    double best_d = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      double m = 1e300;
      for (std::size_t c : chosen) {
        double d = 0.0;
        for (int a = 0; a < 3; ++a) d += (pts[i][a] - pts[c][a]) * (pts[i][a] - pts[c][a]);
        m = std::min(m, d);
      }
      if (m > best_d) {
        best_d = m;
        best = i;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

}  // namespace lbpc::testing

#endif  // LBPC_TESTS_ORACLES_HPP_
