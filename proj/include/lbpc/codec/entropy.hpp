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

// Factorized per-channel Laplacian prior over integer latents.

#ifndef LBPC_CODEC_ENTROPY_HPP_
#define LBPC_CODEC_ENTROPY_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lbpc/core/error.hpp"
#include "lbpc/nn/tensor.hpp"

namespace lbpc::codec {

inline constexpr std::int32_t kSymbolMin = -64;
inline constexpr std::int32_t kSymbolMax = 63;
inline constexpr std::size_t kAlphabetSize = kSymbolMax - kSymbolMin + 1;
inline constexpr int kCdfPrecision = 16;
inline constexpr std::uint32_t kCdfTotal = 1u << kCdfPrecision;
inline constexpr double kProbabilityFloor = 1.0 / kCdfTotal;

struct LaplaceChannel {
  double mu = 0.0;
  double log_b = 0.0;

  double b() const { return std::exp(log_b); }
  friend bool operator==(const LaplaceChannel&, const LaplaceChannel&) = default;
};

struct EntropyModel {
  std::vector<LaplaceChannel> channels;

  std::size_t size() const { return channels.size(); }
  friend bool operator==(const EntropyModel&, const EntropyModel&) = default;
};

// Probability mass of the unit interval centred on `value`, with partial
// derivatives. Evaluated on the tail side so small masses keep precision.
struct BinMass {
  double p = 0.0;
  double d_value = 0.0;
  double d_mu = 0.0;
  double d_log_b = 0.0;
};

inline BinMass laplace_bin(double value, const LaplaceChannel& ch) {
  const double b = ch.b();
  double lo = value - 0.5 - ch.mu;
  double hi = value + 0.5 - ch.mu;
  auto density = [b](double x) { return std::exp(-std::abs(x) / b) / (2.0 * b); };
  BinMass m;
  if (lo >= 0.0) {
    m.p = 0.5 * (std::exp(-lo / b) - std::exp(-hi / b));
  } else if (hi <= 0.0) {
    m.p = 0.5 * (std::exp(hi / b) - std::exp(lo / b));
  } else {
    m.p = 1.0 - 0.5 * std::exp(lo / b) - 0.5 * std::exp(-hi / b);
  }
  const double f_hi = density(hi), f_lo = density(lo);
  m.d_value = f_hi - f_lo;
  m.d_mu = -m.d_value;
  // dF(x)/db = -(x / b) f(x); chain through b = exp(log_b).
  m.d_log_b = -(hi * f_hi - lo * f_lo);
  return m;
}

// Ideal code length of one symbol in bits, floored probability.
inline double symbol_bits(double value, const LaplaceChannel& ch) {
  return -std::log2(std::max(laplace_bin(value, ch).p, kProbabilityFloor));
}

template <typename T>
struct RateResult {
  double bits = 0.0;
  nn::Tensor<T> d_latent;           // d bits / d latent
  std::vector<double> d_mu;         // per channel
  std::vector<double> d_log_b;      // per channel
};

// Sum of -log2 p over a channels-last latent. A floored symbol costs the
// floor and gets the asymptotic tail slope toward mu as its latent
// gradient, so values outside the support are pulled back.
template <typename T>
RateResult<T> rate_estimate(const nn::Tensor<T>& latent, const EntropyModel& model, bool with_grad = false) {
  const std::size_t c = model.size();
  require(c > 0 && latent.size() % c == 0 && latent.shape().back() == c, ErrorKind::kShape,
          "latent " + nn::shape_str(latent.shape()) + " does not end in " + std::to_string(c) + " channels");
  for (const auto& ch : model.channels) {
    require(std::isfinite(ch.mu) && std::isfinite(ch.log_b), ErrorKind::kNumeric, "non-finite entropy parameters");
  }
  RateResult<T> out;
  if (with_grad) {
    out.d_latent = nn::Tensor<T>(latent.shape());
    out.d_mu.assign(c, 0.0);
    out.d_log_b.assign(c, 0.0);
  }
  const double inv_ln2 = 1.0 / std::numbers::ln2;
  for (std::size_t i = 0; i < latent.size(); ++i) {
    const std::size_t ch = i % c;
    const BinMass m = laplace_bin(static_cast<double>(latent[i]), model.channels[ch]);
    if (m.p > kProbabilityFloor) {
      out.bits += -std::log2(m.p);
      if (with_grad) {
        const double scale = -inv_ln2 / m.p;
        out.d_latent[i] = static_cast<T>(scale * m.d_value);
        out.d_mu[ch] += scale * m.d_mu;
        out.d_log_b[ch] += scale * m.d_log_b;
      }
    } else {
      out.bits += kCdfPrecision;
      if (with_grad) {
        const double dir = static_cast<double>(latent[i]) >= model.channels[ch].mu ? 1.0 : -1.0;
        out.d_latent[i] = static_cast<T>(dir * inv_ln2 / model.channels[ch].b());
      }
    }
  }
  return out;
}

// Cumulative frequency table over [kSymbolMin, kSymbolMax]. cum has one
// more entry than the alphabet; cum.front() == 0, cum.back() == total.
struct CdfTable {
  std::int32_t min_symbol = kSymbolMin;
  std::vector<std::uint32_t> cum;

  std::size_t alphabet() const { return cum.size() - 1; }
  std::uint32_t total() const { return cum.back(); }
  std::uint32_t freq(std::size_t s) const { return cum[s + 1] - cum[s]; }
};

// Quantizes the channel's Laplacian to 16-bit frequencies. Every symbol
// keeps at least one count; the rounding remainder goes to the most
// probable symbol.
inline CdfTable build_cdf(const LaplaceChannel& ch) {
  std::vector<std::int64_t> freq(kAlphabetSize);
  std::size_t mps = 0;
  double best = -1.0;
  for (std::size_t s = 0; s < kAlphabetSize; ++s) {
    const double p = laplace_bin(static_cast<double>(kSymbolMin + static_cast<std::int32_t>(s)), ch).p;
    freq[s] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(p * kCdfTotal)));
    if (p > best) {
      best = p;
      mps = s;
    }
  }
  std::int64_t sum = 0;
  for (auto f : freq) sum += f;
  freq[mps] += static_cast<std::int64_t>(kCdfTotal) - sum;
  if (freq[mps] < 1) {
    // Only reachable for near-flat priors; fall back to a uniform table.
    std::fill(freq.begin(), freq.end(), static_cast<std::int64_t>(kCdfTotal / kAlphabetSize));
  }
  CdfTable t;
  t.cum.resize(kAlphabetSize + 1, 0);
  for (std::size_t s = 0; s < kAlphabetSize; ++s) t.cum[s + 1] = t.cum[s] + static_cast<std::uint32_t>(freq[s]);
  return t;
}

inline std::vector<CdfTable> build_cdfs(const EntropyModel& model) {
  std::vector<CdfTable> out;
  out.reserve(model.size());
  for (const auto& ch : model.channels) out.push_back(build_cdf(ch));
  return out;
}

}  // namespace lbpc::codec

#endif  // LBPC_CODEC_ENTROPY_HPP_
