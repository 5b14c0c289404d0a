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

#ifndef LBPC_NN_LOSSES_HPP_
#define LBPC_NN_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "lbpc/core/error.hpp"
#include "lbpc/nn/tensor.hpp"

namespace lbpc::nn {

inline constexpr double kProbabilityFloor = 1e-7;

struct FocalParams {
  double alpha = 0.7;  // weight of occupied voxels
  double gamma = 2.0;
};

template <typename T>
struct LossResult {
  double value = 0.0;
  Tensor<T> grad;
};

// Mean over all voxels of -a_t (1 - p_t)^g log(p_t), where p_t is the
// predicted probability of the true occupancy state.
template <typename T>
LossResult<T> focal_loss(const Tensor<T>& probs, const Tensor<T>& target, FocalParams params = {}) {
  require(probs.shape() == target.shape(), ErrorKind::kShape,
          "focal loss: prediction " + shape_str(probs.shape()) + " vs target " +
              shape_str(target.shape()));
  LossResult<T> out{0.0, Tensor<T>(probs.shape(), T{0})};
  const double inv_n = 1.0 / static_cast<double>(probs.size());
  const double lo = kProbabilityFloor;
  const double hi = 1.0 - kProbabilityFloor;
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double raw = probs[i];
    const double p = std::clamp(raw, lo, hi);
    const bool occupied = target[i] > T{0.5};
    const double pt = occupied ? p : 1.0 - p;
    const double at = occupied ? params.alpha : 1.0 - params.alpha;
    const double one_minus = 1.0 - pt;
    const double mod = std::pow(one_minus, params.gamma);
    const double log_pt = std::log(pt);
    total += -at * mod * log_pt;
    if (raw > lo && raw < hi) {
      const double mod_deriv = params.gamma == 0.0 ? 0.0 : params.gamma * std::pow(one_minus, params.gamma - 1.0);
      const double d_pt = at * (mod_deriv * log_pt - mod / pt);
      out.grad[i] = static_cast<T>((occupied ? d_pt : -d_pt) * inv_n);
    }
  }
  out.value = total * inv_n;
  return out;
}

template <typename T>
std::vector<double> softmax(std::span<const T> logits) {
  require(!logits.empty(), ErrorKind::kArgument, "softmax of empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) - m);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

// -log softmax(logits)[label] for a single example, with gradient
// softmax - one_hot.
template <typename T>
LossResult<T> cross_entropy(std::span<const T> logits, std::size_t label) {
  require(label < logits.size(), ErrorKind::kArgument,
          "class id " + std::to_string(label) + " out of range for " +
              std::to_string(logits.size()) + " classes");
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (T v : logits) z += std::exp(static_cast<double>(v) - m);
  const double log_z = m + std::log(z);
  LossResult<T> out{log_z - static_cast<double>(logits[label]), Tensor<T>(Shape{logits.size()})};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.grad[i] = static_cast<T>(std::exp(static_cast<double>(logits[i]) - log_z) - (i == label ? 1.0 : 0.0));
  }
  return out;
}

// Batch mean of cross_entropy over logits [N, C].
template <typename T>
LossResult<T> cross_entropy_batch(const Tensor<T>& logits, std::span<const std::size_t> labels) {
  require(logits.rank() == 2 && logits.dim(0) == labels.size(), ErrorKind::kShape,
          "cross entropy: logits " + shape_str(logits.shape()) + " vs " +
              std::to_string(labels.size()) + " labels");
  const std::size_t n = logits.dim(0);
  const std::size_t c = logits.dim(1);
  LossResult<T> out{0.0, Tensor<T>(logits.shape())};
  for (std::size_t b = 0; b < n; ++b) {
    auto single = cross_entropy<T>(logits.item(b), labels[b]);
    out.value += single.value;
    for (std::size_t j = 0; j < c; ++j) out.grad[b * c + j] = static_cast<T>(single.grad[j] / static_cast<double>(n));
  }
  out.value /= static_cast<double>(n);
  return out;
}

}  // namespace lbpc::nn

#endif  // LBPC_NN_LOSSES_HPP_
