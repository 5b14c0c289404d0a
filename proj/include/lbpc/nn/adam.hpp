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

#ifndef LBPC_NN_ADAM_HPP_
#define LBPC_NN_ADAM_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lbpc/core/error.hpp"
#include "lbpc/nn/network.hpp"

namespace lbpc::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First and second moments for one flat parameter block.
template <typename T>
struct Moments {
  std::vector<T> m;
  std::vector<T> v;
};

template <typename T>
void adam_update(std::span<T> params, std::span<const T> grads, Moments<T>& moments, std::uint64_t step,
                 const AdamConfig& cfg) {
  if (moments.m.size() != params.size()) {
    moments.m.assign(params.size(), T{0});
    moments.v.assign(params.size(), T{0});
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * g * g;
    moments.m[i] = static_cast<T>(m);
    moments.v[i] = static_cast<T>(v);
    params[i] = static_cast<T>(params[i] - cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.epsilon));
  }
}

template <typename T>
struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<Moments<T>>> layers;
};

template <typename T>
bool gradients_finite(const Gradients<T>& grads) {
  for (const auto& layer : grads.layers) {
    for (const auto& g : layer) {
      if (!g.all_finite()) return false;
    }
  }
  return true;
}

// One Adam step over every non-frozen layer that has gradients. Frozen
// layers are never touched. A non-finite gradient aborts before any update.
template <typename T>
void adam_step(Network<T>& net, const Gradients<T>& grads, AdamState<T>& state, const AdamConfig& cfg) {
  require(cfg.lr > 0.0, ErrorKind::kArgument, "adam learning rate must be positive");
  require(grads.layers.size() == net.size(), ErrorKind::kShape,
          "gradient list has " + std::to_string(grads.layers.size()) + " layers, network has " +
              std::to_string(net.size()));
  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    for (const auto& g : grads.layers[i]) {
      if (!g.all_finite()) {
        fail(ErrorKind::kNumeric, "non-finite gradient in layer " + std::to_string(i) + " (" +
                                      layer_kind_name(net.layer(i).spec.kind) + "), step skipped");
      }
    }
  }
  state.layers.resize(net.size());
  ++state.step;
  for (std::size_t i = 0; i < net.size(); ++i) {
    Layer<T>& layer = net.layer(i);
    if (layer.frozen || grads.layers[i].empty()) continue;
    state.layers[i].resize(layer.params.size());
    for (std::size_t p = 0; p < layer.params.size(); ++p) {
      adam_update<T>(layer.params[p].data(), grads.layers[i][p].data(), state.layers[i][p], state.step, cfg);
    }
  }
}

}  // namespace lbpc::nn

#endif  // LBPC_NN_ADAM_HPP_
