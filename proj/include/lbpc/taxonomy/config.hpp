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

// Adaptation configurations, pruning of the reference classifier and bridge
// synthesis.

#ifndef LBPC_TAXONOMY_CONFIG_HPP_
#define LBPC_TAXONOMY_CONFIG_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lbpc/core/error.hpp"
#include "lbpc/nn/layer_spec.hpp"
#include "lbpc/nn/network.hpp"

namespace lbpc::taxonomy {

enum class Adaptation { kPruning, kPruningAndBridging };

inline constexpr int kDefaultBridgeDepth = 2;

// Explicit layers, or (when `layers` is empty) a bridge synthesized for the
// shapes at hand with `depth` stride-1 convolutions.
struct BridgeSpec {
  int depth = kDefaultBridgeDepth;
  std::vector<nn::LayerSpec> layers;
  friend bool operator==(const BridgeSpec&, const BridgeSpec&) = default;
};

struct TaxonomyConfig {
  std::string name;
  Adaptation adaptation = Adaptation::kPruning;
  std::set<std::size_t> retrain_scope;  // partial-classifier unit indices
  std::optional<BridgeSpec> bridge;

  bool bridging() const { return adaptation == Adaptation::kPruningAndBridging; }
  friend bool operator==(const TaxonomyConfig&, const TaxonomyConfig&) = default;
};

inline void validate_config(const TaxonomyConfig& cfg, std::size_t partial_units) {
  require(cfg.bridging() == cfg.bridge.has_value(), ErrorKind::kConfig,
          "configuration '" + cfg.name + "': a bridge spec is required exactly when bridging");
  for (std::size_t u : cfg.retrain_scope) {
    require(u < partial_units, ErrorKind::kConfig,
            "configuration '" + cfg.name + "': retrain unit " + std::to_string(u) + " outside the " +
                std::to_string(partial_units) + "-layer partial classifier");
  }
  if (cfg.bridge) {
    require(cfg.bridge->depth >= 1 || !cfg.bridge->layers.empty(), ErrorKind::kConfig,
            "configuration '" + cfg.name + "': bridge depth must be at least 1");
  }
}

inline constexpr std::array<std::string_view, 6> kPresetNames = {
    "HighComp", "MediumComp", "LowComp", "HighComp+Bridge", "MediumComp+Bridge", "LowComp+Bridge"};

// `conv_units` is the number of convolution units in the partial
// classifier. MediumComp retrains the upper half of them, LowComp all.
inline TaxonomyConfig preset(std::string_view name, std::size_t conv_units = 4) {
  std::string key;
  for (char c : name) {
    if (c != ' ') key.push_back(c);
  }
  TaxonomyConfig cfg;
  std::string base = key;
  const std::string suffix = "+Bridge";
  if (key.size() > suffix.size() && key.ends_with(suffix)) {
    base = key.substr(0, key.size() - suffix.size());
    cfg.adaptation = Adaptation::kPruningAndBridging;
    cfg.bridge = BridgeSpec{};
  }
  std::size_t retrain = 0;
  if (base == "HighComp") {
    retrain = 0;
  } else if (base == "MediumComp") {
    retrain = conv_units / 2;
  } else if (base == "LowComp") {
    retrain = conv_units;
  } else {
    std::string known;
    for (auto n : kPresetNames) known += (known.empty() ? "" : ", ") + std::string(n);
    fail(ErrorKind::kConfig, "unknown taxonomy preset '" + std::string(name) + "' (known: " + known + ")");
  }
  for (std::size_t u = 0; u < retrain; ++u) cfg.retrain_scope.insert(u);
  cfg.name = key;
  return cfg;
}

// Units p..end of the reference, copied with FromReference provenance.
inline nn::Network<float> prune(const nn::Network<float>& reference, std::size_t p) {
  const auto units = reference.units();
  require(p < units.size(), ErrorKind::kArgument,
          "pruning index " + std::to_string(p) + " outside the " + std::to_string(units.size()) + "-layer reference");
  const std::size_t first = units[p].first;
  std::vector<nn::Layer<float>> layers(reference.layers().begin() + static_cast<std::ptrdiff_t>(first),
                                       reference.layers().end());
  for (auto& l : layers) {
    l.frozen = false;
    l.provenance = nn::Provenance::kFromReference;
  }
  return nn::Network<float>::from_layers(reference.layer(first).in_shape, std::move(layers));
}

struct VolumeMatch {
  bool ok = false;
  std::string diagnostic;
};

inline VolumeMatch validate_volume_match(const nn::Shape& latent, const nn::Shape& partial_input) {
  if (latent == partial_input) return {true, ""};
  std::string what;
  if (latent.size() != partial_input.size()) {
    what = "rank";
  } else {
    for (std::size_t i = 0; i < latent.size(); ++i) {
      if (latent[i] == partial_input[i]) continue;
      if (!what.empty()) what += ", ";
      what += i + 1 == latent.size() ? "channels" : "axis " + std::to_string(i);
    }
  }
  return {false, "latent volume " + nn::shape_str(latent) + " does not match the partial classifier input " +
                     nn::shape_str(partial_input) + " (mismatch on " + what +
                     "); use a bridge to resample the latents or choose another pruning point"};
}

namespace detail {

inline int log2_ratio(std::size_t from, std::size_t to) {
  const std::size_t big = std::max(from, to), small = std::min(from, to);
  if (small == 0) return -1;
  int k = 0;
  for (std::size_t s = small; s < big; s *= 2) ++k;
  return (small << k) == big ? k : -1;
}

}  // namespace detail

// Resampling layers first (stride-2 convolutions to shrink, stride-2
// transposed convolutions to grow), then `depth` stride-1 k=3 convolutions
// at the latent channel count, then a 1x1x1 channel map if needed, with
// LeakyReLU between consecutive layers.
inline std::vector<nn::LayerSpec> bridge_specs(const nn::Shape& latent, const nn::Shape& target, int depth,
                                               double negative_slope = nn::kDefaultNegativeSlope) {
  require(depth >= 1, ErrorKind::kConfig, "bridge depth must be at least 1");
  require(latent.size() == 4 && target.size() == 4, ErrorKind::kShape,
          "bridge shapes must be D x D x D x C, got " + nn::shape_str(latent) + " and " + nn::shape_str(target));
  const int k = detail::log2_ratio(latent[0], target[0]);
  for (std::size_t a = 0; a < 3; ++a) {
    require(k >= 0 && detail::log2_ratio(latent[a], target[a]) == k &&
                (latent[a] < target[a]) == (latent[0] < target[0]),
            ErrorKind::kConfig,
            "bridge cannot resample " + nn::shape_str(latent) + " to " + nn::shape_str(target) +
                ": spatial ratio must be the same power of two on every axis");
  }
  const std::size_t c = latent[3];
  std::vector<nn::LayerSpec> convs;
  for (int i = 0; i < k; ++i) {
    convs.push_back(latent[0] > target[0] ? nn::LayerSpec::conv3d(c, c, 3, 2)
                                          : nn::LayerSpec::conv_transpose3d(c, c, 3, 2));
  }
  for (int i = 0; i < depth; ++i) convs.push_back(nn::LayerSpec::conv3d(c, c, 3, 1));
  if (target[3] != c) convs.push_back(nn::LayerSpec::conv3d(c, target[3], 1, 1));
  std::vector<nn::LayerSpec> specs;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    if (i > 0) specs.push_back(nn::LayerSpec::leaky_relu(negative_slope));
    specs.push_back(convs[i]);
  }
  return specs;
}

inline nn::Network<float> build_bridge(const nn::Shape& latent, const nn::Shape& target, int depth,
                                       std::uint64_t seed) {
  nn::Network<float> net(latent, bridge_specs(latent, target, depth), seed);
  net.set_provenance(nn::Provenance::kFreshInit);
  require(net.output_shape() == target, ErrorKind::kState,
          "bridge produces " + nn::shape_str(net.output_shape()) + " instead of " + nn::shape_str(target));
  return net;
}

// Bridge layers for `cfg`, or an empty list when it does not bridge.
inline std::vector<nn::LayerSpec> resolve_bridge(const TaxonomyConfig& cfg, const nn::Shape& latent,
                                                 const nn::Shape& target) {
  if (!cfg.bridging()) return {};
  if (!cfg.bridge->layers.empty()) return cfg.bridge->layers;
  return bridge_specs(latent, target, cfg.bridge->depth);
}

}  // namespace lbpc::taxonomy

#endif  // LBPC_TAXONOMY_CONFIG_HPP_
