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

// Architecture and weights compatibility of a compressed-domain classifier
// with the spatial-domain model it was derived from.
//
// A "layer" here is an architecture unit: a convolution or fully connected
// layer together with the activation, normalization and flatten steps that
// follow it.

#ifndef LBPC_TAXONOMY_COMPAT_HPP_
#define LBPC_TAXONOMY_COMPAT_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "lbpc/core/error.hpp"
#include "lbpc/nn/layer_spec.hpp"
#include "lbpc/nn/network.hpp"

namespace lbpc::taxonomy {

enum class Tier { kHigh, kMedium, kLow };

inline std::string tier_name(Tier t) {
  switch (t) {
    case Tier::kHigh: return "High";
    case Tier::kMedium: return "Medium";
    case Tier::kLow: return "Low";
  }
  return "?";
}

// High above 90 %, Low below 30 %; the boundaries themselves fall in the
// lower tier.
inline Tier tier_for(double weights_compat) {
  if (weights_compat > 0.9) return Tier::kHigh;
  if (weights_compat > 0.3) return Tier::kMedium;
  return Tier::kLow;
}

struct LayerCompat {
  std::size_t unit = 0;
  std::string kind;
  std::size_t parameters = 0;
  nn::Provenance provenance = nn::Provenance::kFreshInit;
  bool shared = false;  // architecture inherited from the reference
  bool frozen = false;
};

struct CompatReport {
  std::size_t shared_layers = 0;
  std::size_t total_layers = 0;
  std::size_t compatible_weights = 0;
  std::size_t total_weights = 0;
  std::size_t new_weights = 0;
  std::size_t compatible_conv = 0;  // reused-weight layers by kind
  std::size_t compatible_fc = 0;
  std::vector<LayerCompat> layers;

  double architecture_compat() const {
    return total_layers ? static_cast<double>(shared_layers) / static_cast<double>(total_layers) : 0.0;
  }
  double weights_compat() const {
    return total_weights ? static_cast<double>(compatible_weights) / static_cast<double>(total_weights) : 0.0;
  }
  Tier tier() const { return tier_for(weights_compat()); }

  // "4CNN+3FC", "3FC", or "none".
  std::string compatible_label() const {
    std::string s;
    if (compatible_conv) s += std::to_string(compatible_conv) + "CNN";
    if (compatible_fc) s += (s.empty() ? "" : "+") + std::to_string(compatible_fc) + "FC";
    return s.empty() ? "none" : s;
  }
};

// Aggregate form: component sizes only, as listed in a summary table.
struct ComponentTotals {
  std::size_t partial_conv = 0;
  std::size_t partial_fc = 0;
  std::size_t partial_params = 0;
  std::size_t frozen_conv = 0;  // partial layers keeping reference weights
  std::size_t frozen_fc = 0;
  std::size_t frozen_params = 0;
  std::size_t bridge_layers = 0;
  std::size_t bridge_params = 0;
};

inline CompatReport compat_from_totals(const ComponentTotals& t) {
  require(t.frozen_conv <= t.partial_conv && t.frozen_fc <= t.partial_fc && t.frozen_params <= t.partial_params,
          ErrorKind::kArgument, "frozen part exceeds the partial classifier");
  CompatReport r;
  r.shared_layers = t.partial_conv + t.partial_fc;
  r.total_layers = r.shared_layers + t.bridge_layers;
  r.total_weights = t.partial_params + t.bridge_params;
  r.compatible_weights = t.frozen_params;
  r.new_weights = r.total_weights - r.compatible_weights;
  r.compatible_conv = t.frozen_conv;
  r.compatible_fc = t.frozen_fc;
  return r;
}

// Per-unit accounting of a bridge-plus-partial network whose first
// `bridge_units` units form the bridge.
inline CompatReport compatibility_report(const nn::Network<float>& net, std::size_t bridge_units) {
  const auto units = net.units();
  require(bridge_units <= units.size(), ErrorKind::kArgument, "bridge is longer than the network");
  CompatReport r;
  r.total_layers = units.size();
  for (std::size_t u = 0; u < units.size(); ++u) {
    LayerCompat lc;
    lc.unit = u;
    lc.kind = nn::layer_kind_name(units[u].kind);
    lc.provenance = net.layer(units[u].first).provenance;
    lc.shared = u >= bridge_units;
    lc.frozen = net.layer(units[u].first).frozen;
    for (std::size_t i = units[u].first; i <= units[u].last; ++i) {
      lc.parameters += net.layer(i).parameter_count();
      require(net.layer(i).provenance == lc.provenance, ErrorKind::kState,
              "layers of unit " + std::to_string(u) + " disagree on provenance");
    }
    r.total_weights += lc.parameters;
    if (lc.shared) ++r.shared_layers;
    if (lc.provenance == nn::Provenance::kFromReference) {
      require(lc.shared, ErrorKind::kState, "bridge unit " + std::to_string(u) + " claims reference weights");
      r.compatible_weights += lc.parameters;
      if (units[u].kind == nn::LayerKind::kFullyConnected) ++r.compatible_fc;
      else ++r.compatible_conv;
    }
    r.layers.push_back(std::move(lc));
  }
  r.new_weights = r.total_weights - r.compatible_weights;
  return r;
}

}  // namespace lbpc::taxonomy

#endif  // LBPC_TAXONOMY_COMPAT_HPP_
