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

// JSON forms of adaptation configurations and CSV rows of compatibility
// reports.

#ifndef LBPC_TAXONOMY_JSON_HPP_
#define LBPC_TAXONOMY_JSON_HPP_

#include <cstdio>
#include <string>

#include <nlohmann/json.hpp>

#include "lbpc/core/error.hpp"
#include "lbpc/nn/layer_spec.hpp"
#include "lbpc/taxonomy/compat.hpp"
#include "lbpc/taxonomy/config.hpp"

namespace lbpc::taxonomy {

using Json = nlohmann::json;

inline Json layer_spec_to_json(const nn::LayerSpec& s) {
  Json j{{"kind", nn::layer_kind_name(s.kind)}};
  switch (s.kind) {
    case nn::LayerKind::kConv3D:
    case nn::LayerKind::kConvTranspose3D:
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["padding"] = s.padding == nn::Padding::kSame ? "same" : "valid";
      [[fallthrough]];
    case nn::LayerKind::kFullyConnected:
      j["in"] = s.in_channels;
      j["out"] = s.out_channels;
      j["bias"] = s.has_bias;
      break;
    case nn::LayerKind::kBatchNorm:
      j["channels"] = s.in_channels;
      break;
    case nn::LayerKind::kLeakyReLU:
      j["negative_slope"] = s.negative_slope;
      break;
    case nn::LayerKind::kResidual:
      j["channels"] = s.in_channels;
      j["inception"] = s.inception;
      j["negative_slope"] = s.negative_slope;
      break;
    default:
      break;
  }
  return j;
}

inline nn::LayerSpec layer_spec_from_json(const Json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    auto padding = [&] {
      const std::string p = j.value("padding", "same");
      require(p == "same" || p == "valid", ErrorKind::kConfig, "padding must be 'same' or 'valid'");
      return p == "same" ? nn::Padding::kSame : nn::Padding::kValid;
    };
    if (kind == nn::layer_kind_name(nn::LayerKind::kConv3D)) {
      return nn::LayerSpec::conv3d(j.at("in"), j.at("out"), j.value("kernel", 3), j.value("stride", 1), padding(),
                                   j.value("bias", true));
    }
    if (kind == nn::layer_kind_name(nn::LayerKind::kConvTranspose3D)) {
      return nn::LayerSpec::conv_transpose3d(j.at("in"), j.at("out"), j.value("kernel", 3), j.value("stride", 2),
                                             padding(), j.value("bias", true));
    }
    if (kind == nn::layer_kind_name(nn::LayerKind::kFullyConnected)) {
      return nn::LayerSpec::fully_connected(j.at("in"), j.at("out"), j.value("bias", true));
    }
    if (kind == nn::layer_kind_name(nn::LayerKind::kLeakyReLU)) {
      return nn::LayerSpec::leaky_relu(j.value("negative_slope", nn::kDefaultNegativeSlope));
    }
    if (kind == nn::layer_kind_name(nn::LayerKind::kBatchNorm)) return nn::LayerSpec::batch_norm(j.at("channels"));
    if (kind == nn::layer_kind_name(nn::LayerKind::kFlatten)) return nn::LayerSpec::flatten();
    if (kind == nn::layer_kind_name(nn::LayerKind::kSigmoid)) return nn::LayerSpec::sigmoid();
    if (kind == nn::layer_kind_name(nn::LayerKind::kResidual)) {
      return nn::LayerSpec::residual(j.at("channels"), j.value("inception", false),
                                     j.value("negative_slope", nn::kDefaultNegativeSlope));
    }
    fail(ErrorKind::kConfig, "unknown layer kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("bad layer spec: ") + e.what());
  }
}

inline Json config_to_json(const TaxonomyConfig& c) {
  Json j{{"name", c.name},
         {"adaptation", c.bridging() ? "PruningAndBridging" : "Pruning"},
         {"retrain_scope", c.retrain_scope}};
  if (c.bridge) {
    Json layers = Json::array();
    for (const auto& s : c.bridge->layers) layers.push_back(layer_spec_to_json(s));
    j["bridge"] = {{"depth", c.bridge->depth}, {"layers", layers}};
  } else {
    j["bridge"] = nullptr;
  }
  return j;
}

// Accepts a preset name or a full object.
inline TaxonomyConfig config_from_json(const Json& j, std::size_t conv_units = 4) {
  if (j.is_string()) return preset(j.get<std::string>(), conv_units);
  try {
    TaxonomyConfig c;
    c.name = j.value("name", std::string("custom"));
    const std::string mode = j.at("adaptation").get<std::string>();
    require(mode == "Pruning" || mode == "PruningAndBridging", ErrorKind::kConfig,
            "adaptation must be 'Pruning' or 'PruningAndBridging', got '" + mode + "'");
    c.adaptation = mode == "Pruning" ? Adaptation::kPruning : Adaptation::kPruningAndBridging;
    for (const auto& u : j.value("retrain_scope", Json::array())) c.retrain_scope.insert(u.get<std::size_t>());
    if (j.contains("bridge") && !j.at("bridge").is_null()) {
      BridgeSpec b;
      b.depth = j.at("bridge").value("depth", kDefaultBridgeDepth);
      for (const auto& s : j.at("bridge").value("layers", Json::array())) b.layers.push_back(layer_spec_from_json(s));
      c.bridge = b;
    }
    require(c.bridging() == c.bridge.has_value(), ErrorKind::kConfig,
            "configuration '" + c.name + "': a bridge is required exactly when bridging");
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("bad taxonomy configuration: ") + e.what());
  }
}

inline Json compat_to_json(const CompatReport& r) {
  Json layers = Json::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"unit", l.unit},
                      {"kind", l.kind},
                      {"parameters", l.parameters},
                      {"provenance", nn::provenance_name(l.provenance)},
                      {"shared", l.shared},
                      {"frozen", l.frozen}});
  }
  return {{"shared_layers", r.shared_layers},
          {"total_layers", r.total_layers},
          {"architecture_compat", r.architecture_compat()},
          {"compatible_weights", r.compatible_weights},
          {"total_weights", r.total_weights},
          {"weights_compat", r.weights_compat()},
          {"new_weights", r.new_weights},
          {"compatible_layers", r.compatible_label()},
          {"tier", tier_name(r.tier())},
          {"layers", layers}};
}

inline std::string percent(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * ratio);
  return buf;
}

inline std::string compat_csv_header() {
  return "solution,layers,architecture_compat,total_weights,compatible_weights,weights_compat,compatible_layers,"
         "new_weights,tier";
}

inline std::string compat_csv_row(const std::string& solution, const CompatReport& r) {
  return solution + "," + std::to_string(r.shared_layers) + "/" + std::to_string(r.total_layers) + "," +
         percent(r.architecture_compat()) + "," + std::to_string(r.total_weights) + "," +
         std::to_string(r.compatible_weights) + "," + percent(r.weights_compat()) + "," + r.compatible_label() + "," +
         std::to_string(r.new_weights) + "," + tier_name(r.tier());
}

}  // namespace lbpc::taxonomy

#endif  // LBPC_TAXONOMY_JSON_HPP_
