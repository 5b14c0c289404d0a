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

// Spatial-domain voxel classifier: Conv3D units (conv, LeakyReLU,
// BatchNorm), Flatten, three fully connected layers.
//
// Classifier file layout:
//
//   "LBCL" | u16 version | u16 grid | u8 points_per_cell | u32 point_count
//   | u8 n | (u32 out, u8 stride) * n | u8 m | u32 fc[m] | u32 classes
//   | u8 pruning_unit | f64 negative_slope | u32 len | model | u32 crc32

#ifndef LBPC_CLASSIFIER_MODEL_HPP_
#define LBPC_CLASSIFIER_MODEL_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lbpc/core/binary_io.hpp"
#include "lbpc/core/error.hpp"
#include "lbpc/nn/layer_spec.hpp"
#include "lbpc/nn/model_io.hpp"
#include "lbpc/nn/network.hpp"

namespace lbpc::classifier {

struct ConvUnitConfig {
  std::size_t out_channels = 32;
  int stride = 1;
  friend bool operator==(const ConvUnitConfig&, const ConvUnitConfig&) = default;
};

struct ClassifierConfig {
  int grid = 32;
  int points_per_cell = 1;
  long point_count = 1024;
  std::vector<ConvUnitConfig> conv = {{16, 2}, {64, 2}, {32, 1}, {32, 1}, {32, 1}, {32, 1}, {32, 1}};
  std::vector<std::size_t> hidden = {256, 64};  // widths of the first two FC layers
  std::size_t num_classes = 6;
  // Architecture unit at which compressed-domain models attach.
  int pruning_unit = 3;
  double negative_slope = nn::kDefaultNegativeSlope;

  std::size_t input_channels() const { return 3 * static_cast<std::size_t>(points_per_cell) + 1; }
  nn::Shape input_shape() const {
    const auto g = static_cast<std::size_t>(grid);
    return {g, g, g, input_channels()};
  }

  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

inline std::vector<nn::LayerSpec> classifier_specs(const ClassifierConfig& cfg) {
  using nn::LayerSpec;
  require(cfg.grid >= 1 && cfg.points_per_cell >= 0 && cfg.point_count >= 1, ErrorKind::kConfig,
          "classifier grid, points per cell and point count must be positive");
  require(!cfg.conv.empty(), ErrorKind::kConfig, "classifier needs at least one convolution");
  require(cfg.hidden.size() == 2, ErrorKind::kConfig, "classifier has exactly three fully connected layers");
  require(cfg.num_classes >= 2, ErrorKind::kConfig, "classifier needs at least two classes");
  std::vector<LayerSpec> specs;
  std::size_t in = cfg.input_channels();
  std::size_t extent = static_cast<std::size_t>(cfg.grid);
  for (const auto& u : cfg.conv) {
    require(u.stride == 1 || u.stride == 2, ErrorKind::kConfig, "convolution strides must be 1 or 2");
    require(u.out_channels > 0, ErrorKind::kConfig, "convolution widths must be positive");
    specs.push_back(LayerSpec::conv3d(in, u.out_channels, 3, u.stride));
    specs.push_back(LayerSpec::leaky_relu(cfg.negative_slope));
    specs.push_back(LayerSpec::batch_norm(u.out_channels));
    in = u.out_channels;
    extent = nn::conv_output_extent(extent, 3, u.stride, nn::Padding::kSame);
  }
  specs.push_back(LayerSpec::flatten());
  std::size_t flat = extent * extent * extent * in;
  for (std::size_t h : cfg.hidden) {
    specs.push_back(LayerSpec::fully_connected(flat, h));
    specs.push_back(LayerSpec::leaky_relu(cfg.negative_slope));
    flat = h;
  }
  specs.push_back(LayerSpec::fully_connected(flat, cfg.num_classes));
  return specs;
}

struct ClassifierModel {
  ClassifierConfig config;
  nn::Network<float> network;

  // First primitive layer of the pruning unit.
  std::size_t pruning_layer() const { return network.units().at(static_cast<std::size_t>(config.pruning_unit)).first; }
  nn::Shape pruning_input_shape() const { return network.layer(pruning_layer()).in_shape; }
};

// Input shape of architecture unit `unit`, or nullopt when it is not a
// convolution unit past the first.
inline std::optional<nn::Shape> unit_input_shape(const nn::Network<float>& net, int unit) {
  const auto units = net.units();
  if (unit < 1 || unit >= static_cast<int>(units.size())) return std::nullopt;
  const nn::Unit& u = units[static_cast<std::size_t>(unit)];
  if (u.kind != nn::LayerKind::kConv3D) return std::nullopt;
  return net.layer(u.first).in_shape;
}

// Fresh model. When `latent_shape` is given, the pruning unit's input must
// match it.
inline ClassifierModel build_st_classifier(const ClassifierConfig& cfg, std::uint64_t seed,
                                           std::optional<nn::Shape> latent_shape = std::nullopt) {
  ClassifierModel m{cfg, nn::Network<float>(cfg.input_shape(), classifier_specs(cfg), seed)};
  m.network.set_provenance(nn::Provenance::kFreshInit);
  const auto shape = unit_input_shape(m.network, cfg.pruning_unit);
  require(shape.has_value(), ErrorKind::kConfig,
          "pruning unit " + std::to_string(cfg.pruning_unit) + " is not a convolution after the first; adjust the "
          "grid size, strides or latent channels");
  if (latent_shape) {
    require(*shape == *latent_shape, ErrorKind::kConfig,
            "pruning unit " + std::to_string(cfg.pruning_unit) + " takes " + nn::shape_str(*shape) +
                " but the codec latent volume is " + nn::shape_str(*latent_shape) +
                "; adjust the grid size, strides or latent channels");
  }
  return m;
}

inline constexpr char kClassifierMagic[] = "LBCL";
inline constexpr std::uint16_t kClassifierVersion = 1;

inline void write_classifier_config(ByteWriter& w, const ClassifierConfig& c) {
  w.u16(static_cast<std::uint16_t>(c.grid));
  w.u8(static_cast<std::uint8_t>(c.points_per_cell));
  w.u32(static_cast<std::uint32_t>(c.point_count));
  w.u8(static_cast<std::uint8_t>(c.conv.size()));
  for (const auto& u : c.conv) {
    w.u32(static_cast<std::uint32_t>(u.out_channels));
    w.u8(static_cast<std::uint8_t>(u.stride));
  }
  w.u8(static_cast<std::uint8_t>(c.hidden.size()));
  for (std::size_t h : c.hidden) w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(c.num_classes));
  w.u8(static_cast<std::uint8_t>(c.pruning_unit));
  w.f64(c.negative_slope);
}

inline ClassifierConfig read_classifier_config(ByteReader& r) {
  ClassifierConfig c;
  c.grid = r.u16();
  c.points_per_cell = r.u8();
  c.point_count = r.u32();
  c.conv.resize(r.u8());
  for (auto& u : c.conv) {
    u.out_channels = r.u32();
    u.stride = r.u8();
  }
  c.hidden.resize(r.u8());
  for (auto& h : c.hidden) h = r.u32();
  c.num_classes = r.u32();
  c.pruning_unit = r.u8();
  c.negative_slope = r.f64();
  return c;
}

inline Bytes save_classifier(const ClassifierModel& m) {
  ByteWriter w;
  w.tag(std::string_view(kClassifierMagic, 4));
  w.u16(kClassifierVersion);
  write_classifier_config(w, m.config);
  Bytes blob = nn::save_network(m.network);
  w.u32(static_cast<std::uint32_t>(blob.size()));
  w.raw(blob);
  w.append_crc();
  return std::move(w).take();
}

inline ClassifierModel load_classifier(std::span<const std::uint8_t> bytes) {
  ByteReader r(checked_body(bytes, "classifier model"));
  r.expect_tag(std::string_view(kClassifierMagic, 4));
  const std::uint16_t version = r.u16();
  require(version == kClassifierVersion, ErrorKind::kVersion,
          "unsupported classifier model version " + std::to_string(version));
  ClassifierModel m;
  m.config = read_classifier_config(r);
  const std::uint32_t len = r.u32();
  m.network = nn::load_network<float>(r.raw(len));
  require(r.remaining() == 0, ErrorKind::kFormat, "trailing bytes in classifier model");
  require(m.network.specs() == classifier_specs(m.config) && m.network.input_shape() == m.config.input_shape(),
          ErrorKind::kFormat, "classifier network does not match its configuration");
  return m;
}

}  // namespace lbpc::classifier

#endif  // LBPC_CLASSIFIER_MODEL_HPP_
