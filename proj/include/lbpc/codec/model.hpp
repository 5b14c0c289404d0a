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

// Block autoencoder: strided analysis stack, mirrored transposed synthesis
// stack, per-channel Laplacian prior.
//
// Codec model file layout:
//
//   "LBCM" | u16 version | u8 bit_depth | u16 block_size | u16 sampling_factor
//   | u8 n | u32 widths[n] | u32 latent_channels | u8 residual_blocks
//   | u8 inception | f64 negative_slope | f64 threshold | u8 top_n
//   | f64 focal_alpha | f64 focal_gamma | f64 lambda | u8 lambda_index
//   | u32 len | analysis model | u32 len | synthesis model
//   | u32 channels | (f64 mu, f64 log_b) per channel | u32 crc32

#ifndef LBPC_CODEC_MODEL_HPP_
#define LBPC_CODEC_MODEL_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lbpc/codec/entropy.hpp"
#include "lbpc/core/binary_io.hpp"
#include "lbpc/core/error.hpp"
#include "lbpc/core/random.hpp"
#include "lbpc/nn/losses.hpp"
#include "lbpc/nn/model_io.hpp"
#include "lbpc/nn/network.hpp"
#include "lbpc/pcloud/point_cloud.hpp"

namespace lbpc::codec {

struct CodecConfig {
  int bit_depth = 6;
  int block_size = 32;
  int sampling_factor = 1;
  // Output widths of the strided analysis convolutions before the final
  // one; the stack has widths.size() + 1 stride-2 layers.
  std::vector<std::size_t> widths = {16, 32};
  std::size_t latent_channels = 32;
  int residual_blocks = 1;
  bool inception = false;
  double negative_slope = nn::kDefaultNegativeSlope;
  double threshold = 0.5;
  bool top_n = false;
  nn::FocalParams focal;

  int depth() const { return static_cast<int>(widths.size()) + 1; }
  int input_extent() const { return block_size / sampling_factor; }
  int latent_extent() const { return input_extent() >> depth(); }
  int blocks_per_axis() const { return (1 << bit_depth) / block_size; }
  int grid_extent() const { return blocks_per_axis() * latent_extent(); }
  nn::Shape block_shape() const {
    const auto n = static_cast<std::size_t>(input_extent());
    return {n, n, n, 1};
  }
  nn::Shape latent_shape() const {
    const auto n = static_cast<std::size_t>(latent_extent());
    return {n, n, n, latent_channels};
  }
  // Shape of the assembled whole-cloud latent volume.
  nn::Shape volume_shape() const {
    const auto n = static_cast<std::size_t>(grid_extent());
    return {n, n, n, latent_channels};
  }

  void validate() const {
    require(bit_depth >= 1 && bit_depth <= 16, ErrorKind::kConfig, "codec bit_depth must be in [1, 16]");
    require(pcloud::is_power_of_two(block_size) && block_size <= (1 << bit_depth), ErrorKind::kConfig,
            "block_size " + std::to_string(block_size) + " must be a power of two <= 2^bit_depth");
    require(pcloud::is_power_of_two(sampling_factor) && sampling_factor <= block_size, ErrorKind::kConfig,
            "sampling_factor " + std::to_string(sampling_factor) + " must be a power of two <= block_size");
    require(latent_channels > 0, ErrorKind::kConfig, "latent_channels must be positive");
    require((input_extent() >> depth()) >= 1 && (latent_extent() << depth()) == input_extent(), ErrorKind::kConfig,
            "block extent " + std::to_string(input_extent()) + " cannot be halved " + std::to_string(depth()) +
                " times");
    require(residual_blocks >= 0, ErrorKind::kConfig, "residual_blocks must be >= 0");
    require(threshold > 0.0 && threshold < 1.0, ErrorKind::kConfig, "threshold must be in (0, 1)");
  }

  friend bool operator==(const CodecConfig& a, const CodecConfig& b) {
    return a.bit_depth == b.bit_depth && a.block_size == b.block_size && a.sampling_factor == b.sampling_factor &&
           a.widths == b.widths && a.latent_channels == b.latent_channels && a.residual_blocks == b.residual_blocks &&
           a.inception == b.inception && a.negative_slope == b.negative_slope && a.threshold == b.threshold &&
           a.top_n == b.top_n && a.focal.alpha == b.focal.alpha && a.focal.gamma == b.focal.gamma;
  }
};

inline std::vector<nn::LayerSpec> analysis_specs(const CodecConfig& cfg) {
  using nn::LayerSpec;
  std::vector<LayerSpec> specs;
  std::size_t in = 1;
  for (std::size_t w : cfg.widths) {
    specs.push_back(LayerSpec::conv3d(in, w, 3, 2));
    specs.push_back(LayerSpec::leaky_relu(cfg.negative_slope));
    in = w;
  }
  specs.push_back(LayerSpec::conv3d(in, cfg.latent_channels, 3, 2));
  for (int r = 0; r < cfg.residual_blocks; ++r) {
    specs.push_back(LayerSpec::residual(cfg.latent_channels, cfg.inception, cfg.negative_slope));
  }
  return specs;
}

inline std::vector<nn::LayerSpec> synthesis_specs(const CodecConfig& cfg) {
  using nn::LayerSpec;
  std::vector<LayerSpec> specs;
  for (int r = 0; r < cfg.residual_blocks; ++r) {
    specs.push_back(LayerSpec::residual(cfg.latent_channels, cfg.inception, cfg.negative_slope));
  }
  std::size_t in = cfg.latent_channels;
  for (auto it = cfg.widths.rbegin(); it != cfg.widths.rend(); ++it) {
    specs.push_back(LayerSpec::conv_transpose3d(in, *it, 3, 2));
    specs.push_back(LayerSpec::leaky_relu(cfg.negative_slope));
    in = *it;
  }
  specs.push_back(LayerSpec::conv_transpose3d(in, 1, 3, 2));
  specs.push_back(LayerSpec::sigmoid());
  return specs;
}

template <typename T>
struct CodecModelT {
  CodecConfig config;
  nn::Network<T> analysis;
  nn::Network<T> synthesis;
  EntropyModel entropy;
  double lambda = 0.0;
  int lambda_index = 0;

  template <typename U>
  CodecModelT<U> cast() const {
    return {config, analysis.template cast<U>(), synthesis.template cast<U>(), entropy, lambda, lambda_index};
  }
};

using CodecModel = CodecModelT<float>;

template <typename T = float>
CodecModelT<T> build_codec(const CodecConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  CodecModelT<T> m;
  m.config = cfg;
  m.analysis = nn::Network<T>(cfg.block_shape(), analysis_specs(cfg), derive_seed(seed, 1));
  m.synthesis = nn::Network<T>(cfg.latent_shape(), synthesis_specs(cfg), derive_seed(seed, 2));
  m.entropy.channels.assign(cfg.latent_channels, LaplaceChannel{0.0, 0.0});
  return m;
}

inline constexpr char kCodecMagic[] = "LBCM";
inline constexpr std::uint16_t kCodecVersion = 1;

inline void write_codec_config(ByteWriter& w, const CodecConfig& c) {
  w.u8(static_cast<std::uint8_t>(c.bit_depth));
  w.u16(static_cast<std::uint16_t>(c.block_size));
  w.u16(static_cast<std::uint16_t>(c.sampling_factor));
  w.u8(static_cast<std::uint8_t>(c.widths.size()));
  for (std::size_t v : c.widths) w.u32(static_cast<std::uint32_t>(v));
  w.u32(static_cast<std::uint32_t>(c.latent_channels));
  w.u8(static_cast<std::uint8_t>(c.residual_blocks));
  w.u8(c.inception ? 1 : 0);
  w.f64(c.negative_slope);
  w.f64(c.threshold);
  w.u8(c.top_n ? 1 : 0);
  w.f64(c.focal.alpha);
  w.f64(c.focal.gamma);
}

inline CodecConfig read_codec_config(ByteReader& r) {
  CodecConfig c;
  c.bit_depth = r.u8();
  c.block_size = r.u16();
  c.sampling_factor = r.u16();
  c.widths.resize(r.u8());
  for (auto& v : c.widths) v = r.u32();
  c.latent_channels = r.u32();
  c.residual_blocks = r.u8();
  c.inception = r.u8() != 0;
  c.negative_slope = r.f64();
  c.threshold = r.f64();
  c.top_n = r.u8() != 0;
  c.focal.alpha = r.f64();
  c.focal.gamma = r.f64();
  return c;
}

template <typename T>
Bytes save_codec(const CodecModelT<T>& m) {
  ByteWriter w;
  w.tag(std::string_view(kCodecMagic, 4));
  w.u16(kCodecVersion);
  write_codec_config(w, m.config);
  w.f64(m.lambda);
  w.u8(static_cast<std::uint8_t>(m.lambda_index));
  for (const auto* net : {&m.analysis, &m.synthesis}) {
    Bytes blob = nn::save_network(*net);
    w.u32(static_cast<std::uint32_t>(blob.size()));
    w.raw(blob);
  }
  w.u32(static_cast<std::uint32_t>(m.entropy.size()));
  for (const auto& ch : m.entropy.channels) {
    w.f64(ch.mu);
    w.f64(ch.log_b);
  }
  w.append_crc();
  return std::move(w).take();
}

template <typename T = float>
CodecModelT<T> load_codec(std::span<const std::uint8_t> bytes) {
  ByteReader r(checked_body(bytes, "codec model"));
  r.expect_tag(std::string_view(kCodecMagic, 4));
  const std::uint16_t version = r.u16();
  require(version == kCodecVersion, ErrorKind::kVersion, "unsupported codec model version " + std::to_string(version));
  CodecModelT<T> m;
  m.config = read_codec_config(r);
  m.config.validate();
  m.lambda = r.f64();
  m.lambda_index = r.u8();
  for (auto* net : {&m.analysis, &m.synthesis}) {
    const std::uint32_t len = r.u32();
    *net = nn::load_network<T>(r.raw(len));
  }
  m.entropy.channels.resize(r.u32());
  for (auto& ch : m.entropy.channels) {
    ch.mu = r.f64();
    ch.log_b = r.f64();
  }
  require(r.remaining() == 0, ErrorKind::kFormat, "trailing bytes in codec model");
  require(m.analysis.input_shape() == m.config.block_shape() && m.analysis.output_shape() == m.config.latent_shape() &&
              m.synthesis.output_shape() == m.config.block_shape() &&
              m.entropy.size() == m.config.latent_channels,
          ErrorKind::kFormat, "codec model networks do not match its configuration");
  return m;
}

}  // namespace lbpc::codec

#endif  // LBPC_CODEC_MODEL_HPP_
