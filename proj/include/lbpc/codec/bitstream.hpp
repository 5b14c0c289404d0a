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

// Stream layout (little-endian):
//
//   "LBPC" | u16 version | u8 bit_depth | u16 block_size | u16 sampling_factor
//   | u8 lambda_index | u32 block_count | u16 latent_extent | u16 channels
//   per block: u16 x | u16 y | u16 z | u32 payload_bytes | payload
//   u32 crc32

#ifndef LBPC_CODEC_BITSTREAM_HPP_
#define LBPC_CODEC_BITSTREAM_HPP_

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lbpc/codec/entropy.hpp"
#include "lbpc/codec/model.hpp"
#include "lbpc/codec/range_coder.hpp"
#include "lbpc/codec/train.hpp"
#include "lbpc/core/binary_io.hpp"
#include "lbpc/core/error.hpp"
#include "lbpc/pcloud/point_cloud.hpp"

namespace lbpc::codec {

inline constexpr char kStreamMagic[] = "LBPC";
inline constexpr std::uint16_t kStreamVersion = 1;

// Process-wide call counters, used to check which stages a pipeline runs.
struct CodecCounters {
  std::atomic<std::uint64_t> analysis_calls{0};
  std::atomic<std::uint64_t> synthesis_calls{0};
  std::atomic<std::uint64_t> range_encodes{0};
  std::atomic<std::uint64_t> range_decodes{0};
  std::atomic<std::uint64_t> decode_pc_calls{0};

  void reset() {
    analysis_calls = 0;
    synthesis_calls = 0;
    range_encodes = 0;
    range_decodes = 0;
    decode_pc_calls = 0;
  }
};

inline CodecCounters& codec_counters() {
  static CodecCounters counters;
  return counters;
}

struct StreamHeader {
  int bit_depth = 0;
  int block_size = 0;
  int sampling_factor = 0;
  int lambda_index = 0;
  std::uint32_t block_count = 0;
  int latent_extent = 0;
  std::size_t channels = 0;
};

struct BlockPayload {
  pcloud::Voxel origin{};
  std::vector<std::uint8_t> bytes;
};

struct ParsedStream {
  StreamHeader header;
  std::vector<BlockPayload> blocks;
};

struct EncodeStats {
  std::size_t blocks = 0;
  std::size_t stream_bytes = 0;
  std::size_t payload_bytes = 0;
  std::size_t clamped = 0;
  double estimated_bits = 0.0;  // ideal code length of the coded latents
};

struct EncodeResult {
  Bytes stream;
  EncodeStats stats;
};

// Quantized latent of one block together with the cell it came from.
struct BlockLatent {
  pcloud::Voxel origin{};
  std::vector<std::int32_t> symbols;  // channels-last, latent_shape volume
};

// Whole-cloud latent tensor on the block grid; unoccupied cells are zero.
struct LatentVolume {
  nn::Tensor<std::int32_t> values;
  std::vector<pcloud::Voxel> cells;  // block-grid coordinates that hold data
  int lambda_index = 0;
  std::size_t channels = 0;

  template <typename T = float>
  nn::Tensor<T> as_real() const {
    nn::Tensor<T> t(values.shape());
    for (std::size_t i = 0; i < values.size(); ++i) t[i] = static_cast<T>(values[i]);
    return t;
  }
};

inline StreamHeader header_for(const CodecConfig& cfg, int lambda_index, std::uint32_t blocks) {
  return {cfg.bit_depth, cfg.block_size, cfg.sampling_factor, lambda_index, blocks, cfg.latent_extent(),
          cfg.latent_channels};
}

inline void check_header(const StreamHeader& h, const CodecModel& model) {
  const StreamHeader want = header_for(model.config, model.lambda_index, h.block_count);
  auto mismatch = [](const std::string& what, long got, long expected) {
    fail(ErrorKind::kConfig, "stream " + what + " " + std::to_string(got) + " does not match model's " +
                                 std::to_string(expected));
  };
  if (h.bit_depth != want.bit_depth) mismatch("bit_depth", h.bit_depth, want.bit_depth);
  if (h.block_size != want.block_size) mismatch("block_size", h.block_size, want.block_size);
  if (h.sampling_factor != want.sampling_factor) mismatch("sampling_factor", h.sampling_factor, want.sampling_factor);
  if (h.lambda_index != want.lambda_index) mismatch("lambda index", h.lambda_index, want.lambda_index);
  if (h.latent_extent != want.latent_extent) mismatch("latent extent", h.latent_extent, want.latent_extent);
  if (h.channels != want.channels) {
    mismatch("channel count", static_cast<long>(h.channels), static_cast<long>(want.channels));
  }
}

inline Bytes write_stream(const StreamHeader& h, std::span<const BlockPayload> blocks) {
  ByteWriter w;
  w.tag(std::string_view(kStreamMagic, 4));
  w.u16(kStreamVersion);
  w.u8(static_cast<std::uint8_t>(h.bit_depth));
  w.u16(static_cast<std::uint16_t>(h.block_size));
  w.u16(static_cast<std::uint16_t>(h.sampling_factor));
  w.u8(static_cast<std::uint8_t>(h.lambda_index));
  w.u32(static_cast<std::uint32_t>(blocks.size()));
  w.u16(static_cast<std::uint16_t>(h.latent_extent));
  w.u16(static_cast<std::uint16_t>(h.channels));
  for (const auto& b : blocks) {
    for (auto c : b.origin) w.u16(static_cast<std::uint16_t>(c));
    w.u32(static_cast<std::uint32_t>(b.bytes.size()));
    w.raw(b.bytes);
  }
  w.append_crc();
  return std::move(w).take();
}

inline ParsedStream parse_stream(std::span<const std::uint8_t> bytes) {
  ByteReader r(checked_body(bytes, "bitstream"));
  r.expect_tag(std::string_view(kStreamMagic, 4));
  const std::uint16_t version = r.u16();
  require(version == kStreamVersion, ErrorKind::kVersion, "unsupported bitstream version " + std::to_string(version));
  ParsedStream s;
  s.header.bit_depth = r.u8();
  s.header.block_size = r.u16();
  s.header.sampling_factor = r.u16();
  s.header.lambda_index = r.u8();
  s.header.block_count = r.u32();
  s.header.latent_extent = r.u16();
  s.header.channels = r.u16();
  for (std::uint32_t i = 0; i < s.header.block_count; ++i) {
    BlockPayload b;
    for (auto& c : b.origin) c = r.u16();
    const std::uint32_t len = r.u32();
    auto raw = r.raw(len);
    b.bytes.assign(raw.begin(), raw.end());
    s.blocks.push_back(std::move(b));
  }
  require(r.remaining() == 0, ErrorKind::kFormat, std::to_string(r.remaining()) + " trailing bytes in bitstream");
  return s;
}

// Quantized, support-clamped latents of each non-empty block, in partition
// order. `clamped` counts values pulled into [kSymbolMin, kSymbolMax].
inline std::vector<BlockLatent> block_latents(const pcloud::PointCloudV& pc, const CodecModel& model,
                                              std::size_t* clamped = nullptr) {
  const CodecConfig& cfg = model.config;
  require(pc.bit_depth() == cfg.bit_depth, ErrorKind::kArgument,
          "cloud bit depth " + std::to_string(pc.bit_depth()) + " does not match codec bit depth " +
              std::to_string(cfg.bit_depth));
  std::vector<BlockLatent> out;
  for (const pcloud::Block& block : pcloud::partition(pc, cfg.block_size)) {
    const pcloud::Block small = pcloud::downsample(block, cfg.sampling_factor);
    nn::Tensor<float> x = block_tensor<float>(small).reshaped(
        {1, static_cast<std::size_t>(small.size), static_cast<std::size_t>(small.size),
         static_cast<std::size_t>(small.size), 1});
    codec_counters().analysis_calls++;
    nn::Tensor<float> y = quantize(model.analysis.infer(x), nn::Mode::kInfer);
    BlockLatent bl;
    bl.origin = block.origin;
    bl.symbols.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const auto v = static_cast<std::int64_t>(y[i]);
      const auto c = std::clamp<std::int64_t>(v, kSymbolMin, kSymbolMax);
      if (c != v && clamped != nullptr) ++*clamped;
      bl.symbols[i] = static_cast<std::int32_t>(c);
    }
    out.push_back(std::move(bl));
  }
  return out;
}

inline EncodeResult encode_pc(const pcloud::PointCloudV& pc, const CodecModel& model) {
  EncodeResult res;
  const auto tables = build_cdfs(model.entropy);
  std::vector<BlockPayload> payloads;
  for (const BlockLatent& bl : block_latents(pc, model, &res.stats.clamped)) {
    BlockPayload p;
    p.origin = bl.origin;
    codec_counters().range_encodes++;
    p.bytes = range_encode(bl.symbols, tables);
    for (std::size_t i = 0; i < bl.symbols.size(); ++i) {
      res.stats.estimated_bits += symbol_bits(bl.symbols[i], model.entropy.channels[i % tables.size()]);
    }
    res.stats.payload_bytes += p.bytes.size();
    payloads.push_back(std::move(p));
  }
  res.stats.blocks = payloads.size();
  res.stream = write_stream(header_for(model.config, model.lambda_index, static_cast<std::uint32_t>(payloads.size())),
                            payloads);
  res.stats.stream_bytes = res.stream.size();
  return res;
}

// Entropy-decodes every block payload; no synthesis.
inline std::vector<BlockLatent> decode_block_latents(const ParsedStream& s, const CodecModel& model) {
  check_header(s.header, model);
  const auto tables = build_cdfs(model.entropy);
  const std::size_t count = nn::shape_volume(model.config.latent_shape());
  const std::int32_t limit = 1 << model.config.bit_depth;
  std::vector<BlockLatent> out;
  for (const auto& b : s.blocks) {
    for (auto c : b.origin) {
      require(c < limit && c % model.config.block_size == 0, ErrorKind::kFormat,
              "block origin " + std::to_string(c) + " is not on the block grid");
    }
    BlockLatent bl;
    bl.origin = b.origin;
    codec_counters().range_decodes++;
    bl.symbols = range_decode(b.bytes, tables, count);
    out.push_back(std::move(bl));
  }
  return out;
}

// Synthesis of one block's latents into occupancy at the downsampled
// resolution. With top_n, exactly `keep` voxels are set (highest
// probability first, lowest index on ties); otherwise p >= threshold.
inline pcloud::Block synthesize_block(const BlockLatent& bl, const CodecModel& model,
                                      std::optional<std::size_t> keep = std::nullopt) {
  const CodecConfig& cfg = model.config;
  nn::Shape shape = cfg.latent_shape();
  shape.insert(shape.begin(), 1);
  nn::Tensor<float> y(shape);
  for (std::size_t i = 0; i < bl.symbols.size(); ++i) y[i] = static_cast<float>(bl.symbols[i]);
  codec_counters().synthesis_calls++;
  nn::Tensor<float> p = model.synthesis.infer(y);
  pcloud::Block out(bl.origin, cfg.input_extent());
  if (keep) {
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t n = std::min(*keep, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                      [&](std::size_t a, std::size_t b) { return p[a] > p[b] || (p[a] == p[b] && a < b); });
    for (std::size_t i = 0; i < n; ++i) out.occupancy[idx[i]] = 1;
  } else {
    for (std::size_t i = 0; i < p.size(); ++i) out.occupancy[i] = p[i] >= cfg.threshold ? 1 : 0;
  }
  return out;
}

// Lossy reconstruction. `counts` supplies per-block voxel counts when the
// model binarizes by top-N; they are side information, not part of the
// stream.
inline pcloud::PointCloudV decode_pc(std::span<const std::uint8_t> stream, const CodecModel& model,
                                     std::span<const std::size_t> counts = {}) {
  codec_counters().decode_pc_calls++;
  const ParsedStream s = parse_stream(stream);
  const auto latents = decode_block_latents(s, model);
  if (model.config.top_n) {
    require(counts.size() == latents.size(), ErrorKind::kArgument,
            "top-N binarization needs one voxel count per block (" + std::to_string(latents.size()) + ")");
  }
  std::vector<pcloud::Block> blocks;
  for (std::size_t i = 0; i < latents.size(); ++i) {
    std::optional<std::size_t> keep;
    if (model.config.top_n) keep = counts[i];
    blocks.push_back(pcloud::upsample(synthesize_block(latents[i], model, keep), model.config.sampling_factor));
  }
  return pcloud::merge(blocks, model.config.bit_depth);
}

// Per-block occupied voxel counts after downsampling, for top-N decoding.
inline std::vector<std::size_t> block_counts(const pcloud::PointCloudV& pc, const CodecConfig& cfg) {
  std::vector<std::size_t> out;
  for (const auto& b : pcloud::partition(pc, cfg.block_size)) {
    out.push_back(pcloud::downsample(b, cfg.sampling_factor).occupied_count());
  }
  return out;
}

// Places each block's latent at its block-grid cell of the global volume.
inline LatentVolume assemble_latents(std::span<const BlockLatent> blocks, const CodecConfig& cfg, int lambda_index) {
  const auto d = static_cast<std::size_t>(cfg.latent_extent());
  const std::size_t c = cfg.latent_channels;
  const auto g = static_cast<std::size_t>(cfg.grid_extent());
  LatentVolume vol;
  vol.values = nn::Tensor<std::int32_t>(cfg.volume_shape());
  vol.lambda_index = lambda_index;
  vol.channels = c;
  std::set<pcloud::Voxel> seen;
  for (const BlockLatent& bl : blocks) {
    require(bl.symbols.size() == d * d * d * c, ErrorKind::kShape, "block latent has the wrong size");
    pcloud::Voxel cell{};
    for (int a = 0; a < 3; ++a) {
      require(bl.origin[a] >= 0 && bl.origin[a] % cfg.block_size == 0 &&
                  bl.origin[a] / cfg.block_size < cfg.blocks_per_axis(),
              ErrorKind::kArgument, "block origin off the block grid");
      cell[a] = bl.origin[a] / cfg.block_size;
    }
    require(seen.insert(cell).second, ErrorKind::kArgument,
            "two blocks map to grid cell (" + std::to_string(cell[0]) + ", " + std::to_string(cell[1]) + ", " +
                std::to_string(cell[2]) + ")");
    vol.cells.push_back(cell);
    for (std::size_t x = 0; x < d; ++x)
      for (std::size_t y = 0; y < d; ++y)
        for (std::size_t z = 0; z < d; ++z) {
          const std::size_t gx = cell[0] * d + x, gy = cell[1] * d + y, gz = cell[2] * d + z;
          std::copy_n(bl.symbols.begin() + static_cast<std::ptrdiff_t>(((x * d + y) * d + z) * c), c,
                      vol.values.data().begin() + static_cast<std::ptrdiff_t>(((gx * g + gy) * g + gz) * c));
        }
  }
  return vol;
}

// Encoder-side latents, without entropy coding.
inline LatentVolume extract_latents(const pcloud::PointCloudV& pc, const CodecModel& model) {
  const auto blocks = block_latents(pc, model);
  return assemble_latents(blocks, model.config, model.lambda_index);
}

// Decoder-side latents: entropy decoding only, no synthesis.
inline LatentVolume latents_from_stream(std::span<const std::uint8_t> stream, const CodecModel& model) {
  const ParsedStream s = parse_stream(stream);
  const auto blocks = decode_block_latents(s, model);
  return assemble_latents(blocks, model.config, model.lambda_index);
}

}  // namespace lbpc::codec

#endif  // LBPC_CODEC_BITSTREAM_HPP_
