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

// Model file layout (all integers little-endian):
//
//   "LBNM" | u16 version | u8 input rank | u32 dims... | u32 layer count
//   per layer: u8 kind | u8 kernel | u8 stride | u8 padding | u32 in | u32 out
//              | u8 bias | f64 negative slope | u8 inception | u8 frozen
//              | u8 provenance
//   per layer: u8 tensor count | tensors...  (trainable parameters)
//              u8 tensor count | tensors...  (running statistics)
//   tensor:    u8 rank | u32 dims... | f32 values...
//   u32 crc32 of everything above

#ifndef LBPC_NN_MODEL_IO_HPP_
#define LBPC_NN_MODEL_IO_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lbpc/core/binary_io.hpp"
#include "lbpc/nn/network.hpp"

namespace lbpc::nn {

inline constexpr char kModelMagic[] = "LBNM";
inline constexpr std::uint16_t kModelVersion = 1;

namespace detail {

template <typename T>
void write_tensor(ByteWriter& w, const Tensor<T>& t) {
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (T v : t.data()) w.f32(static_cast<float>(v));
}

template <typename T>
Tensor<T> read_tensor(ByteReader& r) {
  const std::size_t rank = r.u8();
  Shape shape(rank);
  for (auto& d : shape) d = r.u32();
  std::vector<T> data(shape_volume(shape));
  for (auto& v : data) v = static_cast<T>(r.f32());
  return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace detail

template <typename T>
Bytes save_network(const Network<T>& net) {
  ByteWriter w;
  w.tag(std::string_view(kModelMagic, 4));
  w.u16(kModelVersion);
  w.u8(static_cast<std::uint8_t>(net.input_shape().size()));
  for (std::size_t d : net.input_shape()) w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(net.size()));
  for (const auto& l : net.layers()) {
    const LayerSpec& s = l.spec;
    w.u8(static_cast<std::uint8_t>(s.kind));
    w.u8(static_cast<std::uint8_t>(s.kernel));
    w.u8(static_cast<std::uint8_t>(s.stride));
    w.u8(static_cast<std::uint8_t>(s.padding));
    w.u32(static_cast<std::uint32_t>(s.in_channels));
    w.u32(static_cast<std::uint32_t>(s.out_channels));
    w.u8(s.has_bias ? 1 : 0);
    w.f64(s.negative_slope);
    w.u8(s.inception ? 1 : 0);
    w.u8(l.frozen ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(l.provenance));
  }
  for (const auto& l : net.layers()) {
    w.u8(static_cast<std::uint8_t>(l.params.size()));
    for (const auto& p : l.params) detail::write_tensor(w, p);
    w.u8(static_cast<std::uint8_t>(l.buffers.size()));
    for (const auto& b : l.buffers) detail::write_tensor(w, b);
  }
  w.append_crc();
  return std::move(w).take();
}

template <typename T>
Network<T> load_network(std::span<const std::uint8_t> bytes) {
  ByteReader r(checked_body(bytes, "model file"));
  r.expect_tag(std::string_view(kModelMagic, 4));
  const std::uint16_t version = r.u16();
  require(version == kModelVersion, ErrorKind::kVersion,
          "unsupported model version " + std::to_string(version));
  Shape input(r.u8());
  for (auto& d : input) d = r.u32();
  const std::uint32_t count = r.u32();
  std::vector<Layer<T>> layers(count);
  for (auto& l : layers) {
    LayerSpec& s = l.spec;
    const std::uint8_t kind = r.u8();
    require(kind <= static_cast<std::uint8_t>(LayerKind::kResidual), ErrorKind::kFormat,
            "unknown layer kind " + std::to_string(kind));
    s.kind = static_cast<LayerKind>(kind);
    s.kernel = r.u8();
    s.stride = r.u8();
    s.padding = static_cast<Padding>(r.u8());
    s.in_channels = r.u32();
    s.out_channels = r.u32();
    s.has_bias = r.u8() != 0;
    s.negative_slope = r.f64();
    s.inception = r.u8() != 0;
    l.frozen = r.u8() != 0;
    const std::uint8_t prov = r.u8();
    require(prov <= 2, ErrorKind::kFormat, "unknown provenance tag " + std::to_string(prov));
    l.provenance = static_cast<Provenance>(prov);
  }
  for (auto& l : layers) {
    const std::size_t np = r.u8();
    for (std::size_t i = 0; i < np; ++i) l.params.push_back(detail::read_tensor<T>(r));
    const std::size_t nb = r.u8();
    for (std::size_t i = 0; i < nb; ++i) l.buffers.push_back(detail::read_tensor<T>(r));
  }
  require(r.remaining() == 0, ErrorKind::kFormat,
          std::to_string(r.remaining()) + " trailing bytes in model file");
  return Network<T>::from_layers(std::move(input), std::move(layers));
}

}  // namespace lbpc::nn

#endif  // LBPC_NN_MODEL_IO_HPP_
