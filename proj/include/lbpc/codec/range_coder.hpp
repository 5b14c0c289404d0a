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

// Static-model range coder: 64-bit low with carry propagation through a
// cached byte, 32-bit range, byte-wise renormalization.

#ifndef LBPC_CODEC_RANGE_CODER_HPP_
#define LBPC_CODEC_RANGE_CODER_HPP_

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lbpc/codec/entropy.hpp"
#include "lbpc/core/error.hpp"

namespace lbpc::codec {

inline constexpr std::uint32_t kRangeTop = 1u << 24;

class RangeEncoder {
 public:
  // Codes [start, start + size) out of 2^precision.
  void encode(std::uint32_t start, std::uint32_t size, std::uint32_t total, int precision) {
    const std::uint32_t r = range_ >> precision;
    low_ += static_cast<std::uint64_t>(r) * start;
    range_ = start + size == total ? range_ - r * start : r * size;
    while (range_ < kRangeTop) {
      range_ <<= 8;
      shift_low();
    }
  }

  void encode_symbol(std::int32_t symbol, const CdfTable& table) {
    const std::int64_t s = static_cast<std::int64_t>(symbol) - table.min_symbol;
    require(s >= 0 && s < static_cast<std::int64_t>(table.alphabet()), ErrorKind::kArgument,
            "symbol " + std::to_string(symbol) + " outside the coded support");
    const auto idx = static_cast<std::size_t>(s);
    encode(table.cum[idx], table.freq(idx), table.total(), kCdfPrecision);
  }

  // Emits the shortest tail that still pins the final interval: the value
  // chosen has its low 24 bits clear, so the decoder's zero padding
  // reproduces it.
  std::vector<std::uint8_t> finish() && {
    low_ = (low_ + kRangeTop - 1) & ~static_cast<std::uint64_t>(kRangeTop - 1);
    shift_low();
    shift_low();
    while (!out_.empty() && out_.back() == 0) out_.pop_back();
    return std::move(out_);
  }

 private:
  void shift_low() {
    if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      const auto carry = static_cast<std::uint8_t>(low_ >> 32);
      std::uint8_t temp = cache_;
      do {
        if (!first_) out_.push_back(static_cast<std::uint8_t>(temp + carry));
        first_ = false;
        temp = 0xFF;
      } while (--cache_size_ != 0);
      cache_ = static_cast<std::uint8_t>(static_cast<std::uint32_t>(low_) >> 24);
    }
    ++cache_size_;
    low_ = static_cast<std::uint32_t>(low_) << 8;
  }

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  bool first_ = true;  // the initial cache byte is always zero and is dropped
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> data) : data_(data) {
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  }

  std::int32_t decode_symbol(const CdfTable& table) {
    const std::uint32_t r = range_ >> kCdfPrecision;
    const std::uint32_t total = table.total();
    const std::uint32_t target = std::min(code_ / r, total - 1);
    const auto it = std::upper_bound(table.cum.begin(), table.cum.end(), target);
    const auto idx = static_cast<std::size_t>(it - table.cum.begin()) - 1;
    const std::uint32_t start = table.cum[idx];
    const std::uint32_t size = table.freq(idx);
    code_ -= r * start;
    range_ = start + size == total ? range_ - r * start : r * size;
    while (range_ < kRangeTop) {
      range_ <<= 8;
      code_ = (code_ << 8) | next_byte();
    }
    return table.min_symbol + static_cast<std::int32_t>(idx);
  }

  // Bytes consumed beyond the end of the input, which the encoder trimmed.
  std::size_t overrun() const { return pos_ > data_.size() ? pos_ - data_.size() : 0; }

 private:
  std::uint32_t next_byte() {
    const std::uint32_t b = pos_ < data_.size() ? data_[pos_] : 0;
    ++pos_;
    return b;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

// Symbol i is coded with tables[i % tables.size()], which for a
// channels-last latent is its channel's table.
inline std::vector<std::uint8_t> range_encode(std::span<const std::int32_t> symbols,
                                              std::span<const CdfTable> tables) {
  require(!tables.empty(), ErrorKind::kArgument, "range_encode needs at least one table");
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) enc.encode_symbol(symbols[i], tables[i % tables.size()]);
  return std::move(enc).finish();
}

inline std::vector<std::int32_t> range_decode(std::span<const std::uint8_t> bytes,
                                              std::span<const CdfTable> tables, std::size_t count) {
  require(!tables.empty(), ErrorKind::kArgument, "range_decode needs at least one table");
  RangeDecoder dec(bytes);
  std::vector<std::int32_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = dec.decode_symbol(tables[i % tables.size()]);
  return out;
}

}  // namespace lbpc::codec

#endif  // LBPC_CODEC_RANGE_CODER_HPP_
