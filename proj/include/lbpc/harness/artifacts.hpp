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

// On-disk layout of an experiment and the adapted-classifier file format.

#ifndef LBPC_HARNESS_ARTIFACTS_HPP_
#define LBPC_HARNESS_ARTIFACTS_HPP_

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>

#include "lbpc/core/binary_io.hpp"
#include "lbpc/core/error.hpp"
#include "lbpc/nn/model_io.hpp"
#include "lbpc/taxonomy/adapt.hpp"
#include "lbpc/taxonomy/json.hpp"

namespace lbpc::harness {

namespace fs = std::filesystem;

// out/{dataset,models,streams,reports}
struct Layout {
  fs::path root;

  fs::path dataset() const { return root / "dataset"; }
  fs::path models() const { return root / "models"; }
  fs::path streams() const { return root / "streams"; }
  fs::path reports() const { return root / "reports"; }

  fs::path codec(std::size_t li) const { return models() / ("codec_l" + std::to_string(li) + ".lbcm"); }
  fs::path codec_initial(std::size_t li) const {
    return models() / ("codec_l" + std::to_string(li) + "_init.lbcm");
  }
  fs::path classifier() const { return models() / "classifier.lbcl"; }
  fs::path adapted(const std::string& config, std::size_t li) const {
    return models() / "adapted" / (slug(config) + "_l" + std::to_string(li) + ".lbad");
  }
  fs::path stream_dir(std::size_t li) const { return streams() / ("l" + std::to_string(li)); }
  fs::path stream(std::size_t li, std::size_t sample_id) const {
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.lbpc", sample_id);
    return stream_dir(li) / name;
  }
  fs::path report(const std::string& name) const { return reports() / name; }

  // File-name form of a configuration name: "MediumComp+Bridge" becomes
  // "mediumcomp_bridge".
  static std::string slug(const std::string& name) {
    std::string out;
    for (char c : name) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      } else if (!out.empty() && out.back() != '_') {
        out += '_';
      }
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out.empty() ? "config" : out;
  }
};

inline constexpr char kAdaptedMagic[] = "LBAD";
inline constexpr std::uint16_t kAdaptedVersion = 1;

inline Bytes save_adapted(const taxonomy::AdaptedClassifier& a) {
  ByteWriter w;
  w.tag(std::string_view(kAdaptedMagic, 4));
  w.u16(kAdaptedVersion);
  const std::string cfg = taxonomy::config_to_json(a.config).dump();
  w.u32(static_cast<std::uint32_t>(cfg.size()));
  w.raw({reinterpret_cast<const std::uint8_t*>(cfg.data()), cfg.size()});
  w.u32(static_cast<std::uint32_t>(a.lambda_index));
  w.u32(static_cast<std::uint32_t>(a.bridge_layers));
  w.u32(static_cast<std::uint32_t>(a.bridge_units));
  w.u64(a.bridge_steps);
  w.u64(a.finetune_steps);
  w.f64(a.bridge_val_top1);
  w.f64(a.finetune_val_top1);
  const Bytes blob = nn::save_network(a.network);
  w.u32(static_cast<std::uint32_t>(blob.size()));
  w.raw(blob);
  w.append_crc();
  return std::move(w).take();
}

inline taxonomy::AdaptedClassifier load_adapted(std::span<const std::uint8_t> bytes) {
  ByteReader r(checked_body(bytes, "adapted classifier"));
  r.expect_tag(std::string_view(kAdaptedMagic, 4));
  const std::uint16_t version = r.u16();
  require(version == kAdaptedVersion, ErrorKind::kVersion,
          "unsupported adapted classifier version " + std::to_string(version));
  taxonomy::AdaptedClassifier a;
  const std::uint32_t cfg_len = r.u32();
  const auto cfg = r.raw(cfg_len);
  try {
    a.config = taxonomy::config_from_json(taxonomy::Json::parse(cfg.begin(), cfg.end()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("adapted classifier configuration: ") + e.what());
  }
  a.lambda_index = r.u32();
  a.bridge_layers = r.u32();
  a.bridge_units = r.u32();
  a.bridge_steps = r.u64();
  a.finetune_steps = r.u64();
  a.bridge_val_top1 = r.f64();
  a.finetune_val_top1 = r.f64();
  const std::uint32_t len = r.u32();
  a.network = nn::load_network<float>(r.raw(len));
  require(r.remaining() == 0, ErrorKind::kFormat, "trailing bytes in adapted classifier");
  require(a.bridge_layers <= a.network.size(), ErrorKind::kFormat, "adapted classifier bridge exceeds its network");
  a.compat = taxonomy::compatibility_report(a.network, a.bridge_units);
  return a;
}

}  // namespace lbpc::harness

#endif  // LBPC_HARNESS_ARTIFACTS_HPP_
