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

// Experiment configuration: JSON form, validation and provenance.

#ifndef LBPC_HARNESS_CONFIG_HPP_
#define LBPC_HARNESS_CONFIG_HPP_

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbpc/classifier/model.hpp"
#include "lbpc/classifier/train.hpp"
#include "lbpc/codec/model.hpp"
#include "lbpc/codec/train.hpp"
#include "lbpc/core/binary_io.hpp"
#include "lbpc/core/error.hpp"
#include "lbpc/core/random.hpp"
#include "lbpc/pcloud/dataset.hpp"
#include "lbpc/taxonomy/config.hpp"
#include "lbpc/taxonomy/json.hpp"

#ifndef LBPC_BUILD_TAG
#define LBPC_BUILD_TAG "unknown"
#endif

namespace lbpc::harness {

using Json = nlohmann::ordered_json;

struct HyperConfig {
  int batch_size = 32;
  double lr = 1e-3;
  int max_epochs = 10;
  int lr_patience = 10;
  int early_stop = 50;
};

inline std::vector<taxonomy::TaxonomyConfig> default_taxonomy(std::size_t conv_units) {
  std::vector<taxonomy::TaxonomyConfig> out;
  for (auto name : taxonomy::kPresetNames) out.push_back(taxonomy::preset(name, conv_units));
  return out;
}

// Convolution units the compressed-domain classifier keeps.
inline std::size_t partial_conv_units(const classifier::ClassifierConfig& c) {
  const auto p = static_cast<std::size_t>(std::max(c.pruning_unit, 0));
  return c.conv.size() > p ? c.conv.size() - p : 0;
}

struct ExperimentConfig {
  std::uint64_t seed = 7;
  std::filesystem::path output = "out";
  int threads = 1;

  pcloud::DatasetSpec dataset;

  codec::CodecConfig codec;
  codec::CodecTrainConfig codec_training;
  int codec_train_clouds = 48;  // training clouds whose blocks train the codec

  classifier::ClassifierConfig classifier;
  HyperConfig classifier_training;
  std::optional<HyperConfig> adaptation_training;  // defaults to the classifier's

  std::vector<taxonomy::TaxonomyConfig> taxonomy = default_taxonomy(4);
  bool sweep = false;
  std::optional<int> sweep_epochs;

  const HyperConfig& adaptation() const { return adaptation_training ? *adaptation_training : classifier_training; }
};

// Stage seeds, all derived from the global seed.
enum class SeedStream : std::uint64_t { kDataset = 1, kCodec = 2, kClassifier = 3, kAdaptation = 4, kSweep = 5 };

inline std::uint64_t stage_seed(const ExperimentConfig& c, SeedStream s) {
  return derive_seed(c.seed, static_cast<std::uint64_t>(s));
}

inline classifier::TrainHyper train_hyper(const HyperConfig& h, std::uint64_t seed, int threads) {
  classifier::TrainHyper t;
  t.batch_size = h.batch_size;
  t.lr = h.lr;
  t.max_epochs = h.max_epochs;
  t.lr_patience = h.lr_patience;
  t.early_stop = h.early_stop;
  t.seed = seed;
  t.threads = threads;
  return t;
}

namespace detail {

inline Json hyper_to_json(const HyperConfig& h) {
  return {{"batch_size", h.batch_size},
          {"lr", h.lr},
          {"max_epochs", h.max_epochs},
          {"lr_patience", h.lr_patience},
          {"early_stop", h.early_stop}};
}

inline HyperConfig hyper_from_json(const Json& j, HyperConfig h) {
  h.batch_size = j.value("batch_size", h.batch_size);
  h.lr = j.value("lr", h.lr);
  h.max_epochs = j.value("max_epochs", h.max_epochs);
  h.lr_patience = j.value("lr_patience", h.lr_patience);
  h.early_stop = j.value("early_stop", h.early_stop);
  return h;
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    require(ok, ErrorKind::kConfig, "unknown key '" + key + "' in " + where);
  }
}

}  // namespace detail

inline Json config_to_json(const ExperimentConfig& c) {
  Json conv = Json::array();
  for (const auto& u : c.classifier.conv) conv.push_back({u.out_channels, u.stride});
  Json tax = Json::array();
  for (const auto& t : c.taxonomy) tax.push_back(Json::parse(taxonomy::config_to_json(t).dump()));
  Json j;
  j["seed"] = c.seed;
  j["output"] = c.output.string();
  j["threads"] = c.threads;
  j["dataset"] = {{"num_classes", c.dataset.num_classes},
                  {"per_class", c.dataset.per_class},
                  {"points_per_cloud", c.dataset.points_per_cloud}};
  j["codec"] = {{"bit_depth", c.codec.bit_depth},
                {"block_size", c.codec.block_size},
                {"sampling_factor", c.codec.sampling_factor},
                {"widths", c.codec.widths},
                {"latent_channels", c.codec.latent_channels},
                {"residual_blocks", c.codec.residual_blocks},
                {"inception", c.codec.inception},
                {"threshold", c.codec.threshold},
                {"ladder", c.codec_training.ladder},
                {"epochs", c.codec_training.epochs},
                {"finetune_epochs", c.codec_training.finetune_epochs},
                {"batch_size", c.codec_training.batch_size},
                {"lr", c.codec_training.lr},
                {"finetune_lr", c.codec_training.finetune_lr},
                {"entropy_lr", c.codec_training.entropy_lr},
                {"train_clouds", c.codec_train_clouds}};
  j["classifier"] = {{"grid", c.classifier.grid},
                     {"points_per_cell", c.classifier.points_per_cell},
                     {"point_count", c.classifier.point_count},
                     {"conv", conv},
                     {"hidden", c.classifier.hidden},
                     {"pruning_unit", c.classifier.pruning_unit},
                     {"training", detail::hyper_to_json(c.classifier_training)}};
  j["adaptation"] = c.adaptation_training ? detail::hyper_to_json(*c.adaptation_training) : Json(nullptr);
  j["taxonomy"] = {{"configs", tax},
                   {"sweep", c.sweep},
                   {"sweep_epochs", c.sweep_epochs ? Json(*c.sweep_epochs) : Json(nullptr)}};
  return j;
}

inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  try {
    detail::reject_unknown(j, {"seed", "output", "threads", "dataset", "codec", "classifier", "adaptation", "taxonomy"},
                           "experiment config");
    c.seed = j.value("seed", c.seed);
    c.output = j.value("output", c.output.string());
    c.threads = j.value("threads", c.threads);
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      detail::reject_unknown(d, {"num_classes", "per_class", "points_per_cloud"}, "dataset");
      c.dataset.num_classes = d.value("num_classes", c.dataset.num_classes);
      c.dataset.per_class = d.value("per_class", c.dataset.per_class);
      c.dataset.points_per_cloud = d.value("points_per_cloud", c.dataset.points_per_cloud);
    }
    if (j.contains("codec")) {
      const auto& d = j["codec"];
      detail::reject_unknown(d,
                             {"bit_depth", "block_size", "sampling_factor", "widths", "latent_channels",
                              "residual_blocks", "inception", "threshold", "ladder", "epochs", "finetune_epochs",
                              "batch_size", "lr", "finetune_lr", "entropy_lr", "train_clouds"},
                             "codec");
      c.codec.bit_depth = d.value("bit_depth", c.codec.bit_depth);
      c.codec.block_size = d.value("block_size", c.codec.block_size);
      c.codec.sampling_factor = d.value("sampling_factor", c.codec.sampling_factor);
      c.codec.widths = d.value("widths", c.codec.widths);
      c.codec.latent_channels = d.value("latent_channels", c.codec.latent_channels);
      c.codec.residual_blocks = d.value("residual_blocks", c.codec.residual_blocks);
      c.codec.inception = d.value("inception", c.codec.inception);
      c.codec.threshold = d.value("threshold", c.codec.threshold);
      auto& t = c.codec_training;
      t.ladder = d.value("ladder", t.ladder);
      t.epochs = d.value("epochs", t.epochs);
      t.finetune_epochs = d.value("finetune_epochs", t.finetune_epochs);
      t.batch_size = d.value("batch_size", t.batch_size);
      t.lr = d.value("lr", t.lr);
      t.finetune_lr = d.value("finetune_lr", t.finetune_lr);
      t.entropy_lr = d.value("entropy_lr", t.entropy_lr);
      c.codec_train_clouds = d.value("train_clouds", c.codec_train_clouds);
    }
    if (j.contains("classifier")) {
      const auto& d = j["classifier"];
      detail::reject_unknown(d, {"grid", "points_per_cell", "point_count", "conv", "hidden", "pruning_unit", "training"},
                             "classifier");
      c.classifier.grid = d.value("grid", c.classifier.grid);
      c.classifier.points_per_cell = d.value("points_per_cell", c.classifier.points_per_cell);
      c.classifier.point_count = d.value("point_count", c.classifier.point_count);
      if (d.contains("conv")) {
        c.classifier.conv.clear();
        for (const auto& u : d["conv"]) {
          require(u.is_array() && u.size() == 2, ErrorKind::kConfig, "classifier conv entries are [channels, stride]");
          c.classifier.conv.push_back({u[0].get<std::size_t>(), u[1].get<int>()});
        }
      }
      c.classifier.hidden = d.value("hidden", c.classifier.hidden);
      c.classifier.pruning_unit = d.value("pruning_unit", c.classifier.pruning_unit);
      if (d.contains("training")) c.classifier_training = detail::hyper_from_json(d["training"], c.classifier_training);
    }
    if (j.contains("adaptation") && !j["adaptation"].is_null()) {
      c.adaptation_training = detail::hyper_from_json(j["adaptation"], c.classifier_training);
    }
    const std::size_t conv_units = partial_conv_units(c.classifier);
    c.taxonomy = default_taxonomy(conv_units);
    if (j.contains("taxonomy")) {
      const auto& d = j["taxonomy"];
      detail::reject_unknown(d, {"configs", "sweep", "sweep_epochs"}, "taxonomy");
      if (d.contains("configs")) {
        c.taxonomy.clear();
        for (const auto& t : d["configs"]) c.taxonomy.push_back(taxonomy::config_from_json(taxonomy::Json::parse(t.dump()), conv_units));
      }
      c.sweep = d.value("sweep", c.sweep);
      if (d.contains("sweep_epochs") && !d["sweep_epochs"].is_null()) c.sweep_epochs = d["sweep_epochs"].get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("experiment config: ") + e.what());
  }
  c.classifier.num_classes = static_cast<std::size_t>(c.dataset.num_classes);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  try {
    return config_from_json(Json::parse(read_text(path)));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
}

// FNV-1a over the canonical JSON text, excluding where outputs go and how
// many threads run (neither changes results).
inline std::string config_hash(const ExperimentConfig& c) {
  Json j = config_to_json(c);
  j.erase("output");
  j.erase("threads");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string build_tag = LBPC_BUILD_TAG;
};

inline Provenance provenance_of(const ExperimentConfig& c) { return {config_hash(c), c.seed, LBPC_BUILD_TAG}; }

// LB_SEED, when set, replaces the configured seed.
inline void apply_seed_env(ExperimentConfig& c) {
  if (const char* s = std::getenv("LB_SEED"); s != nullptr && *s != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    require(end != nullptr && *end == '\0', ErrorKind::kConfig, std::string("LB_SEED is not an unsigned integer: ") + s);
    c.seed = v;
  }
}

// Checks everything that can be checked before training starts.
inline void validate_experiment(const ExperimentConfig& c) {
  require(c.threads >= 1, ErrorKind::kConfig, "threads must be at least 1");
  require(c.dataset.num_classes >= 2 && c.dataset.num_classes <= pcloud::kShapeFamilies, ErrorKind::kConfig,
          "dataset num_classes must be in [2, " + std::to_string(pcloud::kShapeFamilies) + "]");
  require(c.dataset.per_class >= 7, ErrorKind::kConfig, "dataset per_class must be at least 7 to fill every split");
  require(c.dataset.points_per_cloud >= 1, ErrorKind::kConfig, "points_per_cloud must be positive");
  c.codec.validate();
  codec::ladder_training_order(c.codec_training.ladder);
  require(c.codec_train_clouds >= 1, ErrorKind::kConfig, "codec train_clouds must be positive");
  for (const HyperConfig* h : {&c.classifier_training, &c.adaptation()}) {
    require(h->batch_size >= 1 && h->lr > 0.0 && h->max_epochs >= 1 && h->lr_patience >= 1 && h->early_stop >= 1,
            ErrorKind::kConfig, "training batch size, lr, epochs and patience values must be positive");
  }
  const auto specs = classifier::classifier_specs(c.classifier);
  const nn::Network<float> shapes(c.classifier.input_shape(), specs, 0);
  const auto target = classifier::unit_input_shape(shapes, c.classifier.pruning_unit);
  require(target.has_value(), ErrorKind::kConfig,
          "pruning unit " + std::to_string(c.classifier.pruning_unit) + " is not a convolution after the first");
  const nn::Shape latent = c.codec.volume_shape();
  const std::size_t partial_units = shapes.units().size() - static_cast<std::size_t>(c.classifier.pruning_unit);
  require(!c.taxonomy.empty(), ErrorKind::kConfig, "no taxonomy configurations selected");
  for (const auto& t : c.taxonomy) {
    taxonomy::validate_config(t, partial_units);
    if (t.bridging()) {
      taxonomy::resolve_bridge(t, latent, *target);
    } else {
      const auto m = taxonomy::validate_volume_match(latent, *target);
      require(m.ok, ErrorKind::kConfig, "configuration '" + t.name + "': " + m.diagnostic);
    }
  }
}

}  // namespace lbpc::harness

#endif  // LBPC_HARNESS_CONFIG_HPP_
