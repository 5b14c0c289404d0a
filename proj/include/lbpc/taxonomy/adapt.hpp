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

// Training of compressed-domain classifiers: a bridge followed by a partial
// copy of the spatial-domain classifier, one model per codec rate point.

#ifndef LBPC_TAXONOMY_ADAPT_HPP_
#define LBPC_TAXONOMY_ADAPT_HPP_

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lbpc/classifier/model.hpp"
#include "lbpc/classifier/train.hpp"
#include "lbpc/core/error.hpp"
#include "lbpc/core/random.hpp"
#include "lbpc/nn/network.hpp"
#include "lbpc/taxonomy/compat.hpp"
#include "lbpc/taxonomy/config.hpp"

namespace lbpc::taxonomy {

struct AdaptedClassifier {
  TaxonomyConfig config;
  std::size_t lambda_index = 0;
  std::size_t bridge_layers = 0;  // leading primitive layers forming the bridge
  std::size_t bridge_units = 0;
  nn::Network<float> network;     // bridge followed by the partial classifier
  CompatReport compat;
  std::size_t bridge_steps = 0;   // optimizer steps spent on the bridge
  std::size_t finetune_steps = 0;
  double bridge_val_top1 = 0.0;
  double finetune_val_top1 = 0.0;

  std::size_t training_steps() const { return bridge_steps + finetune_steps; }
  std::vector<bool> freeze_mask() const {
    std::vector<bool> mask;
    for (const auto& u : network.units()) mask.push_back(network.layer(u.first).frozen);
    return mask;
  }
  std::optional<nn::Network<float>> bridge() const {
    if (bridge_layers == 0) return std::nullopt;
    return nn::Network<float>::from_layers(
        network.input_shape(), {network.layers().begin(), network.layers().begin() + static_cast<std::ptrdiff_t>(bridge_layers)});
  }
  nn::Network<float> partial() const {
    const auto& first = network.layer(bridge_layers);
    return nn::Network<float>::from_layers(
        first.in_shape, {network.layers().begin() + static_cast<std::ptrdiff_t>(bridge_layers), network.layers().end()});
  }
};

// Latent inputs of one codec rate point.
struct LatentSplits {
  classifier::Examples train;
  classifier::Examples val;
};

// Trained bridges per rate point. Bridge training freezes the whole partial
// classifier, so every bridging configuration sharing the reference, data
// and hyperparameters trains the same bridge; the cache lets them share it.
struct BridgeCache {
  struct Entry {
    std::vector<nn::Layer<float>> layers;
    std::size_t steps = 0;
    double val_top1 = 0.0;
  };
  std::vector<nn::LayerSpec> specs;
  std::map<std::size_t, Entry> by_lambda;
};

namespace detail {

inline std::size_t count_units(std::span<const nn::LayerSpec> specs) {
  std::size_t n = 0;
  for (const auto& s : specs) n += s.starts_unit();
  return n;
}

inline std::size_t steps_of(const classifier::TrainResult& r, std::size_t examples, int batch_size) {
  const auto bs = static_cast<std::size_t>(batch_size);
  return r.history.size() * ((examples + bs - 1) / bs);
}

inline bool same_bits(const nn::Tensor<float>& a, const nn::Tensor<float>& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

inline bool same_layer_values(const nn::Layer<float>& a, const nn::Layer<float>& b) {
  if (a.params.size() != b.params.size() || a.buffers.size() != b.buffers.size()) return false;
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    if (!same_bits(a.params[i], b.params[i])) return false;
  }
  for (std::size_t i = 0; i < a.buffers.size(); ++i) {
    if (!same_bits(a.buffers[i], b.buffers[i])) return false;
  }
  return true;
}

}  // namespace detail

// Per rate point, in ladder order:
//   1. the partial classifier is copied from the reference;
//   2. when bridging, the bridge is trained with the partial frozen;
//   3. the bridge is frozen and the retrain-scope units are fine-tuned.
// Rate points after the first start the bridge and the retrained units from
// the previous point's trained values. Units outside the retrain scope are
// verified to be bit-identical to the reference afterwards.
inline std::vector<AdaptedClassifier> adapt_train(const classifier::ClassifierModel& reference,
                                                  const TaxonomyConfig& cfg, std::span<const LatentSplits> data,
                                                  const classifier::TrainHyper& hyper,
                                                  BridgeCache* cache = nullptr) {
  require(!data.empty(), ErrorKind::kArgument, "adaptation needs latents for at least one rate point");
  const nn::Network<float> partial = prune(reference.network, static_cast<std::size_t>(reference.config.pruning_unit));
  const auto partial_units = partial.units();
  validate_config(cfg, partial_units.size());
  const nn::Shape latent = data.front().train.item_shape;
  for (const auto& d : data) {
    require(d.train.item_shape == latent && d.val.item_shape == latent, ErrorKind::kShape,
            "latent shapes differ across rate points");
  }
  if (!cfg.bridging()) {
    const VolumeMatch m = validate_volume_match(latent, partial.input_shape());
    require(m.ok, ErrorKind::kConfig, "configuration '" + cfg.name + "': " + m.diagnostic);
  }
  const std::vector<nn::LayerSpec> bspecs = resolve_bridge(cfg, latent, partial.input_shape());
  if (cache != nullptr && !bspecs.empty()) {
    if (cache->specs.empty()) cache->specs = bspecs;
    require(cache->specs == bspecs, ErrorKind::kState, "bridge cache holds bridges of a different architecture");
  }
  const std::size_t nb = bspecs.size();
  const std::size_t bridge_units = detail::count_units(bspecs);

  auto assemble = [&](std::vector<nn::Layer<float>> bridge, std::vector<nn::Layer<float>> rest) {
    bridge.insert(bridge.end(), std::make_move_iterator(rest.begin()), std::make_move_iterator(rest.end()));
    return nn::Network<float>::from_layers(latent, std::move(bridge));
  };
  auto partial_layers = [&] { return std::vector<nn::Layer<float>>(partial.layers().begin(), partial.layers().end()); };

  std::vector<AdaptedClassifier> out;
  std::optional<BridgeCache::Entry> previous_bridge;
  for (std::size_t li = 0; li < data.size(); ++li) {
    AdaptedClassifier a;
    a.config = cfg;
    a.lambda_index = li;
    a.bridge_layers = nb;
    a.bridge_units = bridge_units;
    std::vector<nn::Layer<float>> bridge;
    if (nb > 0) {
      BridgeCache::Entry entry;
      if (cache != nullptr && cache->by_lambda.contains(li)) {
        entry = cache->by_lambda.at(li);
      } else {
        std::vector<nn::Layer<float>> init;
        if (previous_bridge) {
          init = previous_bridge->layers;
        } else {
          nn::Network<float> fresh(latent, bspecs, derive_seed(hyper.seed, 0xB1D6E));
          init.assign(fresh.layers().begin(), fresh.layers().end());
        }
        for (auto& l : init) {
          l.frozen = false;
          l.provenance = nn::Provenance::kFreshInit;
        }
        auto frozen_partial = partial_layers();
        for (auto& l : frozen_partial) l.frozen = true;
        classifier::TrainHyper h = hyper;
        h.seed = derive_seed(hyper.seed, 2 * li);
        auto r = classifier::train_network(assemble(std::move(init), std::move(frozen_partial)), data[li].train,
                                           data[li].val, h);
        entry.layers.assign(r.best.layers().begin(), r.best.layers().begin() + static_cast<std::ptrdiff_t>(nb));
        entry.steps = detail::steps_of(r, data[li].train.size(), h.batch_size);
        entry.val_top1 = r.best_val_top1;
        if (cache != nullptr) cache->by_lambda[li] = entry;
      }
      a.bridge_steps = entry.steps;
      a.bridge_val_top1 = entry.val_top1;
      bridge = entry.layers;
      previous_bridge = std::move(entry);
      for (auto& l : bridge) l.frozen = true;
    }

    std::vector<nn::Layer<float>> rest = partial_layers();
    if (!out.empty()) {
      const auto& prev = out.back().network;
      for (std::size_t u : cfg.retrain_scope) {
        for (std::size_t i = partial_units[u].first; i <= partial_units[u].last; ++i) rest[i] = prev.layer(nb + i);
      }
    }
    for (std::size_t u = 0; u < partial_units.size(); ++u) {
      const bool train = cfg.retrain_scope.contains(u);
      for (std::size_t i = partial_units[u].first; i <= partial_units[u].last; ++i) rest[i].frozen = !train;
    }
    a.network = assemble(std::move(bridge), std::move(rest));
    if (!cfg.retrain_scope.empty()) {
      classifier::TrainHyper h = hyper;
      h.seed = derive_seed(hyper.seed, 2 * li + 1);
      auto r = classifier::train_network(a.network, data[li].train, data[li].val, h);
      a.network = std::move(r.best);
      a.finetune_steps = detail::steps_of(r, data[li].train.size(), h.batch_size);
      a.finetune_val_top1 = r.best_val_top1;
    }
    for (std::size_t u = 0; u < partial_units.size(); ++u) {
      const bool retrained = cfg.retrain_scope.contains(u);
      for (std::size_t i = partial_units[u].first; i <= partial_units[u].last; ++i) {
        auto& l = a.network.layer(nb + i);
        if (retrained) {
          l.provenance = nn::Provenance::kRetrained;
        } else {
          require(l.provenance == nn::Provenance::kFromReference && detail::same_layer_values(l, partial.layer(i)),
                  ErrorKind::kState,
                  "configuration '" + cfg.name + "': frozen partial unit " + std::to_string(u) +
                      " drifted from the reference");
        }
      }
    }
    a.compat = compatibility_report(a.network, bridge_units);
    require(a.network.parameter_count() < reference.network.parameter_count(), ErrorKind::kConfig,
            "configuration '" + cfg.name + "' has " + std::to_string(a.network.parameter_count()) +
                " parameters, not fewer than the reference's " + std::to_string(reference.network.parameter_count()));
    out.push_back(std::move(a));
  }
  return out;
}

// Configuration retraining the first partial units and freezing the last
// `frozen` of them.
inline TaxonomyConfig freeze_config(std::size_t partial_units, std::size_t frozen, bool bridge) {
  require(frozen <= partial_units, ErrorKind::kArgument, "cannot freeze more units than the partial classifier has");
  TaxonomyConfig cfg;
  cfg.name = "freeze " + std::to_string(frozen) + "/" + std::to_string(partial_units) + (bridge ? "+Bridge" : "");
  if (bridge) {
    cfg.adaptation = Adaptation::kPruningAndBridging;
    cfg.bridge = BridgeSpec{};
  }
  for (std::size_t u = 0; u < partial_units - frozen; ++u) cfg.retrain_scope.insert(u);
  return cfg;
}

struct SweepRow {
  TaxonomyConfig config;
  std::size_t frozen_units = 0;
  std::size_t partial_units = 0;
  CompatReport compat;
  std::vector<double> top1;  // percent, per rate point
  std::vector<double> top5;
};

// Every freeze boundary from all units frozen down to none, without and
// then with a bridge. Accuracies are measured on `test`, one set per rate
// point.
inline std::vector<SweepRow> sensitivity_sweep(const classifier::ClassifierModel& reference,
                                               std::span<const LatentSplits> data,
                                               std::span<const classifier::Examples> test,
                                               const classifier::TrainHyper& hyper, BridgeCache* cache = nullptr,
                                               const std::function<void(const SweepRow&)>& on_row = {}) {
  require(test.size() == data.size(), ErrorKind::kArgument, "need one test set per rate point");
  const std::size_t units =
      prune(reference.network, static_cast<std::size_t>(reference.config.pruning_unit)).units().size();
  BridgeCache local;
  if (cache == nullptr) cache = &local;
  std::vector<SweepRow> rows;
  for (bool bridge : {false, true}) {
    for (std::size_t f = units + 1; f-- > 0;) {
      SweepRow row;
      row.config = freeze_config(units, f, bridge);
      row.frozen_units = f;
      row.partial_units = units;
      const auto adapted = adapt_train(reference, row.config, data, hyper, cache);
      row.compat = adapted.front().compat;
      for (std::size_t li = 0; li < adapted.size(); ++li) {
        const auto logits = classifier::predict_logits(adapted[li].network, test[li], hyper.threads);
        const std::size_t k5 = std::min<std::size_t>(5, logits.front().size());
        std::size_t h1 = 0, h5 = 0;
        for (std::size_t i = 0; i < logits.size(); ++i) {
          const auto top = classifier::predict_topk(logits[i], k5);
          h1 += top[0] == test[li].labels[i];
          h5 += std::find(top.begin(), top.end(), test[li].labels[i]) != top.end();
        }
        row.top1.push_back(100.0 * static_cast<double>(h1) / static_cast<double>(logits.size()));
        row.top5.push_back(100.0 * static_cast<double>(h5) / static_cast<double>(logits.size()));
      }
      if (on_row) on_row(row);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace lbpc::taxonomy

#endif  // LBPC_TAXONOMY_ADAPT_HPP_
