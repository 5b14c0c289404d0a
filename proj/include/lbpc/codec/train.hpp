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

#ifndef LBPC_CODEC_TRAIN_HPP_
#define LBPC_CODEC_TRAIN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lbpc/codec/entropy.hpp"
#include "lbpc/codec/model.hpp"
#include "lbpc/core/error.hpp"
#include "lbpc/core/random.hpp"
#include "lbpc/nn/adam.hpp"
#include "lbpc/nn/losses.hpp"
#include "lbpc/nn/network.hpp"
#include "lbpc/pcloud/point_cloud.hpp"

namespace lbpc::codec {

// Train: additive U(-0.5, 0.5) noise. Infer: round half away from zero.
template <typename T>
nn::Tensor<T> quantize(const nn::Tensor<T>& latent, nn::Mode mode, Rng* rng = nullptr) {
  nn::Tensor<T> out = latent;
  if (mode == nn::Mode::kInfer) {
    for (auto& v : out.data()) v = std::round(v);
    return out;
  }
  require(rng != nullptr, ErrorKind::kArgument, "training-mode quantization needs a random source");
  for (auto& v : out.data()) v = static_cast<T>(v + rng->uniform(-0.5, 0.5));
  return out;
}

// Occupancy tensor [n, n, n, 1]; axes follow the block's x, y, z.
template <typename T = float>
nn::Tensor<T> block_tensor(const pcloud::Block& block) {
  const auto n = static_cast<std::size_t>(block.size);
  nn::Tensor<T> t({n, n, n, 1});
  for (std::size_t i = 0; i < block.occupancy.size(); ++i) t[i] = block.occupancy[i] ? T{1} : T{0};
  return t;
}

template <typename T = float>
nn::Tensor<T> block_batch(std::span<const pcloud::Block* const> blocks) {
  require(!blocks.empty(), ErrorKind::kArgument, "empty block batch");
  const auto n = static_cast<std::size_t>(blocks.front()->size);
  nn::Tensor<T> t({blocks.size(), n, n, n, 1});
  const std::size_t vol = n * n * n;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    require(blocks[b]->size == blocks.front()->size, ErrorKind::kShape, "mixed block sizes in batch");
    for (std::size_t i = 0; i < vol; ++i) t[b * vol + i] = blocks[b]->occupancy[i] ? T{1} : T{0};
  }
  return t;
}

template <typename T>
struct RdLossResult {
  double loss = 0.0;
  double focal = 0.0;
  double rate_bits = 0.0;     // summed over blocks
  std::size_t occupied = 0;   // summed over blocks
  std::size_t blocks = 0;     // blocks that contributed
  nn::Gradients<T> analysis;
  nn::Gradients<T> synthesis;
  std::vector<double> d_mu;
  std::vector<double> d_log_b;
};

// Mean over non-empty blocks of focal(synthesis(q(analysis(x))), x)
// + lambda * bits / occupied voxels.
template <typename T>
RdLossResult<T> rd_loss(CodecModelT<T>& model, const nn::Tensor<T>& batch, double lambda, Rng& rng,
                        bool with_grad = true) {
  require(batch.rank() == 5, ErrorKind::kShape, "rd_loss expects a [N, n, n, n, 1] batch");
  RdLossResult<T> out;
  const std::size_t vol = batch.size() / batch.dim(0);
  std::vector<std::size_t> keep;
  std::vector<std::size_t> occ;
  for (std::size_t b = 0; b < batch.dim(0); ++b) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < vol; ++i) count += batch[b * vol + i] > T{0.5};
    if (count > 0) {
      keep.push_back(b);
      occ.push_back(count);
    }
  }
  const std::size_t c = model.config.latent_channels;
  if (with_grad) {
    out.d_mu.assign(c, 0.0);
    out.d_log_b.assign(c, 0.0);
  }
  if (keep.empty()) return out;

  nn::Shape item_shape = batch.item_shape();
  nn::Shape shape{keep.size()};
  shape.insert(shape.end(), item_shape.begin(), item_shape.end());
  nn::Tensor<T> x(shape);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    std::copy_n(batch.data().begin() + static_cast<std::ptrdiff_t>(keep[k] * vol), vol,
                x.data().begin() + static_cast<std::ptrdiff_t>(k * vol));
  }
  const std::size_t nb = keep.size();
  out.blocks = nb;

  nn::ForwardCache<T> cache_a, cache_s;
  nn::Tensor<T> y = model.analysis.forward(x, nn::Mode::kTrain, with_grad ? &cache_a : nullptr);
  nn::Tensor<T> y_hat = quantize(y, nn::Mode::kTrain, &rng);
  nn::Tensor<T> x_hat = model.synthesis.forward(y_hat, nn::Mode::kTrain, with_grad ? &cache_s : nullptr);
  nn::LossResult<T> focal = nn::focal_loss(x_hat, x, model.config.focal);
  out.focal = focal.value;

  const std::size_t lat = y_hat.size() / nb;
  nn::Tensor<T> d_latent(y_hat.shape());
  double rate_term = 0.0;
  for (std::size_t k = 0; k < nb; ++k) {
    nn::Tensor<T> item(model.config.latent_shape(),
                       std::vector<T>(y_hat.data().begin() + static_cast<std::ptrdiff_t>(k * lat),
                                      y_hat.data().begin() + static_cast<std::ptrdiff_t>((k + 1) * lat)));
    RateResult<T> r = rate_estimate(item, model.entropy, with_grad);
    out.rate_bits += r.bits;
    out.occupied += occ[k];
    const double w = lambda / (static_cast<double>(occ[k]) * static_cast<double>(nb));
    rate_term += w * r.bits;
    if (with_grad) {
      for (std::size_t i = 0; i < lat; ++i) d_latent[k * lat + i] = static_cast<T>(w * r.d_latent[i]);
      for (std::size_t ch = 0; ch < c; ++ch) {
        out.d_mu[ch] += w * r.d_mu[ch];
        out.d_log_b[ch] += w * r.d_log_b[ch];
      }
    }
  }
  out.loss = out.focal + rate_term;
  if (!with_grad) return out;

  out.synthesis = model.synthesis.backward(cache_s, focal.grad, /*need_input_grad=*/true);
  nn::Tensor<T> d_y = out.synthesis.input;
  for (std::size_t i = 0; i < d_y.size(); ++i) d_y[i] += d_latent[i];
  out.analysis = model.analysis.backward(cache_a, d_y);
  return out;
}

struct CodecTrainConfig {
  std::vector<double> ladder = {0.008, 0.002, 0.0005};
  int epochs = 10;           // first (highest-rate) model
  int finetune_epochs = 5;   // each later model, started from its predecessor
  int batch_size = 2;
  double lr = 3e-3;
  double finetune_lr = 1e-3;
  double entropy_lr = 1e-2;  // prior parameters
  std::uint64_t seed = 0;
};

struct CodecEpochLog {
  int lambda_index = 0;
  double lambda = 0.0;
  int epoch = 0;
  double loss = 0.0;
  double focal = 0.0;
  double bits_per_occupied = 0.0;
};

struct CodecLadder {
  std::vector<CodecModel> models;   // indexed like the configured ladder
  std::vector<CodecModel> initial;  // state each model started training from
  std::vector<int> training_order;  // ladder indices, lowest lambda first
  std::vector<CodecEpochLog> log;
};

// Ladder indices ordered by increasing lambda (decreasing rate).
inline std::vector<int> ladder_training_order(std::span<const double> ladder) {
  require(!ladder.empty(), ErrorKind::kConfig, "lambda ladder is empty");
  for (double l : ladder) require(std::isfinite(l) && l >= 0.0, ErrorKind::kConfig, "lambda values must be >= 0");
  const bool desc = std::is_sorted(ladder.begin(), ladder.end(), std::greater<>());
  const bool asc = std::is_sorted(ladder.begin(), ladder.end());
  require(desc || asc, ErrorKind::kConfig, "lambda ladder must be sorted");
  for (std::size_t i = 1; i < ladder.size(); ++i) {
    require(ladder[i] != ladder[i - 1], ErrorKind::kConfig, "lambda ladder has duplicate values");
  }
  std::vector<int> order(ladder.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return ladder[a] < ladder[b]; });
  return order;
}

// Floor on log b during training. Narrower priors make the rate gradient
// spike at bin edges under training noise.
inline constexpr double kMinTrainLogScale = -2.0;

struct CodecOptimizer {
  nn::AdamState<float> analysis;
  nn::AdamState<float> synthesis;
  nn::Moments<double> entropy;
};

// One epoch over shuffled non-empty blocks. Returns the epoch log entry.
inline CodecEpochLog codec_epoch(CodecModel& model, std::span<const pcloud::Block> blocks, double lambda,
                                 const CodecTrainConfig& cfg, double lr, CodecOptimizer& opt,
                                 std::uint64_t seed) {
  std::vector<const pcloud::Block*> order;
  for (const auto& b : blocks)
    if (b.occupied_count() > 0) order.push_back(&b);
  Rng shuffle(derive_seed(seed, 0));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
  Rng noise(derive_seed(seed, 1));
  const nn::AdamConfig adam{lr};
  CodecEpochLog entry;
  double loss_sum = 0.0, focal_sum = 0.0, bits = 0.0;
  std::size_t occupied = 0, steps = 0;
  const auto bs = static_cast<std::size_t>(std::max(1, cfg.batch_size));
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t end = std::min(order.size(), start + bs);
    nn::Tensor<float> batch = block_batch<float>(std::span(order).subspan(start, end - start));
    auto r = rd_loss(model, batch, lambda, noise);
    if (!std::isfinite(r.loss)) fail(ErrorKind::kNumeric, "non-finite rate-distortion loss");
    nn::adam_step(model.analysis, r.analysis, opt.analysis, adam);
    nn::adam_step(model.synthesis, r.synthesis, opt.synthesis, adam);
    std::vector<double> ent, grad;
    for (const auto& ch : model.entropy.channels) ent.push_back(ch.mu);
    for (const auto& ch : model.entropy.channels) ent.push_back(ch.log_b);
    grad = r.d_mu;
    grad.insert(grad.end(), r.d_log_b.begin(), r.d_log_b.end());
    nn::adam_update<double>(ent, grad, opt.entropy, opt.analysis.step, nn::AdamConfig{cfg.entropy_lr});
    const std::size_t c = model.entropy.size();
    for (std::size_t i = 0; i < c; ++i) {
      model.entropy.channels[i].mu = ent[i];
      model.entropy.channels[i].log_b = std::clamp(ent[c + i], kMinTrainLogScale, 8.0);
    }
    loss_sum += r.loss;
    focal_sum += r.focal;
    bits += r.rate_bits;
    occupied += r.occupied;
    ++steps;
  }
  entry.loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
  entry.focal = steps ? focal_sum / static_cast<double>(steps) : 0.0;
  entry.bits_per_occupied = occupied ? bits / static_cast<double>(occupied) : 0.0;
  return entry;
}

// Trains one model per lambda, lowest lambda first; each later model starts
// from the final weights of the one trained before it.
inline CodecLadder train_codec(std::span<const pcloud::Block> blocks, const CodecConfig& config,
                               const CodecTrainConfig& cfg) {
  config.validate();
  for (const auto& b : blocks) {
    require(b.size == config.input_extent(), ErrorKind::kShape,
            "training block extent " + std::to_string(b.size) + " does not match codec input " +
                std::to_string(config.input_extent()));
  }
  CodecLadder out;
  out.training_order = ladder_training_order(cfg.ladder);
  out.models.resize(cfg.ladder.size());
  out.initial.resize(cfg.ladder.size());
  CodecModel current = build_codec<float>(config, derive_seed(cfg.seed, 0xC0DEC));
  for (std::size_t pos = 0; pos < out.training_order.size(); ++pos) {
    const int li = out.training_order[pos];
    const double lambda = cfg.ladder[static_cast<std::size_t>(li)];
    current.lambda = lambda;
    current.lambda_index = li;
    out.initial[static_cast<std::size_t>(li)] = current;
    CodecOptimizer opt;
    const int epochs = pos == 0 ? cfg.epochs : cfg.finetune_epochs;
    for (int e = 0; e < epochs; ++e) {
      CodecEpochLog entry;
      try {
        entry = codec_epoch(current, blocks, lambda, cfg, pos == 0 ? cfg.lr : cfg.finetune_lr, opt,
                            derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(li) * 1000 + e));
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::kNumeric) throw;
        fail(ErrorKind::kNumeric, "codec training diverged at lambda index " + std::to_string(li) +
                                      " (lambda " + std::to_string(lambda) + ", epoch " + std::to_string(e) +
                                      "): " + err.what());
      }
      entry.lambda_index = li;
      entry.lambda = lambda;
      entry.epoch = e;
      out.log.push_back(entry);
    }
    out.models[static_cast<std::size_t>(li)] = current;
  }
  return out;
}

}  // namespace lbpc::codec

#endif  // LBPC_CODEC_TRAIN_HPP_
