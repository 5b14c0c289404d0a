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

#ifndef LBPC_CLASSIFIER_TRAIN_HPP_
#define LBPC_CLASSIFIER_TRAIN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lbpc/classifier/features.hpp"
#include "lbpc/classifier/model.hpp"
#include "lbpc/core/error.hpp"
#include "lbpc/core/parallel.hpp"
#include "lbpc/core/random.hpp"
#include "lbpc/nn/adam.hpp"
#include "lbpc/nn/losses.hpp"
#include "lbpc/nn/network.hpp"

namespace lbpc::classifier {

// Labeled inputs materialized on demand: fill(i, dst) writes example i.
struct Examples {
  nn::Shape item_shape;
  std::vector<std::size_t> labels;
  std::function<void(std::size_t, std::span<float>)> fill;

  std::size_t size() const { return labels.size(); }

  nn::Tensor<float> batch(std::span<const std::size_t> ids) const {
    nn::Shape shape{ids.size()};
    shape.insert(shape.end(), item_shape.begin(), item_shape.end());
    nn::Tensor<float> t(shape);
    for (std::size_t b = 0; b < ids.size(); ++b) fill(ids[b], t.item(b));
    return t;
  }
};

inline Examples feature_examples(std::vector<VoxelFeatureGrid> grids, std::vector<std::size_t> labels) {
  require(grids.size() == labels.size(), ErrorKind::kArgument, "feature grids and labels differ in count");
  require(!grids.empty(), ErrorKind::kArgument, "no examples");
  Examples ex;
  ex.item_shape = grids.front().shape();
  for (const auto& g : grids) require(g.shape() == ex.item_shape, ErrorKind::kShape, "mixed feature grid shapes");
  ex.labels = std::move(labels);
  auto store = std::make_shared<std::vector<VoxelFeatureGrid>>(std::move(grids));
  ex.fill = [store](std::size_t i, std::span<float> dst) { (*store)[i].write_dense(dst); };
  return ex;
}

inline Examples tensor_examples(std::vector<nn::Tensor<float>> items, std::vector<std::size_t> labels) {
  require(items.size() == labels.size(), ErrorKind::kArgument, "inputs and labels differ in count");
  require(!items.empty(), ErrorKind::kArgument, "no examples");
  Examples ex;
  ex.item_shape = items.front().shape();
  for (const auto& t : items) require(t.shape() == ex.item_shape, ErrorKind::kShape, "mixed input shapes");
  ex.labels = std::move(labels);
  auto store = std::make_shared<std::vector<nn::Tensor<float>>>(std::move(items));
  ex.fill = [store](std::size_t i, std::span<float> dst) {
    const auto& src = (*store)[i].data();
    std::copy(src.begin(), src.end(), dst.begin());
  };
  return ex;
}

struct TrainHyper {
  int batch_size = 32;
  double lr = 1e-4;
  int max_epochs = 200;
  int lr_patience = 10;    // epochs without a validation gain before halving
  int early_stop = 50;     // epochs without a validation gain before stopping
  std::uint64_t seed = 0;
  int threads = 1;         // evaluation only
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_top1 = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  nn::Network<float> best;
  int best_epoch = -1;
  double best_val_top1 = 0.0;
  std::vector<EpochRecord> history;
};

// Logits per example; inference is independent across examples.
inline std::vector<std::vector<float>> predict_logits(const nn::Network<float>& net, const Examples& ex,
                                                      int threads = 1) {
  require(ex.item_shape == net.input_shape(), ErrorKind::kShape,
          "examples are " + nn::shape_str(ex.item_shape) + ", network expects " + nn::shape_str(net.input_shape()));
  std::vector<std::vector<float>> out(ex.size());
  parallel_for(ex.size(), threads, [&](std::size_t i) {
    const std::size_t id = i;
    nn::Tensor<float> y = net.infer(ex.batch(std::span(&id, 1)));
    out[i].assign(y.data().begin(), y.data().end());
  });
  return out;
}

// Classes by descending probability; equal scores keep the lower class id
// first.
inline std::vector<std::size_t> predict_topk(std::span<const float> logits, std::size_t k) {
  require(k >= 1 && k <= logits.size(), ErrorKind::kArgument,
          "k = " + std::to_string(k) + " outside [1, " + std::to_string(logits.size()) + "]");
  const std::vector<double> p = nn::softmax(logits);
  std::vector<std::size_t> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  order.resize(k);
  return order;
}

inline double top1_accuracy(const std::vector<std::vector<float>>& logits, std::span<const std::size_t> labels) {
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predict_topk(logits[i], 1)[0] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

// Adam with cross-entropy over shuffled minibatches. After each epoch the
// validation Top-1 decides the checkpoint, learning-rate halving and early
// stopping. Frozen layers are left untouched. Returns the best checkpoint.
inline TrainResult train_network(nn::Network<float> net, const Examples& train, const Examples& val,
                                 const TrainHyper& hyper) {
  require(train.size() > 0 && val.size() > 0, ErrorKind::kArgument, "training and validation sets must be non-empty");
  require(hyper.batch_size >= 1 && hyper.max_epochs >= 1 && hyper.lr > 0.0, ErrorKind::kConfig,
          "batch size, epoch count and learning rate must be positive");
  TrainResult out;
  out.best = net;
  out.best_val_top1 = -1.0;
  nn::AdamState<float> state;
  double lr = hyper.lr;
  int since_best = 0, since_change = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(hyper.batch_size);
  for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    Rng shuffle(derive_seed(hyper.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const auto ids = std::span(order).subspan(start, std::min(bs, order.size() - start));
      std::vector<std::size_t> labels;
      for (std::size_t id : ids) labels.push_back(train.labels[id]);
      nn::ForwardCache<float> cache;
      nn::Tensor<float> logits = net.forward(train.batch(ids), nn::Mode::kTrain, &cache);
      auto loss = nn::cross_entropy_batch(logits, labels);
      if (!std::isfinite(loss.value)) {
        fail(ErrorKind::kNumeric, "non-finite training loss at epoch " + std::to_string(epoch));
      }
      nn::adam_step(net, net.backward(cache, loss.grad), state, nn::AdamConfig{lr});
      loss_sum += loss.value * static_cast<double>(ids.size());
      seen += ids.size();
    }
    const double val_top1 = top1_accuracy(predict_logits(net, val, hyper.threads), val.labels);
    out.history.push_back({epoch, loss_sum / static_cast<double>(seen), val_top1, lr});
    if (val_top1 > out.best_val_top1) {
      out.best_val_top1 = val_top1;
      out.best_epoch = epoch;
      out.best = net;
      since_best = 0;
      since_change = 0;
    } else {
      ++since_best;
      if (++since_change >= hyper.lr_patience) {
        lr *= 0.5;
        since_change = 0;
      }
      if (since_best >= hyper.early_stop) break;
    }
  }
  return out;
}

}  // namespace lbpc::classifier

#endif  // LBPC_CLASSIFIER_TRAIN_HPP_
