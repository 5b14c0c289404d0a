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

#ifndef LBPC_NN_NETWORK_HPP_
#define LBPC_NN_NETWORK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lbpc/core/error.hpp"
#include "lbpc/core/random.hpp"
#include "lbpc/nn/conv.hpp"
#include "lbpc/nn/layer_spec.hpp"
#include "lbpc/nn/tensor.hpp"

namespace lbpc::nn {

enum class Mode { kTrain, kInfer };

template <typename T>
struct Layer {
  LayerSpec spec;
  Shape in_shape;   // per item
  Shape out_shape;  // per item
  std::vector<Tensor<T>> params;
  std::vector<Tensor<T>> buffers;  // batch-norm running mean and variance
  bool frozen = false;
  Provenance provenance = Provenance::kFreshInit;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.size();
    return n;
  }
};

template <typename T>
struct ForwardCache {
  Mode mode = Mode::kInfer;
  bool valid = false;
  std::vector<Tensor<T>> inputs;
  std::vector<std::vector<Tensor<T>>> aux;
  Tensor<T> output;
};

template <typename T>
struct Gradients {
  // One entry per layer; empty for frozen or parameter-free layers.
  std::vector<std::vector<Tensor<T>>> layers;
  // Gradient w.r.t. the network input; empty unless requested.
  Tensor<T> input;
};

// A run of primitive layers that counts as one layer in architecture
// accounting (a convolution together with its activation and norm).
struct Unit {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive
  LayerKind kind = LayerKind::kConv3D;
};

namespace detail {

inline std::array<std::size_t, 3> spatial(const Shape& s) { return {s[0], s[1], s[2]}; }

template <typename T>
void init_layer(Layer<T>& layer, std::uint64_t seed) {
  Rng rng(seed);
  const LayerSpec& s = layer.spec;
  layer.params.clear();
  layer.buffers.clear();
  for (const Shape& shape : parameter_shapes(s)) layer.params.emplace_back(shape, T{0});
  auto he_uniform = [&](Tensor<T>& w, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-limit, limit));
  };
  const auto k3 = cube(static_cast<std::size_t>(s.kernel));
  switch (s.kind) {
    case LayerKind::kConv3D:
    case LayerKind::kConvTranspose3D:
      he_uniform(layer.params[0], k3 * s.in_channels);
      break;
    case LayerKind::kFullyConnected:
      he_uniform(layer.params[0], s.in_channels);
      break;
    case LayerKind::kBatchNorm:
      layer.params[0].fill(T{1});
      layer.buffers.emplace_back(Shape{s.in_channels}, T{0});
      layer.buffers.emplace_back(Shape{s.in_channels}, T{1});
      break;
    case LayerKind::kResidual: {
      std::size_t idx = 0;
      for (int kb : s.residual_kernels()) {
        for (int j = 0; j < 2; ++j) {
          he_uniform(layer.params[idx], cube(static_cast<std::size_t>(kb)) * s.in_channels);
          idx += s.has_bias ? 2 : 1;
        }
      }
      break;
    }
    default:
      break;
  }
}

template <typename T>
T leaky(T x, T slope) {
  return x > T{0} ? x : slope * x;
}

}  // namespace detail

template <typename T>
class Network {
 public:
  Network() = default;

  // Fresh He-uniform initialization, seeded per layer.
  Network(Shape input_shape, const std::vector<LayerSpec>& specs, std::uint64_t seed)
      : input_shape_(std::move(input_shape)) {
    Shape shape = input_shape_;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      Layer<T> layer;
      layer.spec = specs[i];
      layer.in_shape = shape;
      layer.out_shape = infer_output_shape(specs[i], shape, i);
      detail::init_layer(layer, derive_seed(seed, i));
      shape = layer.out_shape;
      layers_.push_back(std::move(layer));
    }
  }

  // Assembles already-populated layers, validating shapes against specs.
  static Network from_layers(Shape input_shape, std::vector<Layer<T>> layers) {
    Network net;
    net.input_shape_ = std::move(input_shape);
    Shape shape = net.input_shape_;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      Layer<T>& layer = layers[i];
      layer.in_shape = shape;
      layer.out_shape = infer_output_shape(layer.spec, shape, i);
      const auto expected = parameter_shapes(layer.spec);
      require(expected.size() == layer.params.size(), ErrorKind::kShape,
              "layer " + std::to_string(i) + " has " + std::to_string(layer.params.size()) +
                  " parameter tensors, expected " + std::to_string(expected.size()));
      for (std::size_t p = 0; p < expected.size(); ++p) {
        require(expected[p] == layer.params[p].shape(), ErrorKind::kShape,
                "layer " + std::to_string(i) + " parameter " + std::to_string(p) + " is " +
                    shape_str(layer.params[p].shape()) + ", expected " + shape_str(expected[p]));
      }
      if (layer.spec.kind == LayerKind::kBatchNorm) {
        require(layer.buffers.size() == 2, ErrorKind::kShape,
                "batch norm layer " + std::to_string(i) + " lacks running statistics");
      }
      shape = layer.out_shape;
    }
    net.layers_ = std::move(layers);
    return net;
  }

  template <typename U>
  Network<U> cast() const {
    std::vector<Layer<U>> out;
    for (const auto& l : layers_) {
      Layer<U> c;
      c.spec = l.spec;
      c.frozen = l.frozen;
      c.provenance = l.provenance;
      for (const auto& p : l.params) c.params.push_back(Tensor<U>::cast_from(p));
      for (const auto& b : l.buffers) c.buffers.push_back(Tensor<U>::cast_from(b));
      out.push_back(std::move(c));
    }
    return Network<U>::from_layers(input_shape_, std::move(out));
  }

  const Shape& input_shape() const { return input_shape_; }
  Shape output_shape() const { return layers_.empty() ? input_shape_ : layers_.back().out_shape; }
  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  Layer<T>& layer(std::size_t i) { return layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return layers_.at(i); }
  std::span<Layer<T>> layers() { return layers_; }
  std::span<const Layer<T>> layers() const { return layers_; }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.parameter_count();
    return n;
  }

  std::vector<Unit> units() const {
    std::vector<Unit> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].spec.starts_unit() || out.empty()) {
        out.push_back({i, i, layers_[i].spec.kind});
      } else {
        out.back().last = i;
      }
    }
    return out;
  }

  void set_unit_frozen(const Unit& u, bool frozen) {
    for (std::size_t i = u.first; i <= u.last; ++i) layers_[i].frozen = frozen;
  }
  void set_all_frozen(bool frozen) {
    for (auto& l : layers_) l.frozen = frozen;
  }
  void set_provenance(Provenance p) {
    for (auto& l : layers_) l.provenance = p;
  }

  // Inference pass; never mutates state.
  Tensor<T> infer(const Tensor<T>& input) const {
    check_input(input);
    Tensor<T> x = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = forward_layer(i, x, Mode::kInfer, nullptr, nullptr);
    }
    return x;
  }

  // Train mode uses batch statistics for non-frozen batch norms and updates
  // their running averages; when `cache` is given, intermediates are kept
  // for backward().
  Tensor<T> forward(const Tensor<T>& input, Mode mode, ForwardCache<T>* cache = nullptr) {
    check_input(input);
    if (cache != nullptr) {
      cache->mode = mode;
      cache->valid = true;
      cache->inputs.clear();
      cache->aux.assign(layers_.size(), {});
    }
    Tensor<T> x = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (cache != nullptr) cache->inputs.push_back(x);
      x = forward_layer(i, x, mode, cache ? &cache->aux[i] : nullptr, &layers_[i]);
    }
    if (cache != nullptr) cache->output = x;
    return x;
  }

  // Gradients for every non-frozen parameter. Frozen layers still pass the
  // gradient through whenever a trainable layer (or the input) sits below.
  Gradients<T> backward(const ForwardCache<T>& cache, const Tensor<T>& loss_grad,
                        bool need_input_grad = false) const {
    require(cache.valid && cache.mode == Mode::kTrain && cache.inputs.size() == layers_.size(),
            ErrorKind::kState, "backward requires a cached Train-mode forward pass");
    require(loss_grad.shape() == cache.output.shape(), ErrorKind::kShape,
            "loss gradient " + shape_str(loss_grad.shape()) + " vs output " +
                shape_str(cache.output.shape()));
    std::optional<std::size_t> lowest;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].spec.is_parameterized() && !layers_[i].frozen) {
        lowest = i;
        break;
      }
    }
    Gradients<T> grads;
    grads.layers.resize(layers_.size());
    Tensor<T> dy = loss_grad;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const bool want_dx = need_input_grad || (lowest && i > *lowest);
      const bool want_params = layers_[i].spec.is_parameterized() && !layers_[i].frozen;
      if (!want_dx && !want_params) break;
      Tensor<T> dx;
      backward_layer(i, cache, dy, want_params ? &grads.layers[i] : nullptr, want_dx ? &dx : nullptr);
      if (!want_dx) break;
      dy = std::move(dx);
      if (i == 0) grads.input = std::move(dy);
    }
    return grads;
  }

 private:
  void check_input(const Tensor<T>& input) const {
    Shape item = input.item_shape();
    if (input.rank() == 0 || item != input_shape_) {
      fail(ErrorKind::kShape, "network input expects [N x " + shape_str(input_shape_) + "], got " +
                                  shape_str(input.shape()));
    }
  }

  static Shape batched(std::size_t n, const Shape& item) {
    Shape s{n};
    s.insert(s.end(), item.begin(), item.end());
    return s;
  }

  // `mutable_layer` is non-null only when running statistics may update.
  Tensor<T> forward_layer(std::size_t i, const Tensor<T>& x, Mode mode, std::vector<Tensor<T>>* aux,
                          Layer<T>* mutable_layer) const {
    const Layer<T>& L = layers_[i];
    const LayerSpec& s = L.spec;
    const std::size_t n = x.dim(0);
    AlignedVector<T> scratch;
    switch (s.kind) {
      case LayerKind::kConv3D: {
        auto g = ConvGeometry::make(detail::spatial(L.in_shape), s.in_channels, s.out_channels,
                                    s.kernel, s.stride, s.padding);
        Tensor<T> y(batched(n, L.out_shape));
        const T* bias = s.has_bias ? L.params[1].data().data() : nullptr;
        for (std::size_t b = 0; b < n; ++b) {
          conv_forward(x.item(b).data(), L.params[0].data().data(), bias, g, y.item(b).data(), scratch);
        }
        return y;
      }
      case LayerKind::kConvTranspose3D: {
        auto g = ConvGeometry::adjoint_of_transpose(detail::spatial(L.in_shape), s.in_channels,
                                                    s.out_channels, s.kernel, s.stride, s.padding);
        Tensor<T> y(batched(n, L.out_shape));
        const T* bias = s.has_bias ? L.params[1].data().data() : nullptr;
        for (std::size_t b = 0; b < n; ++b) {
          conv_transpose_forward(x.item(b).data(), L.params[0].data().data(), bias, g,
                                 y.item(b).data(), scratch);
        }
        return y;
      }
      case LayerKind::kFullyConnected: {
        Tensor<T> y(Shape{n, s.out_channels});
        const auto rows = static_cast<Eigen::Index>(n);
        MatrixMap<T> out(y.data().data(), rows, static_cast<Eigen::Index>(s.out_channels));
        out.noalias() = ConstMatrixMap<T>(x.data().data(), rows, static_cast<Eigen::Index>(s.in_channels)) *
                        ConstMatrixMap<T>(L.params[0].data().data(), static_cast<Eigen::Index>(s.in_channels),
                                          static_cast<Eigen::Index>(s.out_channels));
        if (s.has_bias) {
          out.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(
              L.params[1].data().data(), static_cast<Eigen::Index>(s.out_channels));
        }
        return y;
      }
      case LayerKind::kLeakyReLU: {
        Tensor<T> y = x;
        const T slope = static_cast<T>(s.negative_slope);
        for (auto& v : y.data()) v = detail::leaky(v, slope);
        return y;
      }
      case LayerKind::kSigmoid: {
        Tensor<T> y = x;
        for (auto& v : y.data()) v = T{1} / (T{1} + std::exp(-v));
        if (aux != nullptr) aux->push_back(y);
        return y;
      }
      case LayerKind::kFlatten:
        return x.reshaped(batched(n, L.out_shape));
      case LayerKind::kBatchNorm:
        return batch_norm_forward(L, x, mode, aux, mutable_layer);
      case LayerKind::kResidual:
        return residual_forward(L, x, aux);
    }
    return x;
  }

  static Tensor<T> batch_norm_forward(const Layer<T>& L, const Tensor<T>& x, Mode mode,
                                      std::vector<Tensor<T>>* aux, Layer<T>* mutable_layer) {
    const std::size_t c = L.spec.in_channels;
    const std::size_t rows = x.size() / c;
    const auto& gamma = L.params[0];
    const auto& beta = L.params[1];
    Tensor<T> y(x.shape());
    Tensor<T> inv_std(Shape{c});
    const bool batch_stats = mode == Mode::kTrain && !L.frozen;
    if (batch_stats) {
      std::vector<double> mean(c, 0.0), var(c, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < c; ++j) mean[j] += x[r * c + j];
      }
      for (auto& m : mean) m /= static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < c; ++j) {
          const double d = x[r * c + j] - mean[j];
          var[j] += d * d;
        }
      }
      for (auto& v : var) v /= static_cast<double>(rows);
      Tensor<T> xhat(x.shape());
      for (std::size_t j = 0; j < c; ++j) inv_std[j] = static_cast<T>(1.0 / std::sqrt(var[j] + kBatchNormEpsilon));
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < c; ++j) {
          const T xh = static_cast<T>((x[r * c + j] - mean[j]) * inv_std[j]);
          xhat[r * c + j] = xh;
          y[r * c + j] = gamma[j] * xh + beta[j];
        }
      }
      if (mutable_layer != nullptr) {
        auto& run_mean = mutable_layer->buffers[0];
        auto& run_var = mutable_layer->buffers[1];
        for (std::size_t j = 0; j < c; ++j) {
          run_mean[j] = static_cast<T>(kBatchNormMomentum * run_mean[j] + (1.0 - kBatchNormMomentum) * mean[j]);
          run_var[j] = static_cast<T>(kBatchNormMomentum * run_var[j] + (1.0 - kBatchNormMomentum) * var[j]);
        }
      }
      if (aux != nullptr) {
        aux->push_back(std::move(xhat));
        aux->push_back(std::move(inv_std));
      }
      return y;
    }
    const auto& run_mean = L.buffers[0];
    const auto& run_var = L.buffers[1];
    for (std::size_t j = 0; j < c; ++j) {
      inv_std[j] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(run_var[j]) + kBatchNormEpsilon));
    }
    Tensor<T> xhat(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < c; ++j) {
        const T xh = (x[r * c + j] - run_mean[j]) * inv_std[j];
        xhat[r * c + j] = xh;
        y[r * c + j] = gamma[j] * xh + beta[j];
      }
    }
    if (aux != nullptr) {
      aux->push_back(std::move(xhat));
      aux->push_back(std::move(inv_std));
    }
    return y;
  }

  static Tensor<T> residual_forward(const Layer<T>& L, const Tensor<T>& x, std::vector<Tensor<T>>* aux) {
    const LayerSpec& s = L.spec;
    const std::size_t n = x.dim(0);
    const std::size_t c = s.in_channels;
    const T slope = static_cast<T>(s.negative_slope);
    Tensor<T> y = x;
    AlignedVector<T> scratch;
    AlignedVector<T> act;
    std::size_t pidx = 0;
    for (int kb : s.residual_kernels()) {
      auto g = ConvGeometry::make(detail::spatial(L.in_shape), c, c, kb, 1, Padding::kSame);
      const T* w1 = L.params[pidx].data().data();
      const T* b1 = s.has_bias ? L.params[pidx + 1].data().data() : nullptr;
      pidx += s.has_bias ? 2 : 1;
      const T* w2 = L.params[pidx].data().data();
      const T* b2 = s.has_bias ? L.params[pidx + 1].data().data() : nullptr;
      pidx += s.has_bias ? 2 : 1;
      Tensor<T> pre(x.shape());
      Tensor<T> branch_out(x.shape());
      for (std::size_t b = 0; b < n; ++b) {
        conv_forward(x.item(b).data(), w1, b1, g, pre.item(b).data(), scratch);
        act.assign(pre.item(b).begin(), pre.item(b).end());
        for (auto& v : act) v = detail::leaky(v, slope);
        conv_forward(act.data(), w2, b2, g, branch_out.item(b).data(), scratch);
      }
      for (std::size_t e = 0; e < y.size(); ++e) y[e] += branch_out[e];
      if (aux != nullptr) aux->push_back(std::move(pre));
    }
    return y;
  }

  void backward_layer(std::size_t i, const ForwardCache<T>& cache, const Tensor<T>& dy,
                      std::vector<Tensor<T>>* dparams, Tensor<T>* dx) const {
    const Layer<T>& L = layers_[i];
    const LayerSpec& s = L.spec;
    const Tensor<T>& x = cache.inputs[i];
    const auto& aux = cache.aux[i];
    const std::size_t n = x.dim(0);
    AlignedVector<T> scratch;
    if (dparams != nullptr) {
      dparams->clear();
      for (const auto& p : L.params) dparams->emplace_back(p.shape(), T{0});
    }
    if (dx != nullptr) *dx = Tensor<T>(x.shape(), T{0});
    switch (s.kind) {
      case LayerKind::kConv3D: {
        auto g = ConvGeometry::make(detail::spatial(L.in_shape), s.in_channels, s.out_channels,
                                    s.kernel, s.stride, s.padding);
        for (std::size_t b = 0; b < n; ++b) {
          conv_backward(x.item(b).data(), L.params[0].data().data(), dy.item(b).data(), g,
                        dparams ? (*dparams)[0].data().data() : nullptr,
                        dparams && s.has_bias ? (*dparams)[1].data().data() : nullptr,
                        dx ? dx->item(b).data() : nullptr, scratch);
        }
        return;
      }
      case LayerKind::kConvTranspose3D: {
        auto g = ConvGeometry::adjoint_of_transpose(detail::spatial(L.in_shape), s.in_channels,
                                                    s.out_channels, s.kernel, s.stride, s.padding);
        for (std::size_t b = 0; b < n; ++b) {
          conv_transpose_backward(x.item(b).data(), L.params[0].data().data(), dy.item(b).data(), g,
                                  dparams ? (*dparams)[0].data().data() : nullptr,
                                  dparams && s.has_bias ? (*dparams)[1].data().data() : nullptr,
                                  dx ? dx->item(b).data() : nullptr, scratch);
        }
        return;
      }
      case LayerKind::kFullyConnected: {
        const auto rows = static_cast<Eigen::Index>(n);
        const auto fin = static_cast<Eigen::Index>(s.in_channels);
        const auto fout = static_cast<Eigen::Index>(s.out_channels);
        ConstMatrixMap<T> grad_out(dy.data().data(), rows, fout);
        if (dparams != nullptr) {
          MatrixMap<T>((*dparams)[0].data().data(), fin, fout).noalias() =
              ConstMatrixMap<T>(x.data().data(), rows, fin).transpose() * grad_out;
          if (s.has_bias) {
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>((*dparams)[1].data().data(), fout) =
                grad_out.colwise().sum();
          }
        }
        if (dx != nullptr) {
          MatrixMap<T>(dx->data().data(), rows, fin).noalias() =
              grad_out * ConstMatrixMap<T>(L.params[0].data().data(), fin, fout).transpose();
        }
        return;
      }
      case LayerKind::kLeakyReLU: {
        const T slope = static_cast<T>(s.negative_slope);
        for (std::size_t e = 0; e < x.size(); ++e) (*dx)[e] = x[e] > T{0} ? dy[e] : slope * dy[e];
        return;
      }
      case LayerKind::kSigmoid: {
        const Tensor<T>& y = aux[0];
        for (std::size_t e = 0; e < x.size(); ++e) (*dx)[e] = dy[e] * y[e] * (T{1} - y[e]);
        return;
      }
      case LayerKind::kFlatten:
        *dx = dy.reshaped(x.shape());
        return;
      case LayerKind::kBatchNorm: {
        const std::size_t c = s.in_channels;
        const std::size_t rows = x.size() / c;
        const Tensor<T>& xhat = aux[0];
        const Tensor<T>& inv_std = aux[1];
        const auto& gamma = L.params[0];
        if (dparams != nullptr) {
          auto& dgamma = (*dparams)[0];
          auto& dbeta = (*dparams)[1];
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < c; ++j) {
              dgamma[j] += dy[r * c + j] * xhat[r * c + j];
              dbeta[j] += dy[r * c + j];
            }
          }
        }
        if (dx == nullptr) return;
        if (L.frozen) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < c; ++j) (*dx)[r * c + j] = dy[r * c + j] * gamma[j] * inv_std[j];
          }
          return;
        }
        std::vector<double> sum_d(c, 0.0), sum_dx(c, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < c; ++j) {
            const double d = static_cast<double>(dy[r * c + j]) * gamma[j];
            sum_d[j] += d;
            sum_dx[j] += d * xhat[r * c + j];
          }
        }
        const double inv_rows = 1.0 / static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < c; ++j) {
            const double d = static_cast<double>(dy[r * c + j]) * gamma[j];
            (*dx)[r * c + j] = static_cast<T>(
                inv_std[j] * (d - sum_d[j] * inv_rows - xhat[r * c + j] * sum_dx[j] * inv_rows));
          }
        }
        return;
      }
      case LayerKind::kResidual:
        residual_backward(L, x, aux, dy, dparams, dx);
        return;
    }
  }

  static void residual_backward(const Layer<T>& L, const Tensor<T>& x, const std::vector<Tensor<T>>& aux,
                                const Tensor<T>& dy, std::vector<Tensor<T>>* dparams, Tensor<T>* dx) {
    const LayerSpec& s = L.spec;
    const std::size_t n = x.dim(0);
    const std::size_t c = s.in_channels;
    const T slope = static_cast<T>(s.negative_slope);
    if (dx != nullptr) *dx = dy;
    AlignedVector<T> scratch;
    AlignedVector<T> act;
    AlignedVector<T> dact;
    std::size_t pidx = 0;
    std::size_t branch = 0;
    for (int kb : s.residual_kernels()) {
      auto g = ConvGeometry::make(detail::spatial(L.in_shape), c, c, kb, 1, Padding::kSame);
      const std::size_t i_w1 = pidx;
      const std::size_t i_b1 = pidx + 1;
      pidx += s.has_bias ? 2 : 1;
      const std::size_t i_w2 = pidx;
      const std::size_t i_b2 = pidx + 1;
      pidx += s.has_bias ? 2 : 1;
      const Tensor<T>& pre = aux[branch++];
      for (std::size_t b = 0; b < n; ++b) {
        auto pre_b = pre.item(b);
        act.assign(pre_b.begin(), pre_b.end());
        for (auto& v : act) v = detail::leaky(v, slope);
        dact.assign(act.size(), T{0});
        conv_backward(act.data(), L.params[i_w2].data().data(), dy.item(b).data(), g,
                      dparams ? (*dparams)[i_w2].data().data() : nullptr,
                      dparams && s.has_bias ? (*dparams)[i_b2].data().data() : nullptr, dact.data(),
                      scratch);
        for (std::size_t e = 0; e < dact.size(); ++e) {
          if (!(pre_b[e] > T{0})) dact[e] *= slope;
        }
        conv_backward(x.item(b).data(), L.params[i_w1].data().data(), dact.data(), g,
                      dparams ? (*dparams)[i_w1].data().data() : nullptr,
                      dparams && s.has_bias ? (*dparams)[i_b1].data().data() : nullptr,
                      dx ? dx->item(b).data() : nullptr, scratch);
      }
    }
  }

  Shape input_shape_;
  std::vector<Layer<T>> layers_;
};

}  // namespace lbpc::nn

#endif  // LBPC_NN_NETWORK_HPP_
