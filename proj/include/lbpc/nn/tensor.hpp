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

#ifndef LBPC_NN_TENSOR_HPP_
#define LBPC_NN_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lbpc/core/error.hpp"

namespace lbpc::nn {

using Shape = std::vector<std::size_t>;

inline constexpr std::size_t kBufferAlignment = 64;

// Buffers start on a fixed boundary so that vectorized reductions take the
// same code path, and round the same way, on every run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kBufferAlignment}));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{kBufferAlignment}); }
  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

inline std::size_t shape_volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// Dense row-major tensor. Activation tensors carry a leading batch axis and
// keep channels last: [N, D, H, W, C] for volumes, [N, F] for vectors.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    for (std::size_t e : shape_) {
      require(e > 0, ErrorKind::kShape, "tensor extents must be positive, got " + shape_str(shape_));
    }
    data_.assign(shape_volume(shape_), fill);
  }
  Tensor(Shape shape, AlignedVector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    require(shape_volume(shape_) == data_.size(), ErrorKind::kShape,
            "data length " + std::to_string(data_.size()) + " does not match " + shape_str(shape_));
  }
  Tensor(Shape shape, const std::vector<T>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    require(shape_volume(shape_) == data_.size(), ErrorKind::kShape,
            "data length " + std::to_string(data_.size()) + " does not match " + shape_str(shape_));
  }

  template <typename U>
  static Tensor cast_from(const Tensor<U>& other) {
    AlignedVector<T> data(other.data().begin(), other.data().end());
    return Tensor(other.shape(), std::move(data));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T> to_vector() const { return {data_.begin(), data_.end()}; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  Tensor reshaped(Shape shape) const& {
    require(shape_volume(shape) == data_.size(), ErrorKind::kShape,
            "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
  }
  Tensor reshaped(Shape shape) && {
    require(shape_volume(shape) == data_.size(), ErrorKind::kShape,
            "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), std::move(data_));
  }

  // Elements per leading-axis entry.
  std::size_t item_size() const { return shape_.empty() ? 0 : data_.size() / shape_[0]; }
  std::span<const T> item(std::size_t n) const {
    return std::span<const T>(data_).subspan(n * item_size(), item_size());
  }
  std::span<T> item(std::size_t n) { return std::span<T>(data_).subspan(n * item_size(), item_size()); }

  Shape item_shape() const { return Shape(shape_.begin() + 1, shape_.end()); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  AlignedVector<T> data_;
};

// Stacks equally shaped items into a batch tensor [N, ...].
template <typename T>
Tensor<T> stack(std::span<const Tensor<T>* const> items) {
  require(!items.empty(), ErrorKind::kArgument, "cannot stack an empty list");
  const Shape& item_shape = items[0]->shape();
  Shape shape{items.size()};
  shape.insert(shape.end(), item_shape.begin(), item_shape.end());
  AlignedVector<T> data;
  data.reserve(shape_volume(shape));
  for (const Tensor<T>* t : items) {
    require(t->shape() == item_shape, ErrorKind::kShape,
            "stack: " + shape_str(t->shape()) + " vs " + shape_str(item_shape));
    data.insert(data.end(), t->data().begin(), t->data().end());
  }
  return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace lbpc::nn

#endif  // LBPC_NN_TENSOR_HPP_
