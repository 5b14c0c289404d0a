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

#ifndef LBPC_NN_CONV_HPP_
#define LBPC_NN_CONV_HPP_

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <vector>

#include "lbpc/nn/layer_spec.hpp"

namespace lbpc::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// Geometry of a strided 3D convolution over channels-last volumes. Columns
// of the patch matrix are ordered (kd, kh, kw, cin), matching the
// [k, k, k, cin, cout] kernel layout.
struct ConvGeometry {
  std::array<std::size_t, 3> in{};
  std::array<std::size_t, 3> out{};
  std::array<long, 3> pad_lo{};
  int kernel = 1;
  int stride = 1;
  std::size_t cin = 0;
  std::size_t cout = 0;

  std::size_t in_positions() const { return in[0] * in[1] * in[2]; }
  std::size_t out_positions() const { return out[0] * out[1] * out[2]; }
  std::size_t patch() const { return cube(static_cast<std::size_t>(kernel)) * cin; }

  static ConvGeometry make(std::array<std::size_t, 3> in_dims, std::size_t cin, std::size_t cout,
                           int kernel, int stride, Padding padding) {
    ConvGeometry g;
    g.in = in_dims;
    g.kernel = kernel;
    g.stride = stride;
    g.cin = cin;
    g.cout = cout;
    for (int a = 0; a < 3; ++a) {
      g.out[a] = conv_output_extent(in_dims[a], kernel, stride, padding);
      if (padding == Padding::kSame) {
        const long total = static_cast<long>((g.out[a] - 1) * stride + kernel) -
                           static_cast<long>(in_dims[a]);
        g.pad_lo[a] = total > 0 ? total / 2 : 0;
      }
    }
    return g;
  }

  // The forward convolution whose adjoint is the transposed convolution
  // taking `in_dims` (with `cin` channels) to the larger output volume.
  static ConvGeometry adjoint_of_transpose(std::array<std::size_t, 3> in_dims, std::size_t cin,
                                           std::size_t cout, int kernel, int stride,
                                           Padding padding) {
    std::array<std::size_t, 3> big{};
    for (int a = 0; a < 3; ++a) big[a] = conv_transpose_output_extent(in_dims[a], kernel, stride, padding);
    ConvGeometry g = make(big, cout, cin, kernel, stride, padding);
    g.out = in_dims;
    return g;
  }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const std::size_t patch = g.patch();
  const long k = g.kernel;
  std::size_t row = 0;
  for (std::size_t od = 0; od < g.out[0]; ++od) {
    for (std::size_t oh = 0; oh < g.out[1]; ++oh) {
      for (std::size_t ow = 0; ow < g.out[2]; ++ow, ++row) {
        T* dst = cols + row * patch;
        const long bd = static_cast<long>(od) * g.stride - g.pad_lo[0];
        const long bh = static_cast<long>(oh) * g.stride - g.pad_lo[1];
        const long bw = static_cast<long>(ow) * g.stride - g.pad_lo[2];
        for (long kd = 0; kd < k; ++kd) {
          const long id = bd + kd;
          const bool vd = id >= 0 && id < static_cast<long>(g.in[0]);
          for (long kh = 0; kh < k; ++kh) {
            const long ih = bh + kh;
            const bool vh = vd && ih >= 0 && ih < static_cast<long>(g.in[1]);
            for (long kw = 0; kw < k; ++kw, dst += g.cin) {
              const long iw = bw + kw;
              if (vh && iw >= 0 && iw < static_cast<long>(g.in[2])) {
                const T* src = x + ((static_cast<std::size_t>(id) * g.in[1] + static_cast<std::size_t>(ih)) *
                                        g.in[2] +
                                    static_cast<std::size_t>(iw)) *
                                       g.cin;
                for (std::size_t c = 0; c < g.cin; ++c) dst[c] = src[c];
              } else {
                for (std::size_t c = 0; c < g.cin; ++c) dst[c] = T{0};
              }
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patch rows back into the volume.
template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* x) {
  const std::size_t patch = g.patch();
  const long k = g.kernel;
  std::size_t row = 0;
  for (std::size_t od = 0; od < g.out[0]; ++od) {
    for (std::size_t oh = 0; oh < g.out[1]; ++oh) {
      for (std::size_t ow = 0; ow < g.out[2]; ++ow, ++row) {
        const T* src = cols + row * patch;
        const long bd = static_cast<long>(od) * g.stride - g.pad_lo[0];
        const long bh = static_cast<long>(oh) * g.stride - g.pad_lo[1];
        const long bw = static_cast<long>(ow) * g.stride - g.pad_lo[2];
        for (long kd = 0; kd < k; ++kd) {
          const long id = bd + kd;
          const bool vd = id >= 0 && id < static_cast<long>(g.in[0]);
          for (long kh = 0; kh < k; ++kh) {
            const long ih = bh + kh;
            const bool vh = vd && ih >= 0 && ih < static_cast<long>(g.in[1]);
            for (long kw = 0; kw < k; ++kw, src += g.cin) {
              const long iw = bw + kw;
              if (vh && iw >= 0 && iw < static_cast<long>(g.in[2])) {
                T* dst = x + ((static_cast<std::size_t>(id) * g.in[1] + static_cast<std::size_t>(ih)) *
                                  g.in[2] +
                              static_cast<std::size_t>(iw)) *
                                 g.cin;
                for (std::size_t c = 0; c < g.cin; ++c) dst[c] += src[c];
              }
            }
          }
        }
      }
    }
  }
}

// y[out_positions, cout] = im2col(x) * W (+ b), one item.
template <typename T>
void conv_forward(const T* x, const T* weight, const T* bias, const ConvGeometry& g, T* y,
                  AlignedVector<T>& scratch) {
  const auto rows = static_cast<Eigen::Index>(g.out_positions());
  const auto patch = static_cast<Eigen::Index>(g.patch());
  const auto cout = static_cast<Eigen::Index>(g.cout);
  scratch.resize(static_cast<std::size_t>(rows * patch));
  im2col(x, g, scratch.data());
  MatrixMap<T> out(y, rows, cout);
  out.noalias() = ConstMatrixMap<T>(scratch.data(), rows, patch) * ConstMatrixMap<T>(weight, patch, cout);
  if (bias != nullptr) out.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias, cout);
}

// Accumulates dW, db and (if dx != nullptr) dx for one item.
template <typename T>
void conv_backward(const T* x, const T* weight, const T* dy, const ConvGeometry& g, T* dweight,
                   T* dbias, T* dx, AlignedVector<T>& scratch) {
  const auto rows = static_cast<Eigen::Index>(g.out_positions());
  const auto patch = static_cast<Eigen::Index>(g.patch());
  const auto cout = static_cast<Eigen::Index>(g.cout);
  ConstMatrixMap<T> grad_out(dy, rows, cout);
  if (dweight != nullptr) {
    scratch.resize(static_cast<std::size_t>(rows * patch));
    im2col(x, g, scratch.data());
    MatrixMap<T>(dweight, patch, cout).noalias() +=
        ConstMatrixMap<T>(scratch.data(), rows, patch).transpose() * grad_out;
  }
  if (dbias != nullptr) {
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(dbias, cout) += grad_out.colwise().sum();
  }
  if (dx != nullptr) {
    scratch.resize(static_cast<std::size_t>(rows * patch));
    MatrixMap<T> cols(scratch.data(), rows, patch);
    cols.noalias() = grad_out * ConstMatrixMap<T>(weight, patch, cout).transpose();
    col2im_add(scratch.data(), g, dx);
  }
}

// Transposed convolution, one item: y = col2im(x * W^T) + b where g is the
// adjoint forward geometry (g.in is the large output volume).
template <typename T>
void conv_transpose_forward(const T* x, const T* weight, const T* bias, const ConvGeometry& g, T* y,
                            AlignedVector<T>& scratch) {
  const auto rows = static_cast<Eigen::Index>(g.out_positions());
  const auto patch = static_cast<Eigen::Index>(g.patch());
  const auto cin_t = static_cast<Eigen::Index>(g.cout);
  scratch.resize(static_cast<std::size_t>(rows * patch));
  MatrixMap<T> cols(scratch.data(), rows, patch);
  cols.noalias() = ConstMatrixMap<T>(x, rows, cin_t) * ConstMatrixMap<T>(weight, patch, cin_t).transpose();
  const std::size_t n_out = g.in_positions() * g.cin;
  std::fill(y, y + n_out, T{0});
  col2im_add(scratch.data(), g, y);
  if (bias != nullptr) {
    for (std::size_t p = 0; p < g.in_positions(); ++p) {
      for (std::size_t c = 0; c < g.cin; ++c) y[p * g.cin + c] += bias[c];
    }
  }
}

template <typename T>
void conv_transpose_backward(const T* x, const T* weight, const T* dy, const ConvGeometry& g,
                             T* dweight, T* dbias, T* dx, AlignedVector<T>& scratch) {
  const auto rows = static_cast<Eigen::Index>(g.out_positions());
  const auto patch = static_cast<Eigen::Index>(g.patch());
  const auto cin_t = static_cast<Eigen::Index>(g.cout);
  scratch.resize(static_cast<std::size_t>(rows * patch));
  im2col(dy, g, scratch.data());
  ConstMatrixMap<T> cols(scratch.data(), rows, patch);
  if (dweight != nullptr) {
    MatrixMap<T>(dweight, patch, cin_t).noalias() += cols.transpose() * ConstMatrixMap<T>(x, rows, cin_t);
  }
  if (dbias != nullptr) {
    for (std::size_t p = 0; p < g.in_positions(); ++p) {
      for (std::size_t c = 0; c < g.cin; ++c) dbias[c] += dy[p * g.cin + c];
    }
  }
  if (dx != nullptr) {
    MatrixMap<T>(dx, rows, cin_t).noalias() += cols * ConstMatrixMap<T>(weight, patch, cin_t);
  }
}

}  // namespace lbpc::nn

#endif  // LBPC_NN_CONV_HPP_
