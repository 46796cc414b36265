// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The EMEV-IdNet Workbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "emev/nn/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstddef>
#include <vector>

namespace emev::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;

constexpr std::size_t kReduceChunks = 8;

// Signed offset of input coordinate for output coordinate o and kernel tap k.
inline long tap(std::size_t o, std::size_t k, std::size_t extent) {
  return static_cast<long>(o) + static_cast<long>(k) - static_cast<long>(extent / 2);
}

template <typename T>
void im2col(const ConvGeometry& g, const T* in, T* cols) {
  const std::size_t row_len = g.kernel_volume() * g.cin;
  std::size_t p = 0;
  for (std::size_t z = 0; z < g.d; ++z)
    for (std::size_t y = 0; y < g.h; ++y)
      for (std::size_t x = 0; x < g.w; ++x, ++p) {
        T* row = cols + p * row_len;
        for (std::size_t a = 0; a < g.kd; ++a) {
          const long zz = tap(z, a, g.kd);
          for (std::size_t b = 0; b < g.kh; ++b) {
            const long yy = tap(y, b, g.kh);
            for (std::size_t c = 0; c < g.kw; ++c, row += g.cin) {
              const long xx = tap(x, c, g.kw);
              if (zz < 0 || yy < 0 || xx < 0 || zz >= static_cast<long>(g.d) || yy >= static_cast<long>(g.h) ||
                  xx >= static_cast<long>(g.w)) {
                std::fill_n(row, g.cin, T{0});
              } else {
                const T* src = in + ((static_cast<std::size_t>(zz) * g.h + static_cast<std::size_t>(yy)) * g.w +
                                     static_cast<std::size_t>(xx)) *
                                        g.cin;
                std::copy_n(src, g.cin, row);
              }
            }
          }
        }
      }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* cols, T* in) {
  std::fill_n(in, g.input_stride(), T{0});
  const std::size_t row_len = g.kernel_volume() * g.cin;
  std::size_t p = 0;
  for (std::size_t z = 0; z < g.d; ++z)
    for (std::size_t y = 0; y < g.h; ++y)
      for (std::size_t x = 0; x < g.w; ++x, ++p) {
        const T* row = cols + p * row_len;
        for (std::size_t a = 0; a < g.kd; ++a) {
          const long zz = tap(z, a, g.kd);
          for (std::size_t b = 0; b < g.kh; ++b) {
            const long yy = tap(y, b, g.kh);
            for (std::size_t c = 0; c < g.kw; ++c, row += g.cin) {
              const long xx = tap(x, c, g.kw);
              if (zz < 0 || yy < 0 || xx < 0 || zz >= static_cast<long>(g.d) || yy >= static_cast<long>(g.h) ||
                  xx >= static_cast<long>(g.w))
                continue;
              T* dst = in + ((static_cast<std::size_t>(zz) * g.h + static_cast<std::size_t>(yy)) * g.w +
                             static_cast<std::size_t>(xx)) *
                                g.cin;
              for (std::size_t ci = 0; ci < g.cin; ++ci) dst[ci] += row[ci];
            }
          }
        }
      }
}

} // namespace

template <typename T>
void conv_forward_reference(const ConvGeometry& g, std::size_t batch, const T* in, const T* weights, const T* bias,
                            T* out) {
  for (std::size_t n = 0; n < batch; ++n) {
    const T* x = in + n * g.input_stride();
    T* y = out + n * g.output_stride();
    for (std::size_t z = 0; z < g.d; ++z)
      for (std::size_t yy = 0; yy < g.h; ++yy)
        for (std::size_t xx = 0; xx < g.w; ++xx)
          for (std::size_t co = 0; co < g.cout; ++co) {
            T acc = bias[co];
            for (std::size_t a = 0; a < g.kd; ++a)
              for (std::size_t b = 0; b < g.kh; ++b)
                for (std::size_t c = 0; c < g.kw; ++c) {
                  const long iz = tap(z, a, g.kd), iy = tap(yy, b, g.kh), ix = tap(xx, c, g.kw);
                  if (iz < 0 || iy < 0 || ix < 0 || iz >= static_cast<long>(g.d) || iy >= static_cast<long>(g.h) ||
                      ix >= static_cast<long>(g.w))
                    continue;
                  for (std::size_t ci = 0; ci < g.cin; ++ci) {
                    const T v = x[((static_cast<std::size_t>(iz) * g.h + static_cast<std::size_t>(iy)) * g.w +
                                   static_cast<std::size_t>(ix)) *
                                      g.cin +
                                  ci];
                    acc += v * weights[(((a * g.kh + b) * g.kw + c) * g.cin + ci) * g.cout + co];
                  }
                }
            y[((z * g.h + yy) * g.w + xx) * g.cout + co] = acc;
          }
  }
}

template <typename T>
void conv_backward_reference(const ConvGeometry& g, std::size_t batch, const T* in, const T* weights,
                             const T* grad_out, T* grad_in, T* grad_weights, T* grad_bias) {
  for (std::size_t n = 0; n < batch; ++n) {
    const T* x = in + n * g.input_stride();
    const T* dy = grad_out + n * g.output_stride();
    T* dx = grad_in ? grad_in + n * g.input_stride() : nullptr;
    if (dx) std::fill_n(dx, g.input_stride(), T{0});
    for (std::size_t z = 0; z < g.d; ++z)
      for (std::size_t yy = 0; yy < g.h; ++yy)
        for (std::size_t xx = 0; xx < g.w; ++xx)
          for (std::size_t co = 0; co < g.cout; ++co) {
            const T gout = dy[((z * g.h + yy) * g.w + xx) * g.cout + co];
            grad_bias[co] += gout;
            for (std::size_t a = 0; a < g.kd; ++a)
              for (std::size_t b = 0; b < g.kh; ++b)
                for (std::size_t c = 0; c < g.kw; ++c) {
                  const long iz = tap(z, a, g.kd), iy = tap(yy, b, g.kh), ix = tap(xx, c, g.kw);
                  if (iz < 0 || iy < 0 || ix < 0 || iz >= static_cast<long>(g.d) || iy >= static_cast<long>(g.h) ||
                      ix >= static_cast<long>(g.w))
                    continue;
                  const std::size_t base = ((static_cast<std::size_t>(iz) * g.h + static_cast<std::size_t>(iy)) * g.w +
                                            static_cast<std::size_t>(ix)) *
                                           g.cin;
                  for (std::size_t ci = 0; ci < g.cin; ++ci) {
                    const std::size_t wi = (((a * g.kh + b) * g.kw + c) * g.cin + ci) * g.cout + co;
                    grad_weights[wi] += x[base + ci] * gout;
                    if (dx) dx[base + ci] += weights[wi] * gout;
                  }
                }
          }
  }
}

template <typename T>
void conv_forward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weights, const T* bias, T* out) {
  const auto P = static_cast<Eigen::Index>(g.positions());
  const auto K = static_cast<Eigen::Index>(g.kernel_volume() * g.cin);
  const auto C = static_cast<Eigen::Index>(g.cout);
  const ConstMap<T> W(weights, K, C);
  const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias, C);
#pragma omp parallel
  {
    std::vector<T> cols(static_cast<std::size_t>(P * K));
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(batch); ++n) {
      const auto i = static_cast<std::size_t>(n);
      im2col(g, in + i * g.input_stride(), cols.data());
      Map<T> Y(out + i * g.output_stride(), P, C);
      Y.noalias() = ConstMap<T>(cols.data(), P, K) * W;
      Y.rowwise() += b;
    }
  }
}

template <typename T>
void conv_backward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weights, const T* grad_out,
                   T* grad_in, T* grad_weights, T* grad_bias) {
  if (batch == 0) return;
  const auto P = static_cast<Eigen::Index>(g.positions());
  const auto K = static_cast<Eigen::Index>(g.kernel_volume() * g.cin);
  const auto C = static_cast<Eigen::Index>(g.cout);
  const ConstMap<T> W(weights, K, C);

  const std::size_t chunks = std::min(batch, kReduceChunks);
  std::vector<std::vector<T>> gw(chunks, std::vector<T>(g.weight_count(), T{0}));
  std::vector<std::vector<T>> gb(chunks, std::vector<T>(g.cout, T{0}));

#pragma omp parallel
  {
    std::vector<T> cols(static_cast<std::size_t>(P * K));
    std::vector<T> dcols(grad_in ? static_cast<std::size_t>(P * K) : 0);
#pragma omp for schedule(static)
    for (std::ptrdiff_t ch = 0; ch < static_cast<std::ptrdiff_t>(chunks); ++ch) {
      const std::size_t c = static_cast<std::size_t>(ch);
      const std::size_t begin = batch * c / chunks, end = batch * (c + 1) / chunks;
      Map<T> GW(gw[c].data(), K, C);
      for (std::size_t n = begin; n < end; ++n) {
        im2col(g, in + n * g.input_stride(), cols.data());
        const ConstMap<T> X(cols.data(), P, K);
        const ConstMap<T> DY(grad_out + n * g.output_stride(), P, C);
        GW.noalias() += X.transpose() * DY;
        // plain loop: Eigen's vectorized reductions reorder by buffer alignment
        const T* dy = grad_out + n * g.output_stride();
        for (std::size_t p = 0; p < g.positions(); ++p)
          for (std::size_t o = 0; o < g.cout; ++o) gb[c][o] += dy[p * g.cout + o];
        if (grad_in) {
          Map<T>(dcols.data(), P, K).noalias() = DY * W.transpose();
          col2im(g, dcols.data(), grad_in + n * g.input_stride());
        }
      }
    }
  }
  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t i = 0; i < g.weight_count(); ++i) grad_weights[i] += gw[c][i];
    for (std::size_t i = 0; i < g.cout; ++i) grad_bias[i] += gb[c][i];
  }
}

#define EMEV_INSTANTIATE(T)                                                                                     \
  template void conv_forward_reference<T>(const ConvGeometry&, std::size_t, const T*, const T*, const T*, T*); \
  template void conv_backward_reference<T>(const ConvGeometry&, std::size_t, const T*, const T*, const T*, T*, \
                                           T*, T*);                                                            \
  template void conv_forward<T>(const ConvGeometry&, std::size_t, const T*, const T*, const T*, T*);           \
  template void conv_backward<T>(const ConvGeometry&, std::size_t, const T*, const T*, const T*, T*, T*, T*);

EMEV_INSTANTIATE(float)
EMEV_INSTANTIATE(double)
EMEV_INSTANTIATE(long double)
#undef EMEV_INSTANTIATE

} // namespace emev::nn
