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

// Same-padded, stride-1 convolution kernels.
//
// Layouts (row-major, channels last):
//   input   [batch][d][h][w][cin]
//   weights [kd][kh][kw][cin][cout]
//   output  [batch][d][h][w][cout]
// A 2D convolution is the d = 1, kd = 1 case.
//
// The *_reference functions are direct serial loops and define correctness.
// conv_forward / conv_backward lower each sample to im2col + GEMM and run
// samples in parallel with OpenMP. Weight gradients are reduced over a fixed
// chunking of the batch, so results do not depend on the thread count.

#pragma once

#include <cstddef>

namespace emev::nn {

struct ConvGeometry {
  std::size_t d = 1, h = 1, w = 1;
  std::size_t cin = 1, cout = 1;
  std::size_t kd = 1, kh = 3, kw = 3;

  std::size_t positions() const { return d * h * w; }
  std::size_t kernel_volume() const { return kd * kh * kw; }
  std::size_t weight_count() const { return kernel_volume() * cin * cout; }
  std::size_t input_stride() const { return positions() * cin; }
  std::size_t output_stride() const { return positions() * cout; }
};

template <typename T>
void conv_forward_reference(const ConvGeometry& g, std::size_t batch, const T* in, const T* weights, const T* bias,
                            T* out);

/// Accumulates into grad_weights / grad_bias; overwrites grad_in.
template <typename T>
void conv_backward_reference(const ConvGeometry& g, std::size_t batch, const T* in, const T* weights,
                             const T* grad_out, T* grad_in, T* grad_weights, T* grad_bias);

template <typename T>
void conv_forward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weights, const T* bias, T* out);

/// Same contract as conv_backward_reference. grad_in may be null.
template <typename T>
void conv_backward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weights, const T* grad_out,
                   T* grad_in, T* grad_weights, T* grad_bias);

} // namespace emev::nn
