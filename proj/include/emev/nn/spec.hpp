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

// Layer tables for the two identification networks and the overhead counters.
//
// Conventions: convolutions use stride 1 and same padding; Conv3D kernels are
// 3x3x3 and Conv2D kernels 3x3; parameter counts include biases; one
// multiply-accumulate counts as 2 FLOPs and bias/activation work is ignored.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emev/nn/tensor.hpp"

namespace emev::nn {

enum class LayerKind : std::uint8_t {
  conv3d = 0,
  conv2d = 1,
  dense = 2,
  leaky_relu = 3,
  relu = 4,
  softmax = 5,
  flatten = 6,
  concat = 7,
};

enum class Activation : std::uint8_t { none = 0, leaky_relu = 1, relu = 2, softmax = 3 };

enum class Arch : std::uint8_t { emev_idnet = 0, csi_idnet = 1 };

inline constexpr double kLeakySlope = 0.01;
inline constexpr std::size_t kNumClasses = 5;

const char* to_string(LayerKind k);
const char* to_string(Arch a);
Arch arch_from_string(const std::string& s);

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t units = 0;  // filters for convolutions
  std::size_t kernel = 0; // per-axis extent for convolutions
  Activation activation = Activation::none;
  Shape input_shape;  // per sample, channels last
  Shape output_shape;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Two optional input branches feeding a shared head. The head's first entry
/// is a concat (EMEV) or takes the flattened single branch (CSI).
struct ModelSpec {
  Arch arch = Arch::emev_idnet;
  std::size_t n_rb = 13;
  std::size_t n_r = 4;
  std::size_t n_t = 64;
  Shape input_u; // U (n_rb, n_r, n_r, 2) or H (n_rb, n_r, n_t, 2)
  Shape input_s; // S (n_rb, n_r, 1); empty for csi_idnet
  std::vector<LayerSpec> branch_u;
  std::vector<LayerSpec> branch_s;
  std::vector<LayerSpec> head;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

ModelSpec emev_idnet_spec(std::size_t n_rb = 13, std::size_t n_r = 4, std::size_t n_t = 64);
ModelSpec csi_idnet_spec(std::size_t n_rb = 13, std::size_t n_r = 4, std::size_t n_t = 64);
ModelSpec make_spec(Arch arch, std::size_t n_rb, std::size_t n_r, std::size_t n_t);

/// Dense(128, ReLU) -> Dense(32, ReLU) -> Dense(5, Softmax) on a flat input.
std::vector<LayerSpec> head_spec(std::size_t input_len);

/// Fills input/output shapes along a chain starting at `input`; throws
/// ShapeError when a layer cannot accept its input.
Shape infer_shapes(std::vector<LayerSpec>& layers, Shape input);

std::size_t layer_params(const LayerSpec& l);
std::size_t layer_flops(const LayerSpec& l);

std::size_t count_params(const std::vector<LayerSpec>& layers);
std::size_t count_params(const ModelSpec& spec);
std::size_t count_flops(const std::vector<LayerSpec>& layers);
std::size_t count_flops(const ModelSpec& spec);

} // namespace emev::nn
