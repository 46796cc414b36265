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

#include "emev/nn/spec.hpp"

#include "emev/errors.hpp"

namespace emev::nn {

std::string to_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

const char* to_string(LayerKind k) {
  switch (k) {
  case LayerKind::conv3d: return "conv3d";
  case LayerKind::conv2d: return "conv2d";
  case LayerKind::dense: return "dense";
  case LayerKind::leaky_relu: return "leaky_relu";
  case LayerKind::relu: return "relu";
  case LayerKind::softmax: return "softmax";
  case LayerKind::flatten: return "flatten";
  case LayerKind::concat: return "concat";
  }
  return "?";
}

const char* to_string(Arch a) { return a == Arch::emev_idnet ? "emev" : "csi"; }

Arch arch_from_string(const std::string& s) {
  if (s == "emev" || s == "emev_idnet") return Arch::emev_idnet;
  if (s == "csi" || s == "csi_idnet") return Arch::csi_idnet;
  throw DomainError("unknown architecture '" + s + "' (expected emev or csi)");
}

namespace {

LayerSpec conv(LayerKind kind, std::size_t filters) {
  return LayerSpec{kind, filters, 3, Activation::leaky_relu, {}, {}};
}

LayerSpec dense(std::size_t units, Activation act) { return LayerSpec{LayerKind::dense, units, 0, act, {}, {}}; }

std::vector<LayerSpec> conv_branch(LayerKind kind) {
  return {conv(kind, 16), conv(kind, 32), conv(kind, 16), LayerSpec{LayerKind::flatten, 0, 0, Activation::none, {}, {}}};
}

std::size_t kernel_volume(const LayerSpec& l) {
  return l.kind == LayerKind::conv3d ? l.kernel * l.kernel * l.kernel : l.kernel * l.kernel;
}

} // namespace

std::vector<LayerSpec> head_spec(std::size_t input_len) {
  std::vector<LayerSpec> head = {dense(128, Activation::relu), dense(32, Activation::relu),
                                 dense(kNumClasses, Activation::softmax)};
  infer_shapes(head, {input_len});
  return head;
}

Shape infer_shapes(std::vector<LayerSpec>& layers, Shape input) {
  for (auto& l : layers) {
    l.input_shape = input;
    switch (l.kind) {
    case LayerKind::conv3d:
    case LayerKind::conv2d: {
      const std::size_t rank = l.kind == LayerKind::conv3d ? 4 : 3;
      if (input.size() != rank)
        throw ShapeError(std::string(to_string(l.kind)) + " expects rank-" + std::to_string(rank) + " input, got " +
                         to_string(input));
      if (l.units == 0 || l.kernel == 0 || l.kernel % 2 == 0)
        throw ShapeError("convolution needs filters and an odd kernel");
      input.back() = l.units;
      break;
    }
    case LayerKind::dense:
      if (input.size() != 1) throw ShapeError("dense expects a flat input, got " + to_string(input));
      if (l.units == 0) throw ShapeError("dense needs at least one unit");
      input = {l.units};
      break;
    case LayerKind::flatten:
    case LayerKind::concat:
      input = {volume(input)};
      break;
    case LayerKind::leaky_relu:
    case LayerKind::relu:
    case LayerKind::softmax:
      break;
    }
    l.output_shape = input;
  }
  return input;
}

ModelSpec emev_idnet_spec(std::size_t n_rb, std::size_t n_r, std::size_t n_t) {
  ModelSpec spec;
  spec.arch = Arch::emev_idnet;
  spec.n_rb = n_rb;
  spec.n_r = n_r;
  spec.n_t = n_t;
  spec.input_u = {n_rb, n_r, n_r, 2};
  spec.input_s = {n_rb, n_r, 1};
  spec.branch_u = conv_branch(LayerKind::conv3d);
  spec.branch_s = conv_branch(LayerKind::conv2d);
  const auto len_u = infer_shapes(spec.branch_u, spec.input_u).front();
  const auto len_s = infer_shapes(spec.branch_s, spec.input_s).front();
  spec.head = {LayerSpec{LayerKind::concat, 0, 0, Activation::none, {}, {}}};
  infer_shapes(spec.head, {len_u + len_s});
  for (auto& l : head_spec(len_u + len_s)) spec.head.push_back(l);
  return spec;
}

ModelSpec csi_idnet_spec(std::size_t n_rb, std::size_t n_r, std::size_t n_t) {
  ModelSpec spec;
  spec.arch = Arch::csi_idnet;
  spec.n_rb = n_rb;
  spec.n_r = n_r;
  spec.n_t = n_t;
  spec.input_u = {n_rb, n_r, n_t, 2};
  spec.branch_u = conv_branch(LayerKind::conv3d);
  const auto len = infer_shapes(spec.branch_u, spec.input_u).front();
  spec.head = head_spec(len);
  return spec;
}

ModelSpec make_spec(Arch arch, std::size_t n_rb, std::size_t n_r, std::size_t n_t) {
  return arch == Arch::emev_idnet ? emev_idnet_spec(n_rb, n_r, n_t) : csi_idnet_spec(n_rb, n_r, n_t);
}

std::size_t layer_params(const LayerSpec& l) {
  switch (l.kind) {
  case LayerKind::conv3d:
  case LayerKind::conv2d:
    return l.units * kernel_volume(l) * l.input_shape.back() + l.units;
  case LayerKind::dense:
    return l.input_shape.front() * l.units + l.units;
  default:
    return 0;
  }
}

std::size_t layer_flops(const LayerSpec& l) {
  switch (l.kind) {
  case LayerKind::conv3d:
  case LayerKind::conv2d: {
    const std::size_t positions = volume(l.output_shape) / l.units;
    return positions * l.units * 2 * kernel_volume(l) * l.input_shape.back();
  }
  case LayerKind::dense:
    return 2 * l.input_shape.front() * l.units;
  default:
    return 0;
  }
}

std::size_t count_params(const std::vector<LayerSpec>& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += layer_params(l);
  return n;
}

std::size_t count_params(const ModelSpec& spec) {
  return count_params(spec.branch_u) + count_params(spec.branch_s) + count_params(spec.head);
}

std::size_t count_flops(const std::vector<LayerSpec>& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += layer_flops(l);
  return n;
}

std::size_t count_flops(const ModelSpec& spec) {
  return count_flops(spec.branch_u) + count_flops(spec.branch_s) + count_flops(spec.head);
}

} // namespace emev::nn
