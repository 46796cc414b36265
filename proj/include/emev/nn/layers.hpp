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

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "emev/nn/kernels.hpp"
#include "emev/nn/spec.hpp"
#include "emev/nn/tensor.hpp"

namespace emev::nn {

/// Weight groups updated together: U-branch convolutions, S-branch
/// convolutions and the fully connected head.
enum class ParamGroup : std::uint8_t { conv3d = 0, conv2d = 1, dense = 2 };

template <typename T>
struct Param {
  std::string name;
  ParamGroup group = ParamGroup::dense;
  Tensor<T> value;
  Tensor<T> grad;
};

/// A layer processes a whole batch; tensors carry the batch as dimension 0.
/// backward() must follow the matching forward() and accumulates parameter
/// gradients.
template <typename T>
class Layer {
public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& in) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual std::vector<Param<T>*> params() { return {}; }
};

template <typename T>
class ConvLayer final : public Layer<T> {
public:
  ConvLayer(const LayerSpec& spec, const std::string& name);
  Tensor<T> forward(const Tensor<T>& in) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
  const ConvGeometry& geometry() const { return geom_; }
  /// Route through the serial reference kernels.
  void set_reference(bool on) { reference_ = on; }

private:
  ConvGeometry geom_;
  Shape out_shape_;
  Param<T> weight_, bias_;
  Tensor<T> input_;
  bool has_input_ = false;
  bool reference_ = false;
};

template <typename T>
class DenseLayer final : public Layer<T> {
public:
  DenseLayer(std::size_t in, std::size_t out, const std::string& name);
  Tensor<T> forward(const Tensor<T>& in) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }

private:
  std::size_t in_, out_;
  Param<T> weight_, bias_;
  Tensor<T> input_;
  bool has_input_ = false;
};

template <typename T>
class LeakyReluLayer final : public Layer<T> {
public:
  explicit LeakyReluLayer(T slope = T(kLeakySlope)) : slope_(slope) {}
  Tensor<T> forward(const Tensor<T>& in) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

private:
  T slope_;
  Tensor<T> input_;
  bool has_input_ = false;
};

template <typename T>
class ReluLayer final : public Layer<T> {
public:
  Tensor<T> forward(const Tensor<T>& in) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

private:
  Tensor<T> input_;
  bool has_input_ = false;
};

/// Row-wise softmax over the last dimension of a [batch, classes] tensor.
template <typename T>
class SoftmaxLayer final : public Layer<T> {
public:
  Tensor<T> forward(const Tensor<T>& in) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

private:
  Tensor<T> output_;
  bool has_output_ = false;
};

template <typename T>
class FlattenLayer final : public Layer<T> {
public:
  Tensor<T> forward(const Tensor<T>& in) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

private:
  Shape in_shape_;
  bool has_input_ = false;
};

} // namespace emev::nn
