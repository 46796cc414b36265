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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "emev/nn/layers.hpp"
#include "emev/nn/spec.hpp"

namespace emev::nn {

/// Network inputs for a batch. `s` is empty for single-branch models.
template <typename T>
struct Inputs {
  Tensor<T> u;
  Tensor<T> s;
};

/// Runtime network built from a ModelSpec. Outputs class probabilities.
template <typename T>
class Model {
public:
  /// Weights drawn uniform in +-sqrt(6 / fan_in), biases zero.
  Model(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }

  Tensor<T> forward(const Inputs<T>& in);
  /// Backpropagates dL/dprobabilities; parameter gradients accumulate.
  void backward(const Tensor<T>& grad_probs);

  std::vector<Param<T>*> params();
  std::vector<const Param<T>*> params() const;
  void zero_grad();
  std::size_t parameter_count() const;

  /// Switch every convolution to the serial reference kernels.
  void use_reference_kernels(bool on);

private:
  using Stack = std::vector<std::unique_ptr<Layer<T>>>;

  static void build(Stack& stack, const std::vector<LayerSpec>& specs, const std::string& prefix);
  static Tensor<T> run(Stack& stack, Tensor<T> x);
  static Tensor<T> unwind(Stack& stack, Tensor<T> g);

  ModelSpec spec_;
  Stack branch_u_, branch_s_, head_;
  std::size_t len_u_ = 0;
};

/// Categorical cross-entropy -sum y_k log p_k with p clamped to [1e-12, 1].
double cross_entropy_loss(std::span<const double> predicted, std::span<const double> label);

/// Mean cross-entropy over a [batch, classes] probability tensor and the
/// gradient of that mean with respect to the probabilities.
template <typename T>
double batch_loss(const Tensor<T>& probs, std::span<const std::uint8_t> labels, Tensor<T>* grad = nullptr);

/// Adam with bias correction.
template <typename T>
class Adam {
public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  explicit Adam(double learning_rate) : lr_(learning_rate) {}

  void step(const std::vector<Param<T>*>& params);
  std::uint64_t steps() const { return t_; }
  double learning_rate() const { return lr_; }

private:
  double lr_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

/// Flat per-sample features in float, as stored on disk.
struct Examples {
  Shape u_shape;
  Shape s_shape; // empty for CSI inputs
  std::vector<float> u;
  std::vector<float> s;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  void append(std::span<const float> u_sample, std::span<const float> s_sample, std::uint8_t label);
  template <typename T>
  Inputs<T> gather(std::span<const std::size_t> idx) const;
  Examples subset(std::span<const std::size_t> idx) const;
};

/// Throws ShapeError when the examples do not fit the model's inputs.
void check_compatible(const ModelSpec& spec, const Examples& data);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 50;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;
  /// Stop once validation loss has not improved by min_delta for `patience`
  /// consecutive epochs.
  int patience = 3;
  double min_delta = 1e-4;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::unique_ptr<Model<float>> model;
  std::vector<EpochRecord> history;
  bool converged = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const ModelSpec& spec, const Examples& train_set, const Examples& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// One optimization step on a batch; returns the batch loss.
template <typename T>
double train_step(Model<T>& model, Adam<T>& opt, const Inputs<T>& in, std::span<const std::uint8_t> labels,
                  std::size_t* correct = nullptr);

using Confusion = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  std::size_t samples = 0;
  Confusion confusion{}; // rows: true label, columns: prediction
};

EvalResult evaluate(Model<float>& model, const Examples& data, std::size_t batch_size = 256);

/// Accumulates argmax predictions of a [batch, classes] tensor.
void tally(const Tensor<float>& probs, std::span<const std::uint8_t> labels, Confusion& confusion);

/// Median wall-clock seconds of single-sample forward passes.
double inference_latency(Model<float>& model, const Examples& data, std::size_t sample, int repetitions);

/// Checkpoint layout is documented in docs/formats.md.
void save_checkpoint(const Model<float>& model, const std::filesystem::path& path);
std::unique_ptr<Model<float>> load_checkpoint(const std::filesystem::path& path);
std::size_t checkpoint_size(const ModelSpec& spec);

} // namespace emev::nn
