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

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>

#include "emev/errors.hpp"
#include "emev/nn/model.hpp"
#include "emev/rng.hpp"

namespace emev::nn {

namespace {

std::size_t argmax(const float* p, std::size_t k) {
  return static_cast<std::size_t>(std::max_element(p, p + k) - p);
}

template <typename T>
std::size_t count_correct(const Tensor<T>& probs, std::span<const std::uint8_t> labels) {
  std::size_t hit = 0;
  const std::size_t K = probs.stride();
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const T* p = probs.ptr() + n * K;
    if (static_cast<std::size_t>(std::max_element(p, p + K) - p) == labels[n]) ++hit;
  }
  return hit;
}

} // namespace

template <typename T>
double train_step(Model<T>& model, Adam<T>& opt, const Inputs<T>& in, std::span<const std::uint8_t> labels,
                  std::size_t* correct) {
  model.zero_grad();
  const Tensor<T> probs = model.forward(in);
  Tensor<T> grad;
  const double loss = batch_loss(probs, labels, &grad);
  if (!std::isfinite(loss)) return loss;
  model.backward(grad);
  opt.step(model.params());
  if (correct) *correct += count_correct(probs, labels);
  return loss;
}

template double train_step<float>(Model<float>&, Adam<float>&, const Inputs<float>&, std::span<const std::uint8_t>,
                                  std::size_t*);
template double train_step<double>(Model<double>&, Adam<double>&, const Inputs<double>&,
                                   std::span<const std::uint8_t>, std::size_t*);

TrainResult train(const ModelSpec& spec, const Examples& train_set, const Examples& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  if (!(cfg.learning_rate > 0.0)) throw DomainError("learning rate must be positive");
  if (cfg.epochs < 1) throw DomainError("epochs must be at least 1");
  if (cfg.batch_size == 0) throw DomainError("batch size must be positive");
  if (train_set.size() == 0) throw DomainError("training set is empty");
  check_compatible(spec, train_set);
  if (val_set.size()) check_compatible(spec, val_set);

  TrainResult result;
  result.model = std::make_unique<Model<float>>(spec, cfg.seed);
  Adam<float> opt(cfg.learning_rate);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order.begin(), order.end());

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const auto idx = std::span<const std::size_t>(order).subspan(b, std::min(cfg.batch_size, order.size() - b));
      const auto in = train_set.gather<float>(idx);
      std::vector<std::uint8_t> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = train_set.labels[idx[i]];
      const double loss = train_step(*result.model, opt, in, labels, &correct);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", batch " << b / cfg.batch_size << " (step "
            << opt.steps() + 1 << ", lr " << cfg.learning_rate << ")";
        throw NumericError(msg.str());
      }
      loss_sum += loss * static_cast<double>(idx.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    if (val_set.size()) {
      const auto ev = evaluate(*result.model, val_set);
      rec.val_loss = ev.loss;
      rec.val_accuracy = ev.accuracy;
    } else {
      rec.val_loss = rec.train_loss;
      rec.val_accuracy = rec.train_accuracy;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_loss < best - cfg.min_delta) {
      best = rec.val_loss;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      result.converged = true;
      break;
    }
  }
  return result;
}

void tally(const Tensor<float>& probs, std::span<const std::uint8_t> labels, Confusion& confusion) {
  const std::size_t K = probs.stride();
  if (probs.batch() != labels.size() || K != kNumClasses) throw ShapeError("tally: probabilities do not match labels");
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] >= kNumClasses) throw DomainError("tally: label out of range");
    ++confusion[labels[n]][argmax(probs.ptr() + n * K, K)];
  }
}

EvalResult evaluate(Model<float>& model, const Examples& data, std::size_t batch_size) {
  if (data.size() == 0) throw DomainError("evaluate: empty dataset");
  if (batch_size == 0) throw DomainError("evaluate: batch size must be positive");
  check_compatible(model.spec(), data);
  EvalResult r;
  r.samples = data.size();
  std::vector<std::size_t> idx;
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < data.size(); b += batch_size) {
    const std::size_t n = std::min(batch_size, data.size() - b);
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), b);
    const auto probs = model.forward(data.gather<float>(idx));
    const auto labels = std::span<const std::uint8_t>(data.labels).subspan(b, n);
    loss_sum += batch_loss(probs, labels) * static_cast<double>(n);
    tally(probs, labels, r.confusion);
  }
  std::size_t hit = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) hit += r.confusion[k][k];
  r.accuracy = static_cast<double>(hit) / static_cast<double>(r.samples);
  r.loss = loss_sum / static_cast<double>(r.samples);
  return r;
}

double inference_latency(Model<float>& model, const Examples& data, std::size_t sample, int repetitions) {
  if (repetitions < 1) throw DomainError("inference_latency: repetitions must be at least 1");
  if (sample >= data.size()) throw DomainError("inference_latency: sample index out of range");
  const std::size_t idx[1] = {sample};
  const auto in = data.gather<float>(idx);
  model.forward(in); // warm caches and allocator
  std::vector<double> t(static_cast<std::size_t>(repetitions));
  for (auto& x : t) {
    const auto t0 = std::chrono::steady_clock::now();
    model.forward(in);
    x = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  auto mid = t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2);
  std::nth_element(t.begin(), mid, t.end());
  return *mid;
}

} // namespace emev::nn
