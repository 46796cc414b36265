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

#include "emev/nn/model.hpp"

#include <algorithm>
#include <cmath>

#include "emev/errors.hpp"
#include "emev/rng.hpp"

namespace emev::nn {

template <typename T>
Model<T>::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  if (spec_.arch == Arch::emev_idnet && spec_.input_s.empty())
    throw ShapeError("emev_idnet spec requires an S input");
  build(branch_u_, spec_.branch_u, "u");
  build(branch_s_, spec_.branch_s, "s");
  build(head_, spec_.head, "head");
  len_u_ = spec_.branch_u.empty() ? volume(spec_.input_u) : volume(spec_.branch_u.back().output_shape);

  Rng rng(seed);
  for (auto* p : params()) {
    if (p->name.ends_with(".bias")) continue;
    const std::size_t fan_in = p->value.size() / p->value.shape.back();
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& w : p->value.data) w = static_cast<T>(rng.uniform(-limit, limit));
  }
}

template <typename T>
void Model<T>::build(Stack& stack, const std::vector<LayerSpec>& specs, const std::string& prefix) {
  int conv_i = 0, dense_i = 0;
  auto add_activation = [&](Activation a) {
    switch (a) {
    case Activation::leaky_relu: stack.push_back(std::make_unique<LeakyReluLayer<T>>()); break;
    case Activation::relu: stack.push_back(std::make_unique<ReluLayer<T>>()); break;
    case Activation::softmax: stack.push_back(std::make_unique<SoftmaxLayer<T>>()); break;
    case Activation::none: break;
    }
  };
  for (const auto& l : specs) {
    switch (l.kind) {
    case LayerKind::conv3d:
    case LayerKind::conv2d:
      stack.push_back(std::make_unique<ConvLayer<T>>(l, prefix + ".conv" + std::to_string(++conv_i)));
      add_activation(l.activation);
      break;
    case LayerKind::dense:
      stack.push_back(
          std::make_unique<DenseLayer<T>>(l.input_shape.front(), l.units, prefix + ".fc" + std::to_string(++dense_i)));
      add_activation(l.activation);
      break;
    case LayerKind::flatten: stack.push_back(std::make_unique<FlattenLayer<T>>()); break;
    case LayerKind::leaky_relu: add_activation(Activation::leaky_relu); break;
    case LayerKind::relu: add_activation(Activation::relu); break;
    case LayerKind::softmax: add_activation(Activation::softmax); break;
    case LayerKind::concat: break; // joined in forward()
    }
  }
}

template <typename T>
Tensor<T> Model<T>::run(Stack& stack, Tensor<T> x) {
  for (auto& l : stack) x = l->forward(x);
  return x;
}

template <typename T>
Tensor<T> Model<T>::unwind(Stack& stack, Tensor<T> g) {
  for (auto it = stack.rbegin(); it != stack.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
Tensor<T> Model<T>::forward(const Inputs<T>& in) {
  auto check = [](const Tensor<T>& t, const Shape& want, const char* what) {
    if (t.shape.size() != want.size() + 1 || !std::equal(want.begin(), want.end(), t.shape.begin() + 1))
      throw ShapeError(std::string("model input ") + what + " has shape " + to_string(t.shape) + ", expected (batch)" +
                       to_string(want));
  };
  check(in.u, spec_.input_u, "u");
  Tensor<T> feat = run(branch_u_, in.u);
  if (spec_.arch == Arch::emev_idnet) {
    check(in.s, spec_.input_s, "s");
    if (in.s.batch() != in.u.batch()) throw ShapeError("model inputs disagree on batch size");
    const Tensor<T> fs = run(branch_s_, in.s);
    const std::size_t B = in.u.batch(), lu = feat.stride(), ls = fs.stride();
    Tensor<T> joined({B, lu + ls});
    for (std::size_t n = 0; n < B; ++n) {
      std::copy_n(feat.ptr() + n * lu, lu, joined.ptr() + n * (lu + ls));
      std::copy_n(fs.ptr() + n * ls, ls, joined.ptr() + n * (lu + ls) + lu);
    }
    feat = std::move(joined);
  }
  return run(head_, std::move(feat));
}

template <typename T>
void Model<T>::backward(const Tensor<T>& grad_probs) {
  Tensor<T> g = unwind(head_, grad_probs);
  if (spec_.arch != Arch::emev_idnet) {
    unwind(branch_u_, std::move(g));
    return;
  }
  const std::size_t B = g.batch(), total = g.stride(), lu = len_u_, ls = total - lu;
  Tensor<T> gu({B, lu}), gs({B, ls});
  for (std::size_t n = 0; n < B; ++n) {
    std::copy_n(g.ptr() + n * total, lu, gu.ptr() + n * lu);
    std::copy_n(g.ptr() + n * total + lu, ls, gs.ptr() + n * ls);
  }
  unwind(branch_u_, std::move(gu));
  unwind(branch_s_, std::move(gs));
}

template <typename T>
std::vector<Param<T>*> Model<T>::params() {
  std::vector<Param<T>*> out;
  for (auto* stack : {&branch_u_, &branch_s_, &head_})
    for (auto& l : *stack)
      for (auto* p : l->params()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<const Param<T>*> Model<T>::params() const {
  auto self = const_cast<Model<T>*>(this)->params();
  return {self.begin(), self.end()};
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto* p : params()) p->grad.fill(T{0});
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : params()) n += p->value.size();
  return n;
}

template <typename T>
void Model<T>::use_reference_kernels(bool on) {
  for (auto* stack : {&branch_u_, &branch_s_, &head_})
    for (auto& l : *stack)
      if (auto* c = dynamic_cast<ConvLayer<T>*>(l.get())) c->set_reference(on);
}

double cross_entropy_loss(std::span<const double> predicted, std::span<const double> label) {
  if (predicted.size() != label.size())
    throw ShapeError("cross_entropy_loss: " + std::to_string(predicted.size()) + " predictions vs " +
                     std::to_string(label.size()) + " label entries");
  double loss = 0.0;
  for (std::size_t k = 0; k < predicted.size(); ++k)
    if (label[k] != 0.0) loss -= label[k] * std::log(std::clamp(predicted[k], 1e-12, 1.0));
  return loss;
}

template <typename T>
double batch_loss(const Tensor<T>& probs, std::span<const std::uint8_t> labels, Tensor<T>* grad) {
  const std::size_t B = probs.batch(), K = probs.stride();
  if (labels.size() != B) throw ShapeError("batch_loss: label count does not match batch");
  if (grad) *grad = Tensor<T>(probs.shape);
  double total = 0.0;
  for (std::size_t n = 0; n < B; ++n) {
    const std::size_t y = labels[n];
    if (y >= K) throw DomainError("batch_loss: label out of range");
    const double p = std::clamp(static_cast<double>(probs.data[n * K + y]), 1e-12, 1.0);
    total -= std::log(p);
    if (grad) grad->data[n * K + y] = static_cast<T>(-1.0 / (p * static_cast<double>(B)));
  }
  return B ? total / static_cast<double>(B) : 0.0;
}

template <typename T>
void Adam<T>::step(const std::vector<Param<T>*>& params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->value.size(), T{0});
      v_.emplace_back(p->value.size(), T{0});
    }
  }
  if (m_.size() != params.size()) throw ShapeError("Adam: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i]->value.data;
    const auto& g = params[i]->grad.data;
    auto& m = m_[i];
    auto& v = v_[i];
    if (m.size() != w.size()) throw ShapeError("Adam: parameter size changed between steps");
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      const double mj = kBeta1 * m[j] + (1.0 - kBeta1) * gj;
      const double vj = kBeta2 * v[j] + (1.0 - kBeta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      w[j] = static_cast<T>(w[j] - lr_ * (mj / c1) / (std::sqrt(vj / c2) + kEpsilon));
    }
  }
}

void Examples::append(std::span<const float> u_sample, std::span<const float> s_sample, std::uint8_t label) {
  if (u_sample.size() != volume(u_shape) || s_sample.size() != (s_shape.empty() ? 0 : volume(s_shape)))
    throw ShapeError("Examples::append: sample does not match declared shapes");
  u.insert(u.end(), u_sample.begin(), u_sample.end());
  s.insert(s.end(), s_sample.begin(), s_sample.end());
  labels.push_back(label);
}

template <typename T>
Inputs<T> Examples::gather(std::span<const std::size_t> idx) const {
  Inputs<T> in;
  Shape su{idx.size()};
  su.insert(su.end(), u_shape.begin(), u_shape.end());
  in.u = Tensor<T>(su);
  const std::size_t vu = volume(u_shape);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(u.begin() + static_cast<std::ptrdiff_t>(idx[i] * vu), vu, in.u.data.begin() + static_cast<std::ptrdiff_t>(i * vu));
  if (!s_shape.empty()) {
    Shape ss{idx.size()};
    ss.insert(ss.end(), s_shape.begin(), s_shape.end());
    in.s = Tensor<T>(ss);
    const std::size_t vs = volume(s_shape);
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy_n(s.begin() + static_cast<std::ptrdiff_t>(idx[i] * vs), vs,
                  in.s.data.begin() + static_cast<std::ptrdiff_t>(i * vs));
  }
  return in;
}

Examples Examples::subset(std::span<const std::size_t> idx) const {
  Examples out;
  out.u_shape = u_shape;
  out.s_shape = s_shape;
  const std::size_t vu = volume(u_shape), vs = s_shape.empty() ? 0 : volume(s_shape);
  for (auto i : idx) {
    if (i >= size()) throw ShapeError("Examples::subset: index out of range");
    out.append(std::span<const float>(u).subspan(i * vu, vu), std::span<const float>(s).subspan(i * vs, vs), labels[i]);
  }
  return out;
}

void check_compatible(const ModelSpec& spec, const Examples& data) {
  if (data.u_shape != spec.input_u || data.s_shape != spec.input_s)
    throw ShapeError("data shapes u" + to_string(data.u_shape) + " s" + to_string(data.s_shape) + " do not match " +
                     to_string(spec.arch) + " inputs u" + to_string(spec.input_u) + " s" + to_string(spec.input_s));
}

template class Model<float>;
template class Model<double>;
template class Model<long double>;
template class Adam<float>;
template class Adam<double>;
template double batch_loss<float>(const Tensor<float>&, std::span<const std::uint8_t>, Tensor<float>*);
template double batch_loss<double>(const Tensor<double>&, std::span<const std::uint8_t>, Tensor<double>*);
template Inputs<float> Examples::gather<float>(std::span<const std::size_t>) const;
template Inputs<double> Examples::gather<double>(std::span<const std::size_t>) const;

} // namespace emev::nn
