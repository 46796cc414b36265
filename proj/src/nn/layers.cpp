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

#include "emev/nn/layers.hpp"

#include <Eigen/Core>
#include <cmath>

#include "emev/errors.hpp"

namespace emev::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

[[noreturn]] void missing_cache(const char* layer) {
  throw std::logic_error(std::string(layer) + ": backward called without a cached forward pass");
}

void check_grad_shape(const Shape& expected, const Shape& got, const char* layer) {
  if (expected != got)
    throw ShapeError(std::string(layer) + ": upstream gradient " + to_string(got) + " vs output " +
                     to_string(expected));
}

} // namespace

template <typename T>
ConvLayer<T>::ConvLayer(const LayerSpec& spec, const std::string& name) {
  const auto& in = spec.input_shape;
  if (spec.kind == LayerKind::conv3d) {
    if (in.size() != 4) throw ShapeError("conv3d layer needs a rank-4 input shape");
    geom_ = ConvGeometry{in[0], in[1], in[2], in[3], spec.units, spec.kernel, spec.kernel, spec.kernel};
  } else if (spec.kind == LayerKind::conv2d) {
    if (in.size() != 3) throw ShapeError("conv2d layer needs a rank-3 input shape");
    geom_ = ConvGeometry{1, in[0], in[1], in[2], spec.units, 1, spec.kernel, spec.kernel};
  } else {
    throw ShapeError("ConvLayer built from a non-convolution spec");
  }
  out_shape_ = in;
  out_shape_.back() = spec.units;
  const auto group = spec.kind == LayerKind::conv3d ? ParamGroup::conv3d : ParamGroup::conv2d;
  weight_ = Param<T>{name + ".weight", group,
                     Tensor<T>({geom_.kernel_volume(), geom_.cin, geom_.cout}),
                     Tensor<T>({geom_.kernel_volume(), geom_.cin, geom_.cout})};
  bias_ = Param<T>{name + ".bias", group, Tensor<T>({geom_.cout}), Tensor<T>({geom_.cout})};
}

template <typename T>
Tensor<T> ConvLayer<T>::forward(const Tensor<T>& in) {
  if (in.stride() != geom_.input_stride())
    throw ShapeError("conv: input " + to_string(in.shape) + " does not match layer geometry");
  input_ = in;
  has_input_ = true;
  Shape shape{in.batch()};
  shape.insert(shape.end(), out_shape_.begin(), out_shape_.end());
  Tensor<T> out(shape);
  if (reference_)
    conv_forward_reference(geom_, in.batch(), in.ptr(), weight_.value.ptr(), bias_.value.ptr(), out.ptr());
  else
    conv_forward(geom_, in.batch(), in.ptr(), weight_.value.ptr(), bias_.value.ptr(), out.ptr());
  return out;
}

template <typename T>
Tensor<T> ConvLayer<T>::backward(const Tensor<T>& grad_out) {
  if (!has_input_) missing_cache("conv");
  if (grad_out.batch() != input_.batch() || grad_out.stride() != geom_.output_stride())
    throw ShapeError("conv: upstream gradient shape " + to_string(grad_out.shape));
  Tensor<T> grad_in(input_.shape);
  if (reference_)
    conv_backward_reference(geom_, input_.batch(), input_.ptr(), weight_.value.ptr(), grad_out.ptr(), grad_in.ptr(),
                            weight_.grad.ptr(), bias_.grad.ptr());
  else
    conv_backward(geom_, input_.batch(), input_.ptr(), weight_.value.ptr(), grad_out.ptr(), grad_in.ptr(),
                  weight_.grad.ptr(), bias_.grad.ptr());
  return grad_in;
}

template <typename T>
DenseLayer<T>::DenseLayer(std::size_t in, std::size_t out, const std::string& name) : in_(in), out_(out) {
  weight_ = Param<T>{name + ".weight", ParamGroup::dense, Tensor<T>({in, out}), Tensor<T>({in, out})};
  bias_ = Param<T>{name + ".bias", ParamGroup::dense, Tensor<T>({out}), Tensor<T>({out})};
}

template <typename T>
Tensor<T> DenseLayer<T>::forward(const Tensor<T>& in) {
  if (in.stride() != in_) throw ShapeError("dense: expected " + std::to_string(in_) + " inputs, got " + to_string(in.shape));
  input_ = in;
  has_input_ = true;
  const auto B = static_cast<Eigen::Index>(in.batch());
  Tensor<T> out({in.batch(), out_});
  Eigen::Map<const RowMat<T>> X(in.ptr(), B, static_cast<Eigen::Index>(in_));
  Eigen::Map<const RowMat<T>> W(weight_.value.ptr(), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(out_));
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.value.ptr(), static_cast<Eigen::Index>(out_));
  Eigen::Map<RowMat<T>> Y(out.ptr(), B, static_cast<Eigen::Index>(out_));
  Y.noalias() = X * W;
  Y.rowwise() += b;
  return out;
}

template <typename T>
Tensor<T> DenseLayer<T>::backward(const Tensor<T>& grad_out) {
  if (!has_input_) missing_cache("dense");
  check_grad_shape(Shape{input_.batch(), out_}, grad_out.shape, "dense");
  const auto B = static_cast<Eigen::Index>(input_.batch());
  const auto I = static_cast<Eigen::Index>(in_), O = static_cast<Eigen::Index>(out_);
  Eigen::Map<const RowMat<T>> X(input_.ptr(), B, I);
  Eigen::Map<const RowMat<T>> DY(grad_out.ptr(), B, O);
  Eigen::Map<const RowMat<T>> W(weight_.value.ptr(), I, O);
  Eigen::Map<RowMat<T>>(weight_.grad.ptr(), I, O).noalias() += X.transpose() * DY;
  for (std::size_t n = 0; n < input_.batch(); ++n)
    for (std::size_t o = 0; o < out_; ++o) bias_.grad.data[o] += grad_out.data[n * out_ + o];
  Tensor<T> grad_in(input_.shape);
  Eigen::Map<RowMat<T>>(grad_in.ptr(), B, I).noalias() = DY * W.transpose();
  return grad_in;
}

template <typename T>
Tensor<T> LeakyReluLayer<T>::forward(const Tensor<T>& in) {
  input_ = in;
  has_input_ = true;
  Tensor<T> out = in;
  for (auto& v : out.data) v = v < T{0} ? slope_ * v : v;
  return out;
}

template <typename T>
Tensor<T> LeakyReluLayer<T>::backward(const Tensor<T>& grad_out) {
  if (!has_input_) missing_cache("leaky_relu");
  check_grad_shape(input_.shape, grad_out.shape, "leaky_relu");
  Tensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(input_.data[i] > T{0})) g.data[i] *= slope_;
  return g;
}

template <typename T>
Tensor<T> ReluLayer<T>::forward(const Tensor<T>& in) {
  input_ = in;
  has_input_ = true;
  Tensor<T> out = in;
  for (auto& v : out.data) v = v < T{0} ? T{0} : v;
  return out;
}

template <typename T>
Tensor<T> ReluLayer<T>::backward(const Tensor<T>& grad_out) {
  if (!has_input_) missing_cache("relu");
  check_grad_shape(input_.shape, grad_out.shape, "relu");
  Tensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(input_.data[i] > T{0})) g.data[i] = T{0};
  return g;
}

template <typename T>
Tensor<T> SoftmaxLayer<T>::forward(const Tensor<T>& in) {
  if (in.shape.size() != 2) throw ShapeError("softmax expects [batch, classes]");
  Tensor<T> out = in;
  const std::size_t k = in.shape[1];
  for (std::size_t n = 0; n < in.batch(); ++n) {
    T* row = out.ptr() + n * k;
    const T mx = *std::max_element(row, row + k);
    T sum{0};
    for (std::size_t i = 0; i < k; ++i) {
      row[i] = std::exp(row[i] - mx);
      sum += row[i];
    }
    for (std::size_t i = 0; i < k; ++i) row[i] /= sum;
  }
  output_ = out;
  has_output_ = true;
  return out;
}

template <typename T>
Tensor<T> SoftmaxLayer<T>::backward(const Tensor<T>& grad_out) {
  if (!has_output_) missing_cache("softmax");
  check_grad_shape(output_.shape, grad_out.shape, "softmax");
  Tensor<T> g(output_.shape);
  const std::size_t k = output_.shape[1];
  for (std::size_t n = 0; n < output_.batch(); ++n) {
    const T* y = output_.ptr() + n * k;
    const T* v = grad_out.ptr() + n * k;
    T dot{0};
    for (std::size_t i = 0; i < k; ++i) dot += v[i] * y[i];
    for (std::size_t i = 0; i < k; ++i) g.data[n * k + i] = y[i] * (v[i] - dot);
  }
  return g;
}

template <typename T>
Tensor<T> FlattenLayer<T>::forward(const Tensor<T>& in) {
  in_shape_ = in.shape;
  has_input_ = true;
  Tensor<T> out;
  out.shape = {in.batch(), in.stride()};
  out.data = in.data;
  return out;
}

template <typename T>
Tensor<T> FlattenLayer<T>::backward(const Tensor<T>& grad_out) {
  if (!has_input_) missing_cache("flatten");
  Tensor<T> g;
  g.shape = in_shape_;
  g.data = grad_out.data;
  if (g.data.size() != volume(g.shape)) throw ShapeError("flatten: upstream gradient size mismatch");
  return g;
}

#define EMEV_INSTANTIATE(T)           \
  template class ConvLayer<T>;        \
  template class DenseLayer<T>;       \
  template class LeakyReluLayer<T>;   \
  template class ReluLayer<T>;        \
  template class SoftmaxLayer<T>;     \
  template class FlattenLayer<T>;

EMEV_INSTANTIATE(float)
EMEV_INSTANTIATE(double)
EMEV_INSTANTIATE(long double)
#undef EMEV_INSTANTIATE

} // namespace emev::nn
