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

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace emev::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t volume(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& s);

/// Dense row-major tensor. The leading dimension is the batch wherever a
/// layer consumes one.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T{0}) : shape(std::move(s)), data(volume(shape), fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t batch() const noexcept { return shape.empty() ? 0 : shape.front(); }
  /// Elements per leading-dimension entry.
  std::size_t stride() const noexcept { return shape.empty() || shape.front() == 0 ? 0 : data.size() / shape.front(); }

  T* ptr() noexcept { return data.data(); }
  const T* ptr() const noexcept { return data.data(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

} // namespace emev::nn
