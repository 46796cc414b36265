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

// Parallel im2col/GEMM convolution kernels against the serial reference loops,
// on the layer shapes of both networks.

#include <benchmark/benchmark.h>

#include <vector>

#include "emev/nn/kernels.hpp"
#include "emev/rng.hpp"

using namespace emev::nn;

namespace {

struct Case {
  const char* name;
  ConvGeometry g;
};

// EMEV U branch, EMEV S branch, CSI branch (second layer of each).
const Case kCases[] = {
    {"emev_u", {13, 4, 4, 16, 32, 3, 3, 3}},
    {"emev_s", {1, 13, 4, 16, 32, 1, 3, 3}},
    {"csi", {13, 4, 64, 16, 32, 3, 3, 3}},
};

struct Buffers {
  std::vector<float> in, w, b, out, go, gi, gw, gb;
  Buffers(const ConvGeometry& g, std::size_t batch)
      : in(batch * g.input_stride()), w(g.weight_count()), b(g.cout), out(batch * g.output_stride()),
        go(batch * g.output_stride()), gi(in.size()), gw(w.size()), gb(b.size()) {
    emev::Rng rng(1);
    for (auto* v : {&in, &w, &b, &go})
      for (auto& x : *v) x = static_cast<float>(rng.normal());
  }
};

template <bool Reference>
void forward(benchmark::State& state) {
  const auto& c = kCases[state.range(0)];
  const auto batch = static_cast<std::size_t>(state.range(1));
  Buffers buf(c.g, batch);
  for (auto _ : state) {
    if constexpr (Reference)
      conv_forward_reference(c.g, batch, buf.in.data(), buf.w.data(), buf.b.data(), buf.out.data());
    else
      conv_forward(c.g, batch, buf.in.data(), buf.w.data(), buf.b.data(), buf.out.data());
    benchmark::DoNotOptimize(buf.out.data());
  }
  state.SetLabel(c.name);
  state.counters["MFLOP/s"] = benchmark::Counter(
      2.0 * c.g.positions() * c.g.kernel_volume() * c.g.cin * c.g.cout * batch * 1e-6, benchmark::Counter::kIsIterationInvariantRate);
}

template <bool Reference>
void backward(benchmark::State& state) {
  const auto& c = kCases[state.range(0)];
  const auto batch = static_cast<std::size_t>(state.range(1));
  Buffers buf(c.g, batch);
  for (auto _ : state) {
    std::fill(buf.gw.begin(), buf.gw.end(), 0.f);
    std::fill(buf.gb.begin(), buf.gb.end(), 0.f);
    if constexpr (Reference)
      conv_backward_reference(c.g, batch, buf.in.data(), buf.w.data(), buf.go.data(), buf.gi.data(), buf.gw.data(),
                              buf.gb.data());
    else
      conv_backward(c.g, batch, buf.in.data(), buf.w.data(), buf.go.data(), buf.gi.data(), buf.gw.data(),
                    buf.gb.data());
    benchmark::DoNotOptimize(buf.gw.data());
  }
  state.SetLabel(c.name);
}

void shapes(benchmark::internal::Benchmark* b) {
  for (int c = 0; c < 3; ++c) b->Args({c, 16});
  b->Unit(benchmark::kMillisecond);
}

} // namespace

BENCHMARK(forward<false>)->Name("conv_forward/parallel")->Apply(shapes);
BENCHMARK(forward<true>)->Name("conv_forward/reference")->Apply(shapes);
BENCHMARK(backward<false>)->Name("conv_backward/parallel")->Apply(shapes);
BENCHMARK(backward<true>)->Name("conv_backward/reference")->Apply(shapes);

BENCHMARK_MAIN();
