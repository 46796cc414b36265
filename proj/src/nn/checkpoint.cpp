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

#include <bit>
#include <cstring>
#include <fstream>

#include "emev/errors.hpp"
#include "emev/nn/model.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace emev::nn {

namespace {

constexpr char kMagic[8] = {'E', 'M', 'E', 'V', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

struct Row {
  std::uint32_t section, kind, units, kernel, activation;
  friend bool operator==(const Row&, const Row&) = default;
};

std::vector<Row> layer_table(const ModelSpec& spec) {
  std::vector<Row> rows;
  const std::vector<LayerSpec>* sections[] = {&spec.branch_u, &spec.branch_s, &spec.head};
  for (std::uint32_t s = 0; s < 3; ++s)
    for (const auto& l : *sections[s])
      rows.push_back({s, static_cast<std::uint32_t>(l.kind), static_cast<std::uint32_t>(l.units),
                      static_cast<std::uint32_t>(l.kernel), static_cast<std::uint32_t>(l.activation)});
  return rows;
}

template <typename V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename V>
V get(std::istream& is, const std::filesystem::path& path) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw LoadError("truncated checkpoint: " + path.string());
  return v;
}

std::size_t header_size(const ModelSpec& spec) {
  return sizeof kMagic + 6 * sizeof(std::uint32_t) + layer_table(spec).size() * sizeof(Row) + sizeof(std::uint64_t);
}

} // namespace

std::size_t checkpoint_size(const ModelSpec& spec) { return header_size(spec) + count_params(spec) * sizeof(float); }

void save_checkpoint(const Model<float>& model, const std::filesystem::path& path) {
  const auto& spec = model.spec();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint: " + tmp.string());
    os.write(kMagic, sizeof kMagic);
    put(os, kVersion);
    put(os, static_cast<std::uint32_t>(spec.arch));
    put(os, static_cast<std::uint32_t>(spec.n_rb));
    put(os, static_cast<std::uint32_t>(spec.n_r));
    put(os, static_cast<std::uint32_t>(spec.n_t));
    const auto rows = layer_table(spec);
    put(os, static_cast<std::uint32_t>(rows.size()));
    for (const auto& r : rows) {
      put(os, r.section);
      put(os, r.kind);
      put(os, r.units);
      put(os, r.kernel);
      put(os, r.activation);
    }
    put(os, static_cast<std::uint64_t>(model.parameter_count()));
    for (const auto* p : model.params())
      os.write(reinterpret_cast<const char*>(p->value.ptr()), static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    if (!os.flush()) throw IoError("failed writing checkpoint: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + path.string() + ": " + ec.message());
}

std::unique_ptr<Model<float>> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint: " + path.string());
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw LoadError("not a checkpoint file: " + path.string());
  const auto version = get<std::uint32_t>(is, path);
  if (version != kVersion)
    throw LoadError("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
  const auto arch = get<std::uint32_t>(is, path);
  if (arch > 1) throw LoadError("unknown architecture id in checkpoint: " + path.string());
  const auto n_rb = get<std::uint32_t>(is, path);
  const auto n_r = get<std::uint32_t>(is, path);
  const auto n_t = get<std::uint32_t>(is, path);
  if (!n_rb || !n_r || !n_t) throw LoadError("zero dimension in checkpoint: " + path.string());
  const ModelSpec spec = make_spec(static_cast<Arch>(arch), n_rb, n_r, n_t);

  const auto n_layers = get<std::uint32_t>(is, path);
  const auto expected = layer_table(spec);
  if (n_layers != expected.size()) throw LoadError("layer table does not match architecture: " + path.string());
  for (const auto& want : expected) {
    Row r;
    r.section = get<std::uint32_t>(is, path);
    r.kind = get<std::uint32_t>(is, path);
    r.units = get<std::uint32_t>(is, path);
    r.kernel = get<std::uint32_t>(is, path);
    r.activation = get<std::uint32_t>(is, path);
    if (!(r == want)) throw LoadError("layer table does not match architecture: " + path.string());
  }
  const auto count = get<std::uint64_t>(is, path);
  if (count != count_params(spec)) throw LoadError("parameter count mismatch in checkpoint: " + path.string());

  auto model = std::make_unique<Model<float>>(spec, 0);
  for (auto* p : model->params())
    if (!is.read(reinterpret_cast<char*>(p->value.ptr()), static_cast<std::streamsize>(p->value.size() * sizeof(float))))
      throw LoadError("truncated checkpoint: " + path.string());
  if (is.peek() != std::char_traits<char>::eof()) throw LoadError("trailing bytes in checkpoint: " + path.string());
  return model;
}

} // namespace emev::nn
