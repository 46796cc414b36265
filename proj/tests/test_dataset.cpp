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
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "emev/dataset.hpp"
#include "emev/errors.hpp"
#include "emev/rng.hpp"

using namespace emev;
using namespace emev::data;

namespace {

// Pinned FNV-1a of serialize(generate_dataset(per_class 2, seed 42, emev)).
constexpr std::uint64_t kGoldenEmevSeed42 = 0x0db68527d885e0c0ULL;

ChannelTensor random_tensor(std::uint64_t seed, std::size_t n_rb = 3, std::size_t n_r = 4, std::size_t n_t = 16) {
  ChannelTensor h(n_rb, n_r, n_t);
  Rng rng(seed);
  for (auto& v : h.data()) v = {rng.normal(), rng.normal()};
  return h;
}

GeneratorConfig small_config(std::size_t per_class, std::uint64_t seed) {
  GeneratorConfig cfg;
  cfg.per_class = per_class;
  cfg.master_seed = seed;
  return cfg;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "emev_dataset_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

} // namespace

TEST_CASE("split counts") {
  CHECK(split_counts(10000, {65, 15, 20}) == std::array<std::size_t, 3>{6500, 1500, 2000});
  CHECK(split_counts(2000, {65, 15, 20}) == std::array<std::size_t, 3>{1300, 300, 400});
  CHECK(split_counts(20, {65, 15, 20}) == std::array<std::size_t, 3>{13, 3, 4});
  // 7 -> 4.55 / 1.05 / 1.40: the largest remainder (train) takes the spare sample
  CHECK(split_counts(7, {65, 15, 20}) == std::array<std::size_t, 3>{5, 1, 1});
  for (std::size_t n = 0; n < 300; ++n) {
    const auto c = split_counts(n, {65, 15, 20});
    CHECK(c[0] + c[1] + c[2] == n);
  }
  CHECK_THROWS_AS(split_counts(10, {60, 15, 20}), DomainError);
  CHECK_THROWS_AS(split_counts(10, {85, 15, 0}), DomainError);
}

TEST_CASE("stratified split") {
  std::vector<std::uint8_t> labels;
  for (int c = 0; c < 5; ++c) labels.insert(labels.end(), 20, static_cast<std::uint8_t>(c));
  Rng rng(3);
  rng.shuffle(labels.begin(), labels.end());
  const auto s = stratified_split(labels, {65, 15, 20}, 9);

  std::set<std::size_t> all;
  for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(part->begin(), part->end());
  CHECK(all.size() == labels.size());
  CHECK(s.train.size() + s.val.size() + s.test.size() == labels.size());

  auto per_class = [&](const std::vector<std::size_t>& idx) {
    std::array<std::size_t, 5> n{};
    for (auto i : idx) ++n[labels[i]];
    return n;
  };
  for (auto n : per_class(s.train)) CHECK(n == 13);
  for (auto n : per_class(s.val)) CHECK(n == 3);
  for (auto n : per_class(s.test)) CHECK(n == 4);

  const auto again = stratified_split(labels, {65, 15, 20}, 9);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK(stratified_split(labels, {65, 15, 20}, 10).train != s.train);

  const std::vector<std::uint8_t> tiny = {0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1};
  CHECK_THROWS_AS(stratified_split(tiny, {65, 15, 20}, 1), DomainError);
  const std::vector<std::uint8_t> bad = {7};
  CHECK_THROWS_AS(stratified_split(bad, {65, 15, 20}, 1), DomainError);
}

TEST_CASE("measure_power") {
  CHECK(measure_power(ChannelTensor(2, 2, 2)) == 0.0);
  ChannelTensor unit(2, 3, 4);
  Rng rng(1);
  for (auto& v : unit.data()) v = std::polar(1.0, rng.uniform(0.0, 6.283185307179586));
  CHECK(measure_power(unit) == doctest::Approx(1.0).epsilon(1e-14));

  const auto h = random_tensor(5);
  long double acc = 0.0L;
  for (const auto& v : h.data()) acc += static_cast<long double>(v.real()) * v.real() + static_cast<long double>(v.imag()) * v.imag();
  CHECK(std::abs(measure_power(h) - static_cast<double>(acc / h.size())) <= 1e-12);
  CHECK_THROWS_AS(measure_power(ChannelTensor()), ShapeError);
}

TEST_CASE("add_awgn") {
  const auto h = random_tensor(7);
  CHECK(add_awgn(h, kClean, 1) == h);
  CHECK_THROWS_AS(add_awgn(ChannelTensor(1, 2, 2), 10.0, 1), DomainError);
  CHECK_THROWS_AS(add_awgn(h, std::nan(""), 1), DomainError);
  CHECK(add_awgn(h, 12.0, 4) == add_awgn(h, 12.0, 4));
  CHECK(!(add_awgn(h, 12.0, 4) == add_awgn(h, 12.0, 5)));

  auto empirical_snr = [](const ChannelTensor& clean, const ChannelTensor& noisy) {
    double pn = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) pn += std::norm(noisy.data()[i] - clean.data()[i]);
    return 10.0 * std::log10(measure_power(clean) / (pn / static_cast<double>(clean.size())));
  };
  SUBCASE("one million draws at 16 dB") {
    const auto big = random_tensor(8, 10, 4, 25000);
    CHECK(std::abs(empirical_snr(big, add_awgn(big, 16.0, 99)) - 16.0) <= 0.1);
  }
  SUBCASE("every grid point") {
    const auto mid = random_tensor(9, 13, 4, 2000);
    REQUIRE(mid.size() >= 100000);
    for (double snr : {10.0, 12.0, 14.0, 16.0, 18.0, 20.0})
      CHECK(std::abs(empirical_snr(mid, add_awgn(mid, snr, noise_seed(1, snr))) - snr) <= 0.1);
  }
}

TEST_CASE("sample draws") {
  const auto cfg = small_config(10, 42);
  std::set<double> speeds;
  for (std::size_t i = 0; i < cfg.total(); ++i) {
    const auto d = draw_sample(cfg, i);
    CHECK(static_cast<std::size_t>(d.label) == i / 10);
    CHECK(d.link.delay_spread_s == default_delay_spread(d.label));
    CHECK(d.link.snapshot_time_s >= 0.0);
    CHECK(d.link.snapshot_time_s < 1e-3);
    speeds.insert(std::round(d.link.ue_speed_mps * 3.6 * 10.0) / 10.0);
    CHECK(d.seed == draw_sample(cfg, i).seed);
  }
  CHECK(speeds == std::set<double>{4.8, 24.0, 40.0, 60.0});
  CHECK_THROWS_AS(draw_sample(cfg, cfg.total()), DomainError);
  CHECK(draw_sample(cfg, 3).seed != draw_sample(small_config(10, 43), 3).seed);
}

TEST_CASE("generate_dataset") {
  CHECK_THROWS_AS(generate_dataset(small_config(0, 1), Mode::emev), DomainError);

  const auto one = generate_dataset(small_config(1, 42), Mode::emev);
  REQUIRE(one.size() == 5);
  CHECK(one.examples.labels == std::vector<std::uint8_t>{0, 1, 2, 3, 4});
  CHECK(one.examples.u_shape == nn::Shape{13, 4, 4, 2});
  CHECK(one.examples.s_shape == nn::Shape{13, 4, 1});
  for (float snr : one.snr_db) CHECK(std::isnan(snr));

  SUBCASE("features follow the SVD invariants") {
    for (std::size_t n = 0; n < one.size(); ++n)
      for (std::size_t rb = 0; rb < 13; ++rb) {
        const float* s = one.examples.s.data() + (n * 13 + rb) * 4;
        double total = 0.0;
        for (int i = 0; i < 4; ++i) {
          CHECK(s[i] >= 0.f);
          if (i) CHECK(s[i] <= s[i - 1]);
          total += static_cast<double>(s[i]) * s[i];
        }
        CHECK(total > 0.0);
        const float* u = one.examples.u.data() + (n * 13 + rb) * 32;
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) {
            cdouble dot = 0.0;
            for (int r = 0; r < 4; ++r)
              dot += std::conj(cdouble(u[(r * 4 + a) * 2], u[(r * 4 + a) * 2 + 1])) *
                     cdouble(u[(r * 4 + b) * 2], u[(r * 4 + b) * 2 + 1]);
            CHECK(std::abs(dot - cdouble(a == b ? 1.0 : 0.0)) < 1e-5);
          }
      }
  }
  SUBCASE("csi features are the normalized channel") {
    const auto cfg = small_config(1, 42);
    const auto csi = generate_dataset(cfg, Mode::csi);
    CHECK(csi.examples.u_shape == nn::Shape{13, 4, 64, 2});
    CHECK(csi.examples.s.empty());
    auto h = sample_channel(cfg, load_profiles(cfg.profile_dir), 2);
    normalize_power(h);
    const float* u = csi.examples.u.data() + 2 * 2 * h.size();
    for (std::size_t i = 0; i < h.size(); ++i) {
      CHECK(u[2 * i] == static_cast<float>(h.data()[i].real()));
      CHECK(u[2 * i + 1] == static_cast<float>(h.data()[i].imag()));
    }
  }
  SUBCASE("regeneration is byte-identical") {
    const auto a = generate_dataset(small_config(4, 11), Mode::emev);
    const auto b = generate_dataset(small_config(4, 11), Mode::emev);
    CHECK(serialize(a) == serialize(b));
    const auto c = generate_dataset(small_config(4, 12), Mode::emev);
    CHECK(serialize(a) != serialize(c));
  }
  SUBCASE("subset regeneration matches") {
    const auto cfg = small_config(4, 11);
    const auto full = generate_dataset(cfg, Mode::emev);
    const std::vector<std::size_t> idx = {19, 2, 7};
    CHECK(regenerate_subset(cfg, Mode::emev, idx, kClean) == full.subset(idx));
    const auto noisy = regenerate_subset(cfg, Mode::emev, idx, 10.0);
    CHECK(!(noisy == full.subset(idx)));
    CHECK(noisy.snr_db[0] == 10.f);
    CHECK(noisy.seeds == full.subset(idx).seeds);
    CHECK(regenerate_subset(cfg, Mode::emev, idx, 10.0) == noisy);
  }
  SUBCASE("missing profile directory") {
    auto cfg = small_config(1, 1);
    cfg.profile_dir = "/nonexistent/profiles";
    CHECK_THROWS_AS(generate_dataset(cfg, Mode::emev), LoadError);
  }
}

TEST_CASE("serialization") {
  LinkConfig link;
  SUBCASE("empty dataset is header only") {
    const auto empty = empty_dataset(Mode::csi, link);
    const auto bytes = serialize(empty);
    CHECK(bytes.size() == 8 + 4 * 5 + 8);
    CHECK(deserialize(bytes) == empty);
  }
  SUBCASE("five samples round trip byte for byte") {
    auto d = generate_dataset(small_config(1, 5), Mode::emev);
    d.snr_db[2] = 14.f;
    const auto path = scratch("five.bin");
    write_dataset(d, path);
    const auto back = read_dataset(path);
    CHECK(back == d);
    CHECK(serialize(back) == serialize(d));
    CHECK(file_checksum(path) == fnv1a(serialize(d)));
    CHECK(!std::filesystem::exists(path.string() + ".tmp"));
  }
  SUBCASE("corrupt files") {
    const auto bytes = serialize(generate_dataset(small_config(1, 5), Mode::emev));
    auto cut = bytes;
    cut.resize(cut.size() - 3);
    CHECK_THROWS_AS(deserialize(cut), LoadError);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(deserialize(magic), LoadError);
    auto version = bytes;
    version[8] = 9;
    CHECK_THROWS_AS(deserialize(version), LoadError);
    auto extra = bytes;
    extra.push_back(0);
    CHECK_THROWS_AS(deserialize(extra), LoadError);
    CHECK_THROWS_AS(read_dataset(scratch("absent.bin")), LoadError);
  }
  SUBCASE("golden checksum for master seed 42") {
    const auto d = generate_dataset(small_config(2, 42), Mode::emev);
    MESSAGE("checksum " << hex64(fnv1a(serialize(d))));
    CHECK(fnv1a(serialize(d)) == kGoldenEmevSeed42);
  }
}

TEST_CASE("checksum helpers") {
  const std::vector<std::uint8_t> empty;
  CHECK(fnv1a(empty) == 0xcbf29ce484222325ULL);
  const std::vector<std::uint8_t> a = {'a'};
  CHECK(fnv1a(a) == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("manifest round trip") {
  Manifest m;
  m.generator = small_config(20, 42);
  m.generator.speeds_kmh = {4.8, 60.0};
  m.split_seed = 7;
  std::vector<std::uint8_t> labels;
  for (int c = 0; c < 5; ++c) labels.insert(labels.end(), 20, static_cast<std::uint8_t>(c));
  m.split = stratified_split(labels, m.ratios, m.split_seed);
  m.files.push_back({Mode::emev, "emev.bin", hex64(123)});
  m.profile_checksums = {"a", "b", "c", "d", "e"};

  const auto text = manifest_to_json(m);
  const auto back = manifest_from_json(text);
  CHECK(back.generator.per_class == 20);
  CHECK(back.generator.master_seed == 42);
  CHECK(back.generator.speeds_kmh == m.generator.speeds_kmh);
  CHECK(back.generator.link.carrier_hz == m.generator.link.carrier_hz);
  CHECK(back.generator.link.bs.size() == 64);
  CHECK(back.split.train == m.split.train);
  CHECK(back.split.test == m.split.test);
  CHECK(back.files.size() == 1);
  CHECK(back.files[0].checksum == hex64(123));
  CHECK(back.profile_checksums == m.profile_checksums);
  CHECK(manifest_to_json(back) == text);

  const auto path = scratch("manifest.json");
  write_manifest(m, path);
  CHECK(manifest_to_json(read_manifest(path)) == text);

  CHECK_THROWS_AS(manifest_from_json("{not json"), LoadError);
  CHECK_THROWS_AS(manifest_from_json("{\"format_version\": 1}"), LoadError);
  CHECK_THROWS_AS(read_manifest(scratch("absent.json")), LoadError);
}

TEST_CASE("regeneration from a manifest reproduces the file") {
  Manifest m;
  m.generator = small_config(3, 42);
  const auto d = generate_dataset(m.generator, Mode::emev);
  const auto path = scratch("regen.bin");
  write_dataset(d, path);
  m.files.push_back({Mode::emev, "regen.bin", hex64(file_checksum(path))});
  const auto back = manifest_from_json(manifest_to_json(m));
  const auto again = generate_dataset(back.generator, back.files[0].mode);
  CHECK(hex64(fnv1a(serialize(again))) == back.files[0].checksum);
}
