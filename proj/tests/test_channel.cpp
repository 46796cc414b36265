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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "emev/channel.hpp"
#include "emev/eigenfeatures.hpp"
#include "emev/errors.hpp"

using namespace emev;

namespace {

constexpr double kPi = std::numbers::pi;

LinkConfig table_link(Profile p) {
  LinkConfig link;
  link.delay_spread_s = default_delay_spread(p);
  return link;
}

} // namespace

TEST_CASE("los_probability") {
  CHECK(los_probability(10.0, 1.5) == 1.0);
  CHECK(los_probability(18.0, 13.0) == 1.0);
  CHECK(los_probability(18.0, 5.0) == 1.0);
  // 18/100 + exp(-100/63) * 0.82 evaluated independently.
  CHECK(los_probability(100.0, 13.0) == doctest::Approx(0.34767083684423117).epsilon(1e-12));
  // Formula branch is continuous at the 18 m boundary when C = 0.
  CHECK(los_probability(18.0 + 1e-9, 10.0) == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(los_probability(-1.0, 1.5), DomainError);
  CHECK_THROWS_AS(los_probability(50.0, 28.5), DomainError);
  CHECK_NOTHROW(los_probability(50.0, 28.0));

  SUBCASE("non-increasing in distance for low UEs") {
    for (double h : {1.5, 10.0, 13.0}) {
      double prev = los_probability(18.0, h);
      for (double d = 19.0; d <= 5000.0; d += 1.0) {
        const double p = los_probability(d, h);
        REQUIRE(p <= prev);
        prev = p;
      }
    }
  }
  SUBCASE("tall UE term raises probability") {
    CHECK(los_probability(100.0, 23.0) > los_probability(100.0, 13.0));
    CHECK(los_probability(100.0, 23.0) <= 1.0);
  }
}

TEST_CASE("load_profile") {
  const auto a = load_profile(Profile::A);
  CHECK_FALSE(a.is_los);
  CHECK(a.clusters.size() == 23);
  CHECK(a.rays_per_cluster == 20);
  CHECK(a.source.find("7.7.1-1") != std::string::npos);

  const auto d = load_profile(Profile::D);
  CHECK(d.is_los);
  CHECK(std::count_if(d.clusters.begin(), d.clusters.end(), [](auto& c) { return c.is_los_ray; }) == 1);
  CHECK(d.k_factor_db == doctest::Approx(13.3));

  for (int i = 0; i < 5; ++i) {
    const auto p = load_profile(profile_from_index(i));
    CHECK(p.is_los == (i >= 3));
    double total = 0.0;
    for (std::size_t c = 0; c < p.clusters.size(); ++c) {
      total += p.clusters[c].power;
      if (c > 0) CHECK(p.clusters[c].delay_normalized >= p.clusters[c - 1].delay_normalized);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    // Delays are rescaled so the profile's RMS delay equals the requested spread.
    CHECK(rms_delay_spread(p, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("deterministic") {
    const auto again = load_profile(Profile::A);
    REQUIRE(again.clusters.size() == a.clusters.size());
    for (std::size_t i = 0; i < a.clusters.size(); ++i) {
      CHECK(again.clusters[i].delay_normalized == a.clusters[i].delay_normalized);
      CHECK(again.clusters[i].power == a.clusters[i].power);
      CHECK(again.clusters[i].aoa_deg == a.clusters[i].aoa_deg);
    }
  }

  SUBCASE("errors carry the path") {
    const auto dir = std::filesystem::temp_directory_path() / "emev_profile_test";
    std::filesystem::create_directories(dir);
    try {
      load_profile(Profile::B, dir / "missing");
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(std::string(e.what()).find("cdl_b.txt") != std::string::npos);
    }
    {
      std::ofstream bad(dir / "cdl_c.txt");
      bad << "profile C\nis_los 0\nspread_deg 1 2 3\ncluster 0 0 0 0 90 90\n";
    }
    CHECK_THROWS_AS(load_profile(Profile::C, dir), LoadError);
    {
      std::ofstream bad(dir / "cdl_d.txt");
      bad << "profile D\nis_los 1\nk_factor_db 5\nspread_deg 1 1 1 1\n"
             "los_ray 0 0 0 0 90 90\ncluster 0 -13 0 0 90 90\n";
    }
    CHECK_THROWS_AS(load_profile(Profile::D, dir), LoadError);
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("steering_vector") {
  const double lambda = 0.01;
  ArrayConfig upa{8, 8};
  const auto broadside = steering_vector(upa, 0.0, kPi / 2, lambda);
  REQUIRE(broadside.size() == 64);
  for (const auto& v : broadside) {
    CHECK(v.real() == doctest::Approx(1.0));
    CHECK(v.imag() == doctest::Approx(0.0));
  }

  const auto single = steering_vector(ArrayConfig{1, 1}, 0.7, 1.1, lambda);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == cdouble(1.0, 0.0));

  const auto endfire = steering_vector(ArrayConfig{1, 2}, kPi / 2, kPi / 2, lambda);
  CHECK(endfire[0].real() == doctest::Approx(1.0));
  CHECK(endfire[1].real() == doctest::Approx(-1.0));
  CHECK(endfire[1].imag() == doctest::Approx(0.0).epsilon(1e-12));

  const auto arbitrary = steering_vector(upa, 0.3, 1.2, lambda);
  for (const auto& v : arbitrary) CHECK(std::abs(v) == doctest::Approx(1.0).epsilon(1e-14));

  // Rotating the array with the wave leaves the response unchanged.
  ArrayConfig turned = upa;
  turned.boresight_azimuth = 0.4;
  const auto rotated = steering_vector(turned, 0.4, kPi / 2, lambda);
  for (const auto& v : rotated) CHECK(std::abs(v - cdouble(1.0, 0.0)) < 1e-12);

  CHECK_THROWS_AS(steering_vector(upa, 0.0, 0.0, 0.0), DomainError);
}

TEST_CASE("rms_delay_spread") {
  CdlProfileSpec single;
  single.clusters = {ClusterParam{0.0, 0.0, 0, 0, 90, 90}};
  CHECK(rms_delay_spread(single, 100e-9) == 0.0);

  const double tau = 37e-9;
  CdlProfileSpec pair;
  pair.clusters = {ClusterParam{0.0, -3.0, 0, 0, 90, 90}, ClusterParam{2.0, -3.0, 0, 0, 90, 90}};
  CHECK(rms_delay_spread(pair, tau) == doctest::Approx(tau).epsilon(1e-12));

  const auto b = load_profile(Profile::B);
  CHECK(rms_delay_spread(b, 634e-9) == doctest::Approx(634e-9).epsilon(1e-9));
}

TEST_CASE("generate_channel") {
  const auto a = load_profile(Profile::A);
  const auto link = table_link(Profile::A);

  const auto r1 = generate_channel(a, link, 1);
  const auto r2 = generate_channel(a, link, 2);
  CHECK(r1.h.n_rb() == 13);
  CHECK(r1.h.n_r() == 4);
  CHECK(r1.h.n_t() == 64);
  CHECK(r1.label == Profile::A);
  CHECK_FALSE(r1.h == r2.h);
  CHECK(generate_channel(a, link, 1).h == r1.h);
  for (const auto& v : r1.h.data()) REQUIRE((std::isfinite(v.real()) && std::isfinite(v.imag())));

  SUBCASE("zero speed is time invariant") {
    const auto d = load_profile(Profile::D);
    auto l0 = table_link(Profile::D);
    l0.ue_speed_mps = 0.0;
    auto l1 = l0;
    l1.snapshot_time_s = 1e-3;
    CHECK(generate_channel(d, l0, 99).h == generate_channel(d, l1, 99).h);
  }

  SUBCASE("nonzero speed varies with time") {
    auto l0 = link;
    l0.ue_speed_mps = 60.0 / 3.6;
    auto l1 = l0;
    l1.snapshot_time_s = 0.5e-3;
    CHECK_FALSE(generate_channel(a, l0, 3).h == generate_channel(a, l1, 3).h);
  }

  SUBCASE("realized delay spread tracks the requested spread") {
    double acc = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) acc += realized_delay_spread(synthesize_taps(a, link, s));
    CHECK(acc / 100.0 == doctest::Approx(129e-9).epsilon(0.2));
  }

  SUBCASE("unit mean power") {
    double acc = 0.0;
    std::size_t n = 0;
    for (int p = 0; p < 5; ++p) {
      const auto prof = load_profile(profile_from_index(p));
      const auto l = table_link(prof.id);
      for (std::uint64_t s = 0; s < 200; ++s) {
        for (const auto& v : generate_channel(prof, l, s).h.data()) acc += std::norm(v);
        n += 13 * 4 * 64;
      }
    }
    const double mean = acc / static_cast<double>(n);
    CHECK(mean >= 0.9);
    CHECK(mean <= 1.1);
  }

  SUBCASE("LOS profiles concentrate energy in the first eigenmode") {
    auto dominance = [](Profile p) {
      const auto prof = load_profile(p);
      const auto l = table_link(p);
      double acc = 0.0;
      for (std::uint64_t s = 0; s < 200; ++s) {
        const auto f = extract_emev(generate_channel(prof, l, s));
        for (std::size_t rb = 0; rb < f.n_rb; ++rb) {
          double tot = 0.0;
          for (std::size_t i = 0; i < f.n_r; ++i) tot += f.s(rb, i) * f.s(rb, i);
          acc += f.s(rb, 0) * f.s(rb, 0) / tot;
        }
      }
      return acc / (200.0 * 13.0);
    };
    const double los = std::min(dominance(Profile::D), dominance(Profile::E));
    const double nlos = std::max({dominance(Profile::A), dominance(Profile::B), dominance(Profile::C)});
    CHECK(los > nlos);
  }
}
