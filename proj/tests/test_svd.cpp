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

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "emev/eigenfeatures.hpp"
#include "emev/errors.hpp"
#include "emev/rng.hpp"

using namespace emev;

namespace {

CMatrix random_matrix(Rng& rng, std::size_t p, std::size_t q) {
  CMatrix m(p, q);
  for (auto& v : m.data()) v = {rng.normal(), rng.normal()};
  return m;
}

std::vector<cdouble> random_vector(Rng& rng, std::size_t n) {
  std::vector<cdouble> x(n);
  for (auto& v : x) v = {rng.normal(), rng.normal()};
  return x;
}

double unitarity_error(const CMatrix& u) { return (u.adjoint() * u - CMatrix::identity(u.cols())).frobenius_norm(); }

// Eigenvalues of m m^H from Eigen's Hermitian solver, descending.
std::vector<double> oracle_singular_values(const CMatrix& m) {
  Eigen::MatrixXcd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  const Eigen::MatrixXcd g = e * e.adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(g);
  std::vector<double> s;
  for (int i = 0; i < solver.eigenvalues().size(); ++i) s.push_back(std::sqrt(std::max(0.0, solver.eigenvalues()[i])));
  std::sort(s.rbegin(), s.rend());
  s.resize(std::min(m.rows(), m.cols()));
  return s;
}

// Naive triple loop, kept separate from CMatrix's product.
std::vector<cdouble> naive_apply(const CMatrix& h, const std::vector<cdouble>& x) {
  std::vector<cdouble> y(h.rows(), 0.0);
  for (std::size_t r = 0; r < h.rows(); ++r)
    for (std::size_t c = 0; c < h.cols(); ++c) y[r] += h(r, c) * x[c];
  return y;
}

void check_svd(const CMatrix& m, const SvdResult& f) {
  const std::size_t p = m.rows(), q = m.cols();
  REQUIRE(f.u.rows() == p);
  REQUIRE(f.u.cols() == p);
  REQUIRE(f.v.rows() == q);
  REQUIRE(f.v.cols() == q);
  REQUIRE(f.s.size() == std::min(p, q));
  CHECK(unitarity_error(f.u) <= 1e-10);
  CHECK(unitarity_error(f.v) <= 1e-10);
  for (std::size_t i = 0; i < f.s.size(); ++i) {
    CHECK(f.s[i] >= 0.0);
    if (i > 0) CHECK(f.s[i] <= f.s[i - 1]);
  }
  const double scale = std::max(m.frobenius_norm(), 1e-300);
  CHECK((reconstruct(f, p, q) - m).frobenius_norm() / scale <= 1e-10);
}

} // namespace

TEST_CASE("svd of simple matrices") {
  const auto id = CMatrix::identity(4);
  const auto f = svd(id);
  CHECK(f.u == id);
  CHECK(f.v == id);
  CHECK(f.s == std::vector<double>{1, 1, 1, 1});

  CMatrix padded(2, 4);
  padded(0, 0) = 3.0;
  padded(1, 1) = 1.0;
  const auto g = svd(padded);
  CHECK(g.s[0] == doctest::Approx(3.0));
  CHECK(g.s[1] == doctest::Approx(1.0));
  check_svd(padded, g);

  CMatrix swapped(2, 2);
  swapped(0, 0) = 1.0;
  swapped(1, 1) = cdouble(0.0, -5.0);
  const auto h = svd(swapped);
  CHECK(h.s[0] == doctest::Approx(5.0));
  CHECK(h.u(1, 0) == cdouble(1.0, 0.0));
  check_svd(swapped, h);

  CMatrix zero(3, 5);
  const auto z = svd(zero);
  CHECK(z.s == std::vector<double>{0, 0, 0});
  check_svd(zero, z);

  CMatrix one(1, 1);
  one(0, 0) = cdouble(-2.0, 0.0);
  const auto o = svd(one);
  CHECK(o.s[0] == doctest::Approx(2.0));
  CHECK(o.u(0, 0) == cdouble(1.0, 0.0));
  CHECK(o.v(0, 0).real() == doctest::Approx(-1.0));
}

TEST_CASE("svd rejects bad input") {
  CMatrix m(2, 2);
  m(0, 1) = std::nan("");
  CHECK_THROWS_AS(svd(m), DomainError);
  CHECK_THROWS_AS(svd(CMatrix{}), DomainError);
  CMatrix big(4, 4);
  Rng rng(5);
  for (auto& v : big.data()) v = {rng.normal(), rng.normal()};
  CHECK_THROWS_AS(svd(big, SvdOptions{1e-14, 1}), NumericError);
}

TEST_CASE("svd property sweep") {
  Rng rng(20260101);
  const std::pair<std::size_t, std::size_t> shapes[] = {{4, 64}, {4, 4}, {1, 1}, {4, 1}, {64, 4}, {3, 7}};
  for (auto [p, q] : shapes) {
    CAPTURE(p);
    CAPTURE(q);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto m = random_matrix(rng, p, q);
      const auto f = svd(m);
      check_svd(m, f);
      const auto oracle = oracle_singular_values(m);
      for (std::size_t i = 0; i < oracle.size(); ++i) REQUIRE(std::abs(f.s[i] - oracle[i]) <= 1e-8);
      for (std::size_t c = 0; c < f.u.cols(); ++c) {
        double best = 0.0;
        std::size_t arg = 0;
        for (std::size_t r = 0; r < f.u.rows(); ++r)
          if (std::abs(f.u(r, c)) > best + 1e-12) best = std::abs(f.u(r, c)), arg = r;
        REQUIRE(f.u(arg, c).imag() == 0.0);
        REQUIRE(f.u(arg, c).real() > 0.0);
      }
    }
  }
}

TEST_CASE("svd is deterministic and phase normalized") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_matrix(rng, 4, 64);
    const auto a = svd(m);
    const auto b = svd(m);
    CHECK(a.u == b.u);
    CHECK(a.v == b.v);
    CHECK(a.s == b.s);

    // A global phase on the input only moves into v.
    CMatrix rotated = m;
    const cdouble ph = std::polar(1.0, 0.3 + trial);
    for (auto& v : rotated.data()) v *= ph;
    const auto r = svd(rotated);
    for (std::size_t i = 0; i < a.s.size(); ++i) CHECK(std::abs(r.s[i] - a.s[i]) <= 1e-12);
    CHECK((r.u - a.u).frobenius_norm() <= 1e-10);
  }
}

TEST_CASE("extract_emev") {
  ChannelTensor h(13, 4, 64);
  for (std::size_t rb = 0; rb < 13; ++rb)
    for (std::size_t i = 0; i < 4; ++i) h(rb, i, i) = 1.0;
  const auto f = extract_emev(h, Profile::C);
  CHECK(f.label == Profile::C);
  for (std::size_t rb = 0; rb < 13; ++rb) {
    CHECK(f.u_slice(rb) == CMatrix::identity(4));
    for (std::size_t i = 0; i < 4; ++i) CHECK(f.s(rb, i) == 1.0);
  }

  const auto prof = load_profile(Profile::A);
  LinkConfig link;
  const auto real = generate_channel(prof, link, 7);
  const auto e = extract_emev(real);
  CHECK(e.n_rb == 13);
  CHECK(e.n_r == 4);
  CHECK(e.u_stack.size() == 13 * 4 * 4);
  CHECK(e.s_stack.size() == 13 * 4);
  for (std::size_t rb = 0; rb < 13; ++rb) {
    const auto slice = real.h.slice(rb);
    const auto full = svd(slice);
    CHECK(full.u == e.u_slice(rb));
    // Reconstruct from the stacked features plus the test-only right factor.
    SvdResult stacked{e.u_slice(rb), std::vector<double>(e.s_stack.begin() + rb * 4, e.s_stack.begin() + rb * 4 + 4),
                      full.v};
    CHECK((reconstruct(stacked, 4, 64) - slice).frobenius_norm() / slice.frobenius_norm() <= 1e-10);
    CHECK(unitarity_error(e.u_slice(rb)) <= 1e-10);
  }

  SUBCASE("per-RB phase rotation") {
    ChannelTensor rotated = real.h;
    for (std::size_t rb = 0; rb < 13; ++rb)
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t t = 0; t < 64; ++t) rotated(rb, i, t) *= std::polar(1.0, 0.37 * static_cast<double>(rb + 1));
    const auto er = extract_emev(rotated);
    for (std::size_t i = 0; i < er.u_stack.size(); ++i) CHECK(std::abs(er.u_stack[i] - e.u_stack[i]) <= 1e-10);
    for (std::size_t i = 0; i < er.s_stack.size(); ++i) CHECK(std::abs(er.s_stack[i] - e.s_stack[i]) <= 1e-12);
  }

  SUBCASE("errors name the resource block") {
    ChannelTensor bad(3, 2, 2);
    bad(2, 1, 1) = std::numeric_limits<double>::infinity();
    try {
      extract_emev(bad);
      FAIL("expected DomainError");
    } catch (const DomainError& err) {
      CHECK(std::string(err.what()).find("resource block 2") != std::string::npos);
    }
  }
}

TEST_CASE("precoding chain") {
  Rng rng(4242);
  SUBCASE("precode") {
    const auto x = random_vector(rng, 64);
    CHECK(precode(CMatrix::identity(64), x) == x);
    const auto f = svd(random_matrix(rng, 4, 64));
    std::vector<cdouble> e1(64, 0.0);
    e1[0] = 1.0;
    const auto col = precode(f.v, e1);
    for (std::size_t r = 0; r < 64; ++r) CHECK(col[r] == f.v(r, 0));
    for (int trial = 0; trial < 100; ++trial) {
      const auto v = svd(random_matrix(rng, 64, 64)).u;
      const auto xr = random_vector(rng, 64);
      CHECK(std::abs(norm2(precode(v, xr)) - norm2(xr)) <= 1e-12 * std::max(1.0, norm2(xr)));
    }
    CHECK_THROWS_AS(precode(f.v, std::vector<cdouble>(3)), ShapeError);
  }
  SUBCASE("transmit") {
    const CMatrix zero(4, 64);
    const std::vector<cdouble> none(4, 0.0);
    const auto x = random_vector(rng, 64);
    for (const auto& v : transmit(zero, x, none)) CHECK(v == cdouble(0.0, 0.0));
    const auto n = random_vector(rng, 4);
    const auto h = random_matrix(rng, 4, 64);
    CHECK(transmit(h, std::vector<cdouble>(64, 0.0), n) == n);
    const auto y = transmit(h, x, n);
    const auto ref = naive_apply(h, x);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(y[i] - (ref[i] + n[i])) <= 1e-12);
    CHECK_THROWS_AS(transmit(h, x, std::vector<cdouble>(3)), ShapeError);
    CHECK_THROWS_AS(transmit(h, std::vector<cdouble>(5), n), ShapeError);
  }
  SUBCASE("deprecode and end-to-end identity") {
    const auto y = random_vector(rng, 4);
    CHECK(deprecode(CMatrix::identity(4), y) == y);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto h = random_matrix(rng, 4, 64);
      const auto f = svd(h);
      const auto x = random_vector(rng, 64);
      const auto out = deprecode(f.u, transmit(h, precode(f.v, x), std::vector<cdouble>(4, 0.0)));
      double err = 0.0, ref = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        err += std::norm(out[i] - f.s[i] * x[i]);
        ref += std::norm(f.s[i] * x[i]);
      }
      REQUIRE(std::sqrt(err / ref) <= 1e-10);
    }
    const auto f = svd(random_matrix(rng, 4, 64));
    const auto n = random_vector(rng, 4);
    const auto out = deprecode(f.u, n);
    CHECK(std::abs(norm2(out) - norm2(n)) <= 1e-12 * norm2(n));
    CHECK_THROWS_AS(deprecode(f.u, std::vector<cdouble>(2)), ShapeError);
  }
}
