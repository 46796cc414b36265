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

#include "emev/eigenfeatures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "emev/errors.hpp"

namespace emev {

namespace {

using Column = std::vector<cdouble>;

double squared_norm(const Column& c) {
  double acc = 0.0;
  for (const auto& v : c) acc += std::norm(v);
  return acc;
}

cdouble inner(const Column& a, const Column& b) {
  cdouble acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

// Rotates the pair so that a^H b becomes zero; the same rotation is applied to
// the accumulated right factor.
void rotate(Column& a, Column& b, Column& va, Column& vb, double alpha, double beta, cdouble gamma) {
  const double g = std::abs(gamma);
  const cdouble phase = gamma / g;
  const double zeta = (beta - alpha) / (2.0 * g);
  const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  const double s = c * t;
  const cdouble s_neg = -s * std::conj(phase);
  const cdouble s_pos = s * phase;
  auto apply = [&](Column& x, Column& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const cdouble xi = x[i], yi = y[i];
      x[i] = c * xi + s_neg * yi;
      y[i] = s_pos * xi + c * yi;
    }
  };
  apply(a, b);
  apply(va, vb);
}

// Fills the columns not marked valid so that the set becomes an orthonormal
// basis of C^n. Standard basis vectors are tried in order and kept when their
// residual exceeds 0.5/sqrt(n); some candidate always has residual >= 1/sqrt(n)
// against any proper subspace, so one pass suffices.
void complete_basis(std::vector<Column>& cols, std::vector<bool>& valid, std::size_t n) {
  cols.resize(n, Column(n));
  valid.resize(n, false);
  std::vector<std::size_t> done;
  for (std::size_t i = 0; i < n; ++i)
    if (valid[i]) done.push_back(i);

  const double threshold = 0.5 / std::sqrt(static_cast<double>(n));
  std::size_t slot = 0;
  for (std::size_t e = 0; e < n && done.size() < n; ++e) {
    while (slot < n && valid[slot]) ++slot;
    Column r(n, 0.0);
    r[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (auto j : done) {
        const cdouble proj = inner(cols[j], r);
        for (std::size_t i = 0; i < n; ++i) r[i] -= proj * cols[j][i];
      }
    const double nr = std::sqrt(squared_norm(r));
    if (nr <= threshold) continue;
    for (auto& v : r) v /= nr;
    cols[slot] = std::move(r);
    valid[slot] = true;
    done.push_back(slot);
  }
  if (done.size() != n) throw NumericError("svd: basis completion failed");
}

// Thin variant: only the first k columns, completing any that are invalid.
void complete_thin(std::vector<Column>& cols, std::vector<bool>& valid, std::size_t n) {
  const std::size_t k = cols.size();
  if (std::all_of(valid.begin(), valid.end(), [](bool b) { return b; })) return;
  complete_basis(cols, valid, n);
  cols.resize(k);
  valid.resize(k);
}

CMatrix from_columns(const std::vector<Column>& cols, std::size_t rows) {
  CMatrix m(rows, cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t r = 0; r < rows; ++r) m(r, c) = cols[c][r];
  return m;
}

} // namespace

SvdResult svd(const CMatrix& m, const SvdOptions& options) {
  if (m.rows() == 0 || m.cols() == 0) throw DomainError("svd: empty matrix");
  for (const auto& v : m.data())
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw DomainError("svd: non-finite entry");

  // Orthogonalize the columns of whichever orientation has fewer of them.
  const bool wide = m.rows() < m.cols();
  const std::size_t n = wide ? m.cols() : m.rows();
  const std::size_t k = wide ? m.rows() : m.cols();

  std::vector<Column> b(k, Column(n));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (wide)
        b[r][c] = std::conj(m(r, c));
      else
        b[c][r] = m(r, c);
    }
  std::vector<Column> acc(k, Column(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) acc[i][i] = 1.0;

  bool converged = false;
  for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t i = 0; i + 1 < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        const double alpha = squared_norm(b[i]);
        const double beta = squared_norm(b[j]);
        if (alpha == 0.0 || beta == 0.0) continue;
        const cdouble gamma = inner(b[i], b[j]);
        if (std::abs(gamma) <= options.tolerance * std::sqrt(alpha * beta)) continue;
        converged = false;
        rotate(b[i], b[j], acc[i], acc[j], alpha, beta, gamma);
      }
  }
  if (!converged)
    throw NumericError("svd: no convergence within " + std::to_string(options.max_sweeps) + " sweeps");

  std::vector<double> sigma(k);
  for (std::size_t i = 0; i < k; ++i) sigma[i] = std::sqrt(squared_norm(b[i]));
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return sigma[x] > sigma[y]; });

  const double sigma_max = sigma[order.front()];
  std::vector<Column> w(k), right(k);
  std::vector<bool> w_valid(k, false);
  std::vector<double> s(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto src = order[i];
    s[i] = sigma[src];
    right[i] = acc[src];
    w[i] = b[src];
    if (s[i] > sigma_max * 1e-13 && s[i] > 0.0) {
      for (auto& v : w[i]) v /= s[i];
      w_valid[i] = true;
    }
  }
  if (wide && !options.full_v)
    complete_thin(w, w_valid, n);
  else
    complete_basis(w, w_valid, n);

  // wide: m^H = W S R^H, so m = R S W^H.
  SvdResult out;
  out.s = std::move(s);
  if (wide) {
    out.u = from_columns(right, k);
    out.v = from_columns(w, n);
  } else {
    out.u = from_columns(w, n);
    out.v = from_columns(right, k);
  }

  // Phase convention on u, compensated in v.
  const std::size_t p = out.u.rows();
  for (std::size_t c = 0; c < out.u.cols(); ++c) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t r = 0; r < p; ++r)
      if (std::abs(out.u(r, c)) > best) {
        best = std::abs(out.u(r, c));
        arg = r;
      }
    const cdouble rot = std::conj(out.u(arg, c)) / best;
    for (std::size_t r = 0; r < p; ++r) out.u(r, c) *= rot;
    out.u(arg, c) = best;
    if (c < out.s.size())
      for (std::size_t r = 0; r < out.v.rows(); ++r) out.v(r, c) *= rot;
  }
  return out;
}

CMatrix reconstruct(const SvdResult& f, std::size_t rows, std::size_t cols) {
  CMatrix out(rows, cols);
  for (std::size_t i = 0; i < f.s.size(); ++i)
    for (std::size_t r = 0; r < rows; ++r) {
      const cdouble us = f.u(r, i) * f.s[i];
      for (std::size_t c = 0; c < cols; ++c) out(r, c) += us * std::conj(f.v(c, i));
    }
  return out;
}

CMatrix EigenFeatures::u_slice(std::size_t rb) const {
  CMatrix m(n_r, n_r);
  for (std::size_t i = 0; i < n_r; ++i)
    for (std::size_t j = 0; j < n_r; ++j) m(i, j) = u(rb, i, j);
  return m;
}

EigenFeatures extract_emev(const ChannelTensor& h, Profile label) {
  EigenFeatures f;
  f.n_rb = h.n_rb();
  f.n_r = h.n_r();
  f.label = label;
  f.u_stack.resize(f.n_rb * f.n_r * f.n_r);
  f.s_stack.assign(f.n_rb * f.n_r, 0.0);
  for (std::size_t rb = 0; rb < f.n_rb; ++rb) {
    SvdResult r;
    try {
      r = svd(h.slice(rb), SvdOptions{.full_v = false});
    } catch (const DomainError& e) {
      throw DomainError("resource block " + std::to_string(rb) + ": " + e.what());
    } catch (const NumericError& e) {
      throw NumericError("resource block " + std::to_string(rb) + ": " + e.what());
    }
    std::copy(r.u.data().begin(), r.u.data().end(),
              f.u_stack.begin() + static_cast<std::ptrdiff_t>(rb * f.n_r * f.n_r));
    std::copy(r.s.begin(), r.s.end(), f.s_stack.begin() + static_cast<std::ptrdiff_t>(rb * f.n_r));
  }
  return f;
}

std::vector<cdouble> precode(const CMatrix& v, std::span<const cdouble> x) { return multiply(v, x); }

std::vector<cdouble> transmit(const CMatrix& h, std::span<const cdouble> x_t, std::span<const cdouble> noise) {
  if (noise.size() != h.rows())
    throw ShapeError("transmit: noise length " + std::to_string(noise.size()) + " vs " + std::to_string(h.rows()) +
                     " receive antennas");
  auto y = multiply(h, x_t);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += noise[i];
  return y;
}

std::vector<cdouble> deprecode(const CMatrix& u, std::span<const cdouble> y) {
  if (u.rows() != y.size()) throw ShapeError("deprecode: vector length does not match U");
  std::vector<cdouble> out(u.cols());
  for (std::size_t c = 0; c < u.cols(); ++c) {
    cdouble acc = 0.0;
    for (std::size_t r = 0; r < u.rows(); ++r) acc += std::conj(u(r, c)) * y[r];
    out[c] = acc;
  }
  return out;
}

} // namespace emev
