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

#include <vector>

#include "emev/channel.hpp"
#include "emev/cmatrix.hpp"

namespace emev {

/// Full SVD m = u * diag_rect(s) * v^H.
///
/// s holds the singular values (square roots of the eigenvalues of m m^H) in
/// descending order. u is p x p and v is q x q; both are unitary. In every
/// column of u the entry of largest magnitude (lowest row on ties) is real and
/// positive, and the matching column of v carries the compensating phase.
struct SvdResult {
  CMatrix u;
  std::vector<double> s;
  CMatrix v;
};

struct SvdOptions {
  double tolerance = 1e-14;
  int max_sweeps = 60;
  /// When false and the input is wide, v keeps only its first min(p, q) columns.
  bool full_v = true;
};

/// One-sided Jacobi SVD. Throws DomainError on non-finite or empty input and
/// NumericError if the sweep cap is reached.
SvdResult svd(const CMatrix& m, const SvdOptions& options = {});

/// u * diag_rect(s) * v^H, for reconstruction checks.
CMatrix reconstruct(const SvdResult& f, std::size_t rows, std::size_t cols);

/// Per-RB left singular matrices and singular values.
struct EigenFeatures {
  std::size_t n_rb = 0;
  std::size_t n_r = 0;
  std::vector<cdouble> u_stack; // n_rb x n_r x n_r
  std::vector<double> s_stack;  // n_rb x n_r
  Profile label = Profile::A;

  cdouble u(std::size_t rb, std::size_t i, std::size_t j) const { return u_stack[(rb * n_r + i) * n_r + j]; }
  double s(std::size_t rb, std::size_t i) const { return s_stack[rb * n_r + i]; }
  CMatrix u_slice(std::size_t rb) const;
};

EigenFeatures extract_emev(const ChannelTensor& h, Profile label = Profile::A);
inline EigenFeatures extract_emev(const ChannelRealization& r) { return extract_emev(r.h, r.label); }

/// x_t = V x
std::vector<cdouble> precode(const CMatrix& v, std::span<const cdouble> x);
/// y = H x_t + n
std::vector<cdouble> transmit(const CMatrix& h, std::span<const cdouble> x_t, std::span<const cdouble> noise);
/// U^H y
std::vector<cdouble> deprecode(const CMatrix& u, std::span<const cdouble> y);

} // namespace emev
