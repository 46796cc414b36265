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

#include "emev/channel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "emev/errors.hpp"
#include "emev/rng.hpp"

#ifndef EMEV_DEFAULT_PROFILE_DIR
#define EMEV_DEFAULT_PROFILE_DIR "data/profiles"
#endif

namespace emev {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

constexpr std::array<double, 20> kRayOffsets = {
    0.0447, -0.0447, 0.1413, -0.1413, 0.2492, -0.2492, 0.3715, -0.3715, 0.5129, -0.5129,
    0.6797, -0.6797, 0.8844, -0.8844, 1.1481, -1.1481, 1.5195, -1.5195, 2.1551, -2.1551};

double wrap_zenith_deg(double z) {
  z = std::fmod(z, 360.0);
  if (z < 0.0) z += 360.0;
  return z > 180.0 ? 360.0 - z : z;
}

// Unit vector for (azimuth, zenith) expressed in the array's local frame.
std::array<double, 3> local_direction(const ArrayConfig& array, double azimuth, double zenith) {
  const double gx = std::sin(zenith) * std::cos(azimuth);
  const double gy = std::sin(zenith) * std::sin(azimuth);
  const double gz = std::cos(zenith);
  // R = Rz(bearing) * Ry(downtilt); local = R^T g.
  const double ca = std::cos(array.boresight_azimuth), sa = std::sin(array.boresight_azimuth);
  const double tilt = array.boresight_zenith - kPi / 2;
  const double cb = std::cos(tilt), sb = std::sin(tilt);
  const double x1 = ca * gx + sa * gy;
  const double y1 = -sa * gx + ca * gy;
  const double z1 = gz;
  return {cb * x1 - sb * z1, y1, sb * x1 + cb * z1};
}

void add_ray(CMatrix& coeff, cdouble weight, std::span<const cdouble> rx, std::span<const cdouble> tx) {
  for (std::size_t r = 0; r < rx.size(); ++r) {
    const cdouble wr = weight * rx[r];
    cdouble* row = &coeff(r, 0);
    for (std::size_t t = 0; t < tx.size(); ++t) row[t] += wr * tx[t];
  }
}

double parse_double(std::istringstream& in, const std::filesystem::path& file, int line_no) {
  double v;
  if (!(in >> v))
    throw LoadError(file.string() + ":" + std::to_string(line_no) + ": expected a number");
  return v;
}

} // namespace

char profile_letter(Profile p) { return static_cast<char>('A' + static_cast<int>(p)); }

Profile profile_from_letter(char c) {
  if (c >= 'a' && c <= 'e') c = static_cast<char>(c - 'a' + 'A');
  if (c < 'A' || c > 'E') throw DomainError(std::string("unknown CDL profile '") + c + "'");
  return static_cast<Profile>(c - 'A');
}

Profile profile_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kNumProfiles))
    throw DomainError("profile index out of range: " + std::to_string(index));
  return static_cast<Profile>(index);
}

double default_delay_spread(Profile p) {
  switch (p) {
  case Profile::A: return 129e-9;
  case Profile::B: return 634e-9;
  case Profile::C: return 634e-9;
  case Profile::D: return 65e-9;
  case Profile::E: return 65e-9;
  }
  throw DomainError("invalid profile");
}

void ArrayConfig::validate() const {
  if (rows < 1 || cols < 1) throw DomainError("array needs at least one row and one column");
  if (!(element_spacing > 0.0)) throw DomainError("array element spacing must be positive");
}

double LinkConfig::rb_frequency(int rb) const {
  return (static_cast<double>(rb) - 0.5 * static_cast<double>(n_rb - 1)) * 12.0 * scs_hz;
}

void LinkConfig::validate() const {
  if (!(carrier_hz > 0.0)) throw DomainError("carrier frequency must be positive");
  if (!(scs_hz > 0.0)) throw DomainError("subcarrier spacing must be positive");
  if (n_rb < 1) throw DomainError("n_rb must be at least 1");
  if (!(delay_spread_s > 0.0)) throw DomainError("delay spread must be positive");
  if (!(ue_speed_mps >= 0.0)) throw DomainError("UE speed must be non-negative");
  bs.validate();
  ue.validate();
}

CMatrix ChannelTensor::slice(std::size_t rb) const {
  CMatrix m(n_r_, n_t_);
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(rb * n_r_ * n_t_), n_r_ * n_t_, m.data().begin());
  return m;
}

void ChannelTensor::set_slice(std::size_t rb, const CMatrix& m) {
  if (m.rows() != n_r_ || m.cols() != n_t_) throw ShapeError("channel slice shape mismatch");
  std::copy(m.data().begin(), m.data().end(), data_.begin() + static_cast<std::ptrdiff_t>(rb * n_r_ * n_t_));
}

void CdlProfileSpec::finalize() {
  if (rays_per_cluster < 1) throw LoadError("rays_per_cluster must be at least 1");
  if (clusters.empty()) throw LoadError("profile has no clusters");
  const auto los_rays = std::count_if(clusters.begin(), clusters.end(), [](const auto& c) { return c.is_los_ray; });
  if (is_los != (los_rays == 1) || los_rays > 1)
    throw LoadError(std::string("profile ") + profile_letter(id) + ": LOS flag inconsistent with LOS ray count");

  std::stable_sort(clusters.begin(), clusters.end(),
                   [](const auto& a, const auto& b) { return a.delay_normalized < b.delay_normalized; });
  if (clusters.front().delay_normalized < 0.0) throw LoadError("negative cluster delay");

  if (is_los) {
    // The specular ray is tied to the diffuse part of the first cluster by the K-factor.
    auto los = std::find_if(clusters.begin(), clusters.end(), [](const auto& c) { return c.is_los_ray; });
    auto first = std::find_if(clusters.begin(), clusters.end(), [](const auto& c) { return !c.is_los_ray; });
    if (first == clusters.end()) throw LoadError("LOS profile without diffuse clusters");
    const double expected = first->power_db + k_factor_db;
    if (std::abs(los->power_db - expected) > 0.05)
      throw LoadError(std::string("profile ") + profile_letter(id) + ": LOS ray power disagrees with K-factor");
    los->power_db = expected;
  }

  double total = 0.0;
  for (auto& c : clusters) {
    c.power = std::pow(10.0, c.power_db / 10.0);
    total += c.power;
  }
  for (auto& c : clusters) c.power /= total;

  // Rescale normalized delays to unit RMS so that delay_spread_s is exact.
  const double rms = rms_delay_spread(*this, 1.0);
  if (rms > 0.0)
    for (auto& c : clusters) c.delay_normalized /= rms;
}

double los_probability(double d_2d, double h_ut) {
  if (!(d_2d >= 0.0)) throw DomainError("los_probability: d_2d must be non-negative");
  if (!(h_ut >= 0.0) || h_ut > 28.0) throw DomainError("los_probability: h_ut must lie in [0, 28] m");
  if (d_2d <= 18.0) return 1.0;
  const double c = h_ut <= 13.0 ? 0.0 : std::pow((h_ut - 13.0) / 10.0, 1.5);
  const double near = 18.0 / d_2d + std::exp(-d_2d / 63.0) * (1.0 - 18.0 / d_2d);
  const double far = 1.0 + 0.8 * c * std::pow(d_2d / 100.0, 3.0) * std::exp(-d_2d / 150.0);
  return std::clamp(near * far, 0.0, 1.0);
}

std::filesystem::path default_profile_dir() {
  if (const char* env = std::getenv("EMEV_PROFILE_DIR"); env != nullptr && *env != '\0') return env;
  return EMEV_DEFAULT_PROFILE_DIR;
}

std::string profile_file_name(Profile id) {
  std::string name = "cdl_";
  name += static_cast<char>('a' + static_cast<int>(id));
  return name + ".txt";
}

CdlProfileSpec load_profile(Profile id, const std::filesystem::path& dir) {
  const std::string name = profile_file_name(id);
  auto spec = load_profile_file(dir / name);
  if (spec.id != id)
    throw LoadError((dir / name).string() + ": file declares profile " + profile_letter(spec.id));
  return spec;
}

CdlProfileSpec load_profile_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError("cannot open profile file " + file.string());

  CdlProfileSpec spec;
  bool have_id = false, have_los = false, have_spread = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      if (line_no <= 3 && line.find("source:") != std::string::npos)
        spec.source = line.substr(line.find("source:") + 8);
      line.erase(hash);
    }
    std::istringstream tok(line);
    std::string key;
    if (!(tok >> key)) continue;
    if (key == "profile") {
      std::string v;
      tok >> v;
      if (v.size() != 1) throw LoadError(file.string() + ":" + std::to_string(line_no) + ": bad profile id");
      try {
        spec.id = profile_from_letter(v[0]);
      } catch (const DomainError& e) {
        throw LoadError(file.string() + ": " + e.what());
      }
      have_id = true;
    } else if (key == "is_los") {
      spec.is_los = parse_double(tok, file, line_no) != 0.0;
      have_los = true;
    } else if (key == "k_factor_db") {
      spec.k_factor_db = parse_double(tok, file, line_no);
    } else if (key == "rays_per_cluster") {
      spec.rays_per_cluster = static_cast<int>(parse_double(tok, file, line_no));
    } else if (key == "spread_deg") {
      spec.spread.asd = parse_double(tok, file, line_no);
      spec.spread.asa = parse_double(tok, file, line_no);
      spec.spread.zsd = parse_double(tok, file, line_no);
      spec.spread.zsa = parse_double(tok, file, line_no);
      have_spread = true;
    } else if (key == "cluster" || key == "los_ray") {
      ClusterParam c;
      c.delay_normalized = parse_double(tok, file, line_no);
      c.power_db = parse_double(tok, file, line_no);
      c.aod_deg = parse_double(tok, file, line_no);
      c.aoa_deg = parse_double(tok, file, line_no);
      c.zod_deg = parse_double(tok, file, line_no);
      c.zoa_deg = parse_double(tok, file, line_no);
      c.is_los_ray = key == "los_ray";
      spec.clusters.push_back(c);
    } else {
      throw LoadError(file.string() + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (!have_id || !have_los || !have_spread)
    throw LoadError(file.string() + ": missing profile, is_los or spread_deg header");
  try {
    spec.finalize();
  } catch (const LoadError& e) {
    throw LoadError(file.string() + ": " + e.what());
  }
  return spec;
}

std::vector<cdouble> steering_vector(const ArrayConfig& array, double azimuth, double zenith, double wavelength) {
  if (!(wavelength > 0.0)) throw DomainError("steering_vector: wavelength must be positive");
  array.validate();
  const auto dir = local_direction(array, azimuth, zenith);
  // Element positions in wavelengths are (0, col * d, row * d); the 1/lambda
  // factor cancels against positions expressed in units of lambda.
  const double k = 2.0 * kPi * array.element_spacing;
  std::vector<cdouble> a(array.size());
  for (int r = 0; r < array.rows; ++r)
    for (int c = 0; c < array.cols; ++c) {
      const double phase = k * (c * dir[1] + r * dir[2]);
      a[static_cast<std::size_t>(r * array.cols + c)] = std::polar(1.0, phase);
    }
  return a;
}

std::span<const double> ray_offsets() { return kRayOffsets; }

std::vector<double> cluster_delays(const CdlProfileSpec& profile, double delay_spread_s) {
  std::vector<double> d(profile.clusters.size());
  std::transform(profile.clusters.begin(), profile.clusters.end(), d.begin(),
                 [&](const auto& c) { return c.delay_normalized * delay_spread_s; });
  return d;
}

double rms_delay_spread(const CdlProfileSpec& profile, double delay_spread_s) {
  double p = 0.0, m1 = 0.0, m2 = 0.0;
  for (const auto& c : profile.clusters) {
    const double w = c.power > 0.0 ? c.power : std::pow(10.0, c.power_db / 10.0);
    const double tau = c.delay_normalized * delay_spread_s;
    p += w;
    m1 += w * tau;
    m2 += w * tau * tau;
  }
  if (p <= 0.0) return 0.0;
  m1 /= p;
  m2 /= p;
  return std::sqrt(std::max(0.0, m2 - m1 * m1));
}

std::vector<ClusterTap> synthesize_taps(const CdlProfileSpec& profile, const LinkConfig& link, std::uint64_t seed) {
  link.validate();
  const double lambda = link.wavelength();
  const std::size_t n_r = link.ue.size();
  const std::size_t n_t = link.bs.size();
  const double doppler_max = link.ue_speed_mps / lambda;
  const double travel = link.travel_azimuth_deg * kDeg;
  const auto m_rays = static_cast<std::size_t>(profile.rays_per_cluster);
  const auto offsets = ray_offsets();
  if (m_rays > offsets.size())
    throw DomainError("at most " + std::to_string(offsets.size()) + " rays per cluster are supported");

  Rng rng(seed);
  std::vector<ClusterTap> taps;
  taps.reserve(profile.clusters.size());

  auto ray_weight = [&](double amplitude, double phase, double aoa, double zoa) {
    const double nu = doppler_max * std::cos(aoa - travel) * std::sin(zoa);
    return std::polar(amplitude, phase + 2.0 * kPi * nu * link.snapshot_time_s);
  };

  std::vector<std::size_t> perm_aod(m_rays), perm_zod(m_rays), perm_zoa(m_rays);
  for (const auto& cl : profile.clusters) {
    ClusterTap tap;
    tap.delay_s = cl.delay_normalized * link.delay_spread_s;
    tap.nominal_power = cl.power;
    tap.coeff = CMatrix(n_r, n_t);

    if (cl.is_los_ray) {
      const double aoa = cl.aoa_deg * kDeg, zoa = wrap_zenith_deg(cl.zoa_deg) * kDeg;
      const double aod = cl.aod_deg * kDeg, zod = wrap_zenith_deg(cl.zod_deg) * kDeg;
      const auto rx = steering_vector(link.ue, aoa, zoa, lambda);
      const auto tx = steering_vector(link.bs, aod, zod, lambda);
      add_ray(tap.coeff, ray_weight(std::sqrt(cl.power), 0.0, aoa, zoa), rx, tx);
      taps.push_back(std::move(tap));
      continue;
    }

    // Random coupling of the departure and zenith offsets to the arrival offsets.
    for (auto* perm : {&perm_aod, &perm_zod, &perm_zoa}) {
      std::iota(perm->begin(), perm->end(), std::size_t{0});
      rng.shuffle(perm->begin(), perm->end());
    }
    const double amplitude = std::sqrt(cl.power / static_cast<double>(m_rays));
    for (std::size_t m = 0; m < m_rays; ++m) {
      const double aoa = (cl.aoa_deg + profile.spread.asa * offsets[m]) * kDeg;
      const double aod = (cl.aod_deg + profile.spread.asd * offsets[perm_aod[m]]) * kDeg;
      const double zod = wrap_zenith_deg(cl.zod_deg + profile.spread.zsd * offsets[perm_zod[m]]) * kDeg;
      const double zoa = wrap_zenith_deg(cl.zoa_deg + profile.spread.zsa * offsets[perm_zoa[m]]) * kDeg;
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      const auto rx = steering_vector(link.ue, aoa, zoa, lambda);
      const auto tx = steering_vector(link.bs, aod, zod, lambda);
      add_ray(tap.coeff, ray_weight(amplitude, phase, aoa, zoa), rx, tx);
    }
    taps.push_back(std::move(tap));
  }
  return taps;
}

double realized_delay_spread(std::span<const ClusterTap> taps) {
  double p = 0.0, m1 = 0.0, m2 = 0.0;
  for (const auto& tap : taps) {
    const double n = static_cast<double>(tap.coeff.data().size());
    const double w = n > 0 ? std::pow(tap.coeff.frobenius_norm(), 2) / n : 0.0;
    p += w;
    m1 += w * tap.delay_s;
    m2 += w * tap.delay_s * tap.delay_s;
  }
  if (p <= 0.0) return 0.0;
  m1 /= p;
  m2 /= p;
  return std::sqrt(std::max(0.0, m2 - m1 * m1));
}

ChannelTensor frequency_response(std::span<const ClusterTap> taps, const LinkConfig& link) {
  const std::size_t n_r = link.ue.size();
  const std::size_t n_t = link.bs.size();
  ChannelTensor h(static_cast<std::size_t>(link.n_rb), n_r, n_t);
  for (int rb = 0; rb < link.n_rb; ++rb) {
    const double f = link.rb_frequency(rb);
    cdouble* out = &h(static_cast<std::size_t>(rb), 0, 0);
    for (const auto& tap : taps) {
      if (tap.coeff.rows() != n_r || tap.coeff.cols() != n_t) throw ShapeError("tap shape does not match link arrays");
      const cdouble rot = std::polar(1.0, -2.0 * kPi * f * tap.delay_s);
      const auto src = tap.coeff.data();
      for (std::size_t i = 0; i < src.size(); ++i) out[i] += src[i] * rot;
    }
  }
  return h;
}

ChannelRealization generate_channel(const CdlProfileSpec& profile, const LinkConfig& link, std::uint64_t seed) {
  const auto taps = synthesize_taps(profile, link, seed);
  return ChannelRealization{frequency_response(taps, link), profile.id, seed, link};
}

} // namespace emev
