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

// Clustered-delay-line MIMO channel synthesis.
//
// Each profile is a fixed table of clusters (normalized delay, power and four
// angles). A realization expands every cluster into M rays around the cluster
// angles, gives each ray an independent random phase and a Doppler rotation,
// and sums the bilinear UE/BS array responses. The per-RB frequency response
// is sampled at the centre subcarrier of each resource block.

#pragma once

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "emev/cmatrix.hpp"

namespace emev {

enum class Profile : std::uint8_t { A = 0, B = 1, C = 2, D = 3, E = 4 };

inline constexpr std::size_t kNumProfiles = 5;
inline constexpr double kSpeedOfLight = 299'792'458.0;

char profile_letter(Profile p);
Profile profile_from_letter(char c);
Profile profile_from_index(int index);
/// Delay spread used by the data generator for each profile, in seconds.
double default_delay_spread(Profile p);

/// Uniform planar array in the local y-z plane, boresight along local +x.
struct ArrayConfig {
  int rows = 1;
  int cols = 1;
  double element_spacing = 0.5; // wavelengths
  double boresight_azimuth = 0.0; // radians
  double boresight_zenith = std::numbers::pi / 2; // radians

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  void validate() const;
};

struct ClusterParam {
  double delay_normalized = 0.0;
  double power_db = 0.0;
  double aod_deg = 0.0;
  double aoa_deg = 0.0;
  double zod_deg = 0.0;
  double zoa_deg = 0.0;
  bool is_los_ray = false;
  /// Linear power after normalization over the whole profile.
  double power = 0.0;
};

/// Intra-cluster RMS angular spreads in degrees.
struct AngleSpread {
  double asd = 0.0;
  double asa = 0.0;
  double zsd = 0.0;
  double zsa = 0.0;
};

struct CdlProfileSpec {
  Profile id = Profile::A;
  bool is_los = false;
  double k_factor_db = 0.0;
  int rays_per_cluster = 20;
  AngleSpread spread;
  std::vector<ClusterParam> clusters;
  /// Table identity recorded in the data file.
  std::string source;

  /// Sorts by delay, checks invariants and normalizes linear powers to sum 1.
  void finalize();
};

struct LinkConfig {
  double carrier_hz = 28e9;
  double scs_hz = 60e3;
  int n_rb = 13;
  double ue_speed_mps = 0.0;
  double travel_azimuth_deg = 0.0;
  double delay_spread_s = 129e-9;
  double snapshot_time_s = 0.0;
  ArrayConfig bs{8, 8};
  ArrayConfig ue{2, 2};

  double wavelength() const { return kSpeedOfLight / carrier_hz; }
  /// Baseband frequency offset of the centre subcarrier of resource block rb.
  double rb_frequency(int rb) const;
  void validate() const;
};

/// Complex tensor with dimensions n_rb x n_r x n_t, row-major.
class ChannelTensor {
public:
  ChannelTensor() = default;
  ChannelTensor(std::size_t n_rb, std::size_t n_r, std::size_t n_t)
      : n_rb_(n_rb), n_r_(n_r), n_t_(n_t), data_(n_rb * n_r * n_t) {}

  std::size_t n_rb() const noexcept { return n_rb_; }
  std::size_t n_r() const noexcept { return n_r_; }
  std::size_t n_t() const noexcept { return n_t_; }
  std::size_t size() const noexcept { return data_.size(); }

  cdouble& operator()(std::size_t rb, std::size_t r, std::size_t t) { return data_[(rb * n_r_ + r) * n_t_ + t]; }
  const cdouble& operator()(std::size_t rb, std::size_t r, std::size_t t) const {
    return data_[(rb * n_r_ + r) * n_t_ + t];
  }

  std::span<cdouble> data() noexcept { return data_; }
  std::span<const cdouble> data() const noexcept { return data_; }

  CMatrix slice(std::size_t rb) const;
  void set_slice(std::size_t rb, const CMatrix& m);

  friend bool operator==(const ChannelTensor&, const ChannelTensor&) = default;

private:
  std::size_t n_rb_ = 0, n_r_ = 0, n_t_ = 0;
  std::vector<cdouble> data_;
};

struct ChannelRealization {
  ChannelTensor h;
  Profile label = Profile::A;
  std::uint64_t seed = 0;
  LinkConfig link;
};

/// One cluster's narrowband MIMO coefficient (n_r x n_t) and its absolute delay.
struct ClusterTap {
  double delay_s = 0.0;
  double nominal_power = 0.0;
  CMatrix coeff;
};

/// UMa line-of-sight probability for 2D distance d_2d and UE height h_ut (metres).
double los_probability(double d_2d, double h_ut);

/// Directory holding cdl_a.txt ... cdl_e.txt. EMEV_PROFILE_DIR overrides the
/// compiled-in default.
std::filesystem::path default_profile_dir();

/// "cdl_a.txt" for Profile::A and so on.
std::string profile_file_name(Profile id);
CdlProfileSpec load_profile(Profile id, const std::filesystem::path& dir = default_profile_dir());
CdlProfileSpec load_profile_file(const std::filesystem::path& file);

/// exp(j 2pi/lambda <d_p, r(az, zen)>) for every element p, row-major over (row, col).
std::vector<cdouble> steering_vector(const ArrayConfig& array, double azimuth, double zenith, double wavelength);

/// The 20 fixed intra-cluster offsets (unit RMS spread), symmetric about 0.
std::span<const double> ray_offsets();

/// Per-cluster delays in seconds: delay_normalized * delay_spread_s.
std::vector<double> cluster_delays(const CdlProfileSpec& profile, double delay_spread_s);

/// Power-weighted RMS delay of the profile's scaled cluster delays.
double rms_delay_spread(const CdlProfileSpec& profile, double delay_spread_s);

/// Cluster-level narrowband coefficients of one realization.
std::vector<ClusterTap> synthesize_taps(const CdlProfileSpec& profile, const LinkConfig& link, std::uint64_t seed);

/// RMS delay spread of a realization, weighting each tap by its realized mean
/// power across antenna pairs.
double realized_delay_spread(std::span<const ClusterTap> taps);

ChannelTensor frequency_response(std::span<const ClusterTap> taps, const LinkConfig& link);

ChannelRealization generate_channel(const CdlProfileSpec& profile, const LinkConfig& link, std::uint64_t seed);

} // namespace emev
