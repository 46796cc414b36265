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

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "emev/channel.hpp"
#include "emev/eigenfeatures.hpp"
#include "emev/nn/model.hpp"

namespace emev::data {

enum class Mode : std::uint8_t { csi = 0, emev = 1 };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);

/// Marks a clean (noise-free) sample.
inline constexpr double kClean = std::numeric_limits<double>::infinity();

struct GeneratorConfig {
  std::size_t per_class = 2000;
  std::uint64_t master_seed = 42;
  /// Carrier, subcarrier spacing, RB count and arrays; per-sample fields are drawn.
  LinkConfig link;
  std::vector<double> speeds_kmh = {4.8, 24.0, 40.0, 60.0};
  /// Snapshot times are drawn uniformly in [0, max_snapshot_s).
  double max_snapshot_s = 1e-3;
  std::filesystem::path profile_dir = default_profile_dir();

  std::size_t total() const { return per_class * kNumProfiles; }
  void validate() const;
};

/// Everything drawn for one sample, reproducible from (config, index).
struct SampleDraw {
  std::size_t index = 0;
  Profile label = Profile::A;
  std::uint64_t seed = 0;
  LinkConfig link;
};

SampleDraw draw_sample(const GeneratorConfig& cfg, std::size_t index);

using ProfileSet = std::array<CdlProfileSpec, kNumProfiles>;
ProfileSet load_profiles(const std::filesystem::path& dir);

/// Raw (unnormalized) channel of sample `index`.
ChannelTensor sample_channel(const GeneratorConfig& cfg, const ProfileSet& profiles, std::size_t index);

/// Mean |h|^2 over every entry.
double measure_power(const ChannelTensor& h);

/// Circularly symmetric complex Gaussian noise with total variance
/// P_H * 10^(-snr_db/10) per entry. kClean returns h unchanged.
ChannelTensor add_awgn(const ChannelTensor& h, double snr_db, std::uint64_t seed);

/// Noise seed for one sample at one SNR.
std::uint64_t noise_seed(std::uint64_t sample_seed, double snr_db);

/// Scales h so that mean |h|^2 = 1.
void normalize_power(ChannelTensor& h);

nn::Shape u_shape(Mode m, const LinkConfig& link);
nn::Shape s_shape(Mode m, const LinkConfig& link);

/// Appends the network features of a normalized channel to `out`.
void append_features(Mode m, const ChannelTensor& h, std::vector<float>& u, std::vector<float>& s);

struct Dataset {
  Mode mode = Mode::emev;
  std::uint32_t n_rb = 0, n_r = 0, n_t = 0;
  nn::Examples examples;
  std::vector<std::uint64_t> seeds;
  std::vector<float> snr_db; // NaN for clean samples

  std::size_t size() const { return examples.size(); }
  Dataset subset(std::span<const std::size_t> idx) const;
  friend bool operator==(const Dataset&, const Dataset&);
};

Dataset empty_dataset(Mode m, const LinkConfig& link);

/// Generates every sample (per_class per profile, labels in blocks) in `mode`.
/// A finite snr_db injects noise into H before normalization and SVD.
Dataset generate_dataset(const GeneratorConfig& cfg, Mode mode, double snr_db = kClean);

/// Recomputes features of the samples `idx` from regenerated channels at one SNR.
Dataset regenerate_subset(const GeneratorConfig& cfg, Mode mode, std::span<const std::size_t> idx, double snr_db);

struct Split {
  std::vector<std::size_t> train, val, test;
};

/// Per-class largest-remainder split; shuffling is seeded per class.
Split stratified_split(std::span<const std::uint8_t> labels, std::array<int, 3> ratios, std::uint64_t seed);

/// Number of samples per split for a class of n samples.
std::array<std::size_t, 3> split_counts(std::size_t n, std::array<int, 3> ratios);

void write_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize(const Dataset& d);
Dataset deserialize(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes);
std::uint64_t file_checksum(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

struct Manifest {
  static constexpr int kFormatVersion = 1;
  GeneratorConfig generator;
  std::array<int, 3> ratios = {65, 15, 20};
  std::uint64_t split_seed = 0;
  Split split;
  /// mode name -> file name and checksum
  struct File {
    Mode mode;
    std::string name;
    std::string checksum;
  };
  std::vector<File> files;
  /// FNV-1a of each profile table used for generation.
  std::array<std::string, kNumProfiles> profile_checksums;
};

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text, const std::string& origin = "<memory>");
void write_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

} // namespace emev::data
