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

#include "emev/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include <json.hpp>

#include "emev/errors.hpp"
#include "emev/rng.hpp"

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

namespace emev::data {

namespace {

constexpr char kMagic[8] = {'E', 'M', 'E', 'V', 'D', 'A', 'T', 'A'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kDrawStream = 0x64726177ULL;
constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;

std::size_t u_volume(const Dataset& d) { return nn::volume(d.examples.u_shape); }
std::size_t s_volume(const Dataset& d) { return d.examples.s_shape.empty() ? 0 : nn::volume(d.examples.s_shape); }

void write_features(Mode m, const ChannelTensor& h, float* u, float* s) {
  if (m == Mode::csi) {
    for (std::size_t i = 0; i < h.size(); ++i) {
      u[2 * i] = static_cast<float>(h.data()[i].real());
      u[2 * i + 1] = static_cast<float>(h.data()[i].imag());
    }
    return;
  }
  const auto f = extract_emev(h);
  for (std::size_t i = 0; i < f.u_stack.size(); ++i) {
    u[2 * i] = static_cast<float>(f.u_stack[i].real());
    u[2 * i + 1] = static_cast<float>(f.u_stack[i].imag());
  }
  for (std::size_t i = 0; i < f.s_stack.size(); ++i) s[i] = static_cast<float>(f.s_stack[i]);
}

bool is_clean(double snr_db) { return std::isinf(snr_db) && snr_db > 0; }

Dataset allocate(Mode mode, const LinkConfig& link, std::size_t n) {
  Dataset d = empty_dataset(mode, link);
  d.examples.u.resize(n * u_volume(d));
  d.examples.s.resize(n * s_volume(d));
  d.examples.labels.resize(n);
  d.seeds.resize(n);
  d.snr_db.resize(n);
  return d;
}

Dataset build(const GeneratorConfig& cfg, Mode mode, std::span<const std::size_t> idx, double snr_db) {
  cfg.validate();
  if (std::isnan(snr_db)) throw DomainError("SNR must be a number");
  const ProfileSet profiles = load_profiles(cfg.profile_dir);
  Dataset d = allocate(mode, cfg.link, idx.size());
  const std::size_t vu = u_volume(d), vs = s_volume(d);
  const float snr_tag = is_clean(snr_db) ? std::numeric_limits<float>::quiet_NaN() : static_cast<float>(snr_db);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(idx.size()); ++k) {
    const auto i = static_cast<std::size_t>(k);
    const SampleDraw draw = draw_sample(cfg, idx[i]);
    ChannelTensor h = generate_channel(profiles[static_cast<std::size_t>(draw.label)], draw.link, draw.seed).h;
    if (!is_clean(snr_db)) h = add_awgn(h, snr_db, noise_seed(draw.seed, snr_db));
    normalize_power(h);
    write_features(mode, h, d.examples.u.data() + i * vu, d.examples.s.data() + i * vs);
    d.examples.labels[i] = static_cast<std::uint8_t>(draw.label);
    d.seeds[i] = draw.seed;
    d.snr_db[i] = snr_tag;
  }
  return d;
}

template <typename V>
void put(std::vector<std::uint8_t>& out, V v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof v);
}

class Reader {
public:
  Reader(std::span<const std::uint8_t> bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  template <typename V>
  V get(const char* what) {
    V v;
    take(&v, sizeof v, what);
    return v;
  }

  void take(void* dst, std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw LoadError(origin_ + ": truncated while reading " + what);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

private:
  std::span<const std::uint8_t> bytes_;
  const std::string& origin_;
  std::size_t pos_ = 0;
};

} // namespace

const char* to_string(Mode m) { return m == Mode::csi ? "csi" : "emev"; }

Mode mode_from_string(const std::string& s) {
  if (s == "csi") return Mode::csi;
  if (s == "emev") return Mode::emev;
  throw DomainError("unknown dataset mode '" + s + "' (expected csi or emev)");
}

void GeneratorConfig::validate() const {
  if (per_class < 1) throw DomainError("per_class must be at least 1");
  if (speeds_kmh.empty()) throw DomainError("speed list is empty");
  for (double v : speeds_kmh)
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("speeds must be finite and non-negative");
  if (!(max_snapshot_s >= 0.0)) throw DomainError("max_snapshot_s must be non-negative");
  link.validate();
}

SampleDraw draw_sample(const GeneratorConfig& cfg, std::size_t index) {
  if (index >= cfg.total())
    throw DomainError("sample index " + std::to_string(index) + " outside a dataset of " + std::to_string(cfg.total()));
  SampleDraw d;
  d.index = index;
  d.label = profile_from_index(static_cast<int>(index / cfg.per_class));
  d.seed = derive_seed(cfg.master_seed, index);
  Rng rng(derive_seed(d.seed, kDrawStream));
  d.link = cfg.link;
  d.link.ue_speed_mps = cfg.speeds_kmh[rng.below(cfg.speeds_kmh.size())] / 3.6;
  d.link.snapshot_time_s = rng.uniform(0.0, cfg.max_snapshot_s);
  d.link.travel_azimuth_deg = rng.uniform(0.0, 360.0);
  d.link.delay_spread_s = default_delay_spread(d.label);
  return d;
}

ProfileSet load_profiles(const std::filesystem::path& dir) {
  ProfileSet out;
  for (std::size_t p = 0; p < kNumProfiles; ++p) out[p] = load_profile(profile_from_index(static_cast<int>(p)), dir);
  return out;
}

ChannelTensor sample_channel(const GeneratorConfig& cfg, const ProfileSet& profiles, std::size_t index) {
  const SampleDraw d = draw_sample(cfg, index);
  return generate_channel(profiles[static_cast<std::size_t>(d.label)], d.link, d.seed).h;
}

double measure_power(const ChannelTensor& h) {
  if (h.size() == 0) throw ShapeError("measure_power: empty tensor");
  double acc = 0.0;
  for (const auto& v : h.data()) acc += std::norm(v);
  return acc / static_cast<double>(h.size());
}

ChannelTensor add_awgn(const ChannelTensor& h, double snr_db, std::uint64_t seed) {
  if (std::isnan(snr_db)) throw DomainError("add_awgn: SNR is NaN");
  if (is_clean(snr_db)) return h;
  const double p_h = measure_power(h);
  if (!(p_h > 0.0)) throw DomainError("add_awgn: input has zero power, SNR undefined");
  const double sigma = std::sqrt(p_h * std::pow(10.0, -snr_db / 10.0) / 2.0);
  ChannelTensor out = h;
  Rng rng(seed);
  for (auto& v : out.data()) {
    const double re = rng.normal();
    const double im = rng.normal();
    v += cdouble(sigma * re, sigma * im);
  }
  return out;
}

std::uint64_t noise_seed(std::uint64_t sample_seed, double snr_db) {
  return derive_seed(sample_seed ^ kNoiseStream, std::bit_cast<std::uint64_t>(snr_db));
}

void normalize_power(ChannelTensor& h) {
  const double p = measure_power(h);
  if (!(p > 0.0) || !std::isfinite(p)) throw NumericError("cannot normalize a channel with power " + std::to_string(p));
  const double g = 1.0 / std::sqrt(p);
  for (auto& v : h.data()) v *= g;
}

nn::Shape u_shape(Mode m, const LinkConfig& link) {
  const std::size_t n_rb = static_cast<std::size_t>(link.n_rb), n_r = link.ue.size(), n_t = link.bs.size();
  return m == Mode::csi ? nn::Shape{n_rb, n_r, n_t, 2} : nn::Shape{n_rb, n_r, n_r, 2};
}

nn::Shape s_shape(Mode m, const LinkConfig& link) {
  if (m == Mode::csi) return {};
  return {static_cast<std::size_t>(link.n_rb), link.ue.size(), 1};
}

void append_features(Mode m, const ChannelTensor& h, std::vector<float>& u, std::vector<float>& s) {
  const std::size_t ou = u.size(), os = s.size();
  if (m == Mode::csi) {
    u.resize(ou + 2 * h.size());
  } else {
    u.resize(ou + 2 * h.n_rb() * h.n_r() * h.n_r());
    s.resize(os + h.n_rb() * h.n_r());
  }
  write_features(m, h, u.data() + ou, s.data() + os);
}

Dataset empty_dataset(Mode m, const LinkConfig& link) {
  Dataset d;
  d.mode = m;
  d.n_rb = static_cast<std::uint32_t>(link.n_rb);
  d.n_r = static_cast<std::uint32_t>(link.ue.size());
  d.n_t = static_cast<std::uint32_t>(link.bs.size());
  d.examples.u_shape = u_shape(m, link);
  d.examples.s_shape = s_shape(m, link);
  return d;
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Dataset out;
  out.mode = mode;
  out.n_rb = n_rb;
  out.n_r = n_r;
  out.n_t = n_t;
  out.examples = examples.subset(idx);
  for (auto i : idx) {
    out.seeds.push_back(seeds[i]);
    out.snr_db.push_back(snr_db[i]);
  }
  return out;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.mode == b.mode && a.n_rb == b.n_rb && a.n_r == b.n_r && a.n_t == b.n_t &&
         a.examples.u_shape == b.examples.u_shape && a.examples.s_shape == b.examples.s_shape &&
         a.examples.labels == b.examples.labels && a.seeds == b.seeds &&
         a.examples.u.size() == b.examples.u.size() && a.examples.s.size() == b.examples.s.size() &&
         a.snr_db.size() == b.snr_db.size() &&
         std::memcmp(a.examples.u.data(), b.examples.u.data(), a.examples.u.size() * sizeof(float)) == 0 &&
         std::memcmp(a.examples.s.data(), b.examples.s.data(), a.examples.s.size() * sizeof(float)) == 0 &&
         std::memcmp(a.snr_db.data(), b.snr_db.data(), a.snr_db.size() * sizeof(float)) == 0;
}

Dataset generate_dataset(const GeneratorConfig& cfg, Mode mode, double snr_db) {
  cfg.validate();
  std::vector<std::size_t> idx(cfg.total());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return build(cfg, mode, idx, snr_db);
}

Dataset regenerate_subset(const GeneratorConfig& cfg, Mode mode, std::span<const std::size_t> idx, double snr_db) {
  return build(cfg, mode, idx, snr_db);
}

std::array<std::size_t, 3> split_counts(std::size_t n, std::array<int, 3> ratios) {
  int total = 0;
  for (int r : ratios) {
    if (r <= 0) throw DomainError("split ratios must be positive");
    total += r;
  }
  if (total != 100) throw DomainError("split ratios must sum to 100, got " + std::to_string(total));
  std::array<std::size_t, 3> counts{};
  std::array<std::size_t, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t scaled = n * static_cast<std::size_t>(ratios[k]);
    counts[k] = scaled / 100;
    rem[k] = scaled % 100;
    assigned += counts[k];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i]];
  return counts;
}

Split stratified_split(std::span<const std::uint8_t> labels, std::array<int, 3> ratios, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumProfiles> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= kNumProfiles) throw DomainError("label out of range at sample " + std::to_string(i));
    by_class[labels[i]].push_back(i);
  }
  Split out;
  for (std::size_t c = 0; c < kNumProfiles; ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    const auto counts = split_counts(members.size(), ratios);
    if (counts[0] == 0 || counts[1] == 0 || counts[2] == 0)
      throw DomainError(std::string("class ") + profile_letter(profile_from_index(static_cast<int>(c))) + " has only " +
                        std::to_string(members.size()) + " samples, too few for a " + std::to_string(ratios[0]) +
                        ":" + std::to_string(ratios[1]) + ":" + std::to_string(ratios[2]) + " split");
    Rng rng(derive_seed(seed, c));
    rng.shuffle(members.begin(), members.end());
    auto it = members.begin();
    for (auto [dst, n] : {std::pair{&out.train, counts[0]}, std::pair{&out.val, counts[1]}, std::pair{&out.test, counts[2]}}) {
      dst->insert(dst->end(), it, it + static_cast<std::ptrdiff_t>(n));
      it += static_cast<std::ptrdiff_t>(n);
    }
  }
  for (auto* v : {&out.train, &out.val, &out.test}) std::sort(v->begin(), v->end());
  return out;
}

std::vector<std::uint8_t> serialize(const Dataset& d) {
  const std::size_t vu = u_volume(d), vs = s_volume(d), n = d.size();
  if (d.examples.u.size() != n * vu || d.examples.s.size() != n * vs || d.seeds.size() != n || d.snr_db.size() != n)
    throw ShapeError("serialize: dataset arrays disagree on sample count");
  std::vector<std::uint8_t> out;
  out.reserve(40 + n * ((vu + vs) * 4 + 13));
  out.resize(sizeof kMagic);
  std::memcpy(out.data(), kMagic, sizeof kMagic);
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(d.mode));
  put(out, d.n_rb);
  put(out, d.n_r);
  put(out, d.n_t);
  put(out, static_cast<std::uint64_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto* u = reinterpret_cast<const std::uint8_t*>(d.examples.u.data() + i * vu);
    out.insert(out.end(), u, u + vu * sizeof(float));
    const auto* s = reinterpret_cast<const std::uint8_t*>(d.examples.s.data() + i * vs);
    out.insert(out.end(), s, s + vs * sizeof(float));
    put(out, d.examples.labels[i]);
    put(out, d.seeds[i]);
    put(out, d.snr_db[i]);
  }
  return out;
}

Dataset deserialize(std::span<const std::uint8_t> bytes, const std::string& origin) {
  Reader r(bytes, origin);
  char magic[sizeof kMagic];
  r.take(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw LoadError(origin + ": not a dataset file (bad magic)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) throw LoadError(origin + ": unsupported dataset version " + std::to_string(version));
  const auto mode = r.get<std::uint32_t>("mode");
  if (mode > 1) throw LoadError(origin + ": unknown mode id " + std::to_string(mode));
  LinkConfig link;
  link.n_rb = static_cast<int>(r.get<std::uint32_t>("n_rb"));
  const auto n_r = r.get<std::uint32_t>("n_r");
  const auto n_t = r.get<std::uint32_t>("n_t");
  if (link.n_rb < 1 || n_r < 1 || n_t < 1) throw LoadError(origin + ": zero dimension in header");
  link.ue = ArrayConfig{static_cast<int>(n_r), 1};
  link.bs = ArrayConfig{static_cast<int>(n_t), 1};
  Dataset d = empty_dataset(static_cast<Mode>(mode), link);
  const auto n = r.get<std::uint64_t>("sample count");
  const std::size_t vu = u_volume(d), vs = s_volume(d);
  const std::size_t record = (vu + vs) * sizeof(float) + 1 + 8 + 4;
  if (n > r.remaining() / record) throw LoadError(origin + ": truncated, header declares " + std::to_string(n) + " samples");
  d.examples.u.resize(n * vu);
  d.examples.s.resize(n * vs);
  d.examples.labels.resize(n);
  d.seeds.resize(n);
  d.snr_db.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.take(d.examples.u.data() + i * vu, vu * sizeof(float), "features");
    r.take(d.examples.s.data() + i * vs, vs * sizeof(float), "features");
    d.examples.labels[i] = r.get<std::uint8_t>("label");
    if (d.examples.labels[i] >= kNumProfiles)
      throw LoadError(origin + ": sample " + std::to_string(i) + " has label " + std::to_string(d.examples.labels[i]));
    d.seeds[i] = r.get<std::uint64_t>("seed");
    d.snr_db[i] = r.get<float>("snr");
  }
  if (r.remaining() != 0) throw LoadError(origin + ": " + std::to_string(r.remaining()) + " trailing bytes");
  return d;
}

void write_dataset(const Dataset& d, const std::filesystem::path& path) {
  const auto bytes = serialize(d);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os.flush()) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

} // namespace

Dataset read_dataset(const std::filesystem::path& path) { return deserialize(slurp(path), path.string()); }

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t file_checksum(const std::filesystem::path& path) { return fnv1a(slurp(path)); }

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

using nlohmann::json;

std::string manifest_to_json(const Manifest& m) {
  const auto& g = m.generator;
  json delays = json::object(), checks = json::object();
  for (std::size_t p = 0; p < kNumProfiles; ++p) {
    const Profile id = profile_from_index(static_cast<int>(p));
    delays[std::string(1, profile_letter(id))] = default_delay_spread(id);
    checks[std::string(1, profile_letter(id))] = m.profile_checksums[p];
  }
  json files = json::array();
  for (const auto& f : m.files) files.push_back({{"mode", to_string(f.mode)}, {"name", f.name}, {"checksum", f.checksum}});
  json j = {
      {"format_version", Manifest::kFormatVersion},
      {"generator",
       {{"per_class", g.per_class},
        {"master_seed", g.master_seed},
        {"carrier_hz", g.link.carrier_hz},
        {"scs_hz", g.link.scs_hz},
        {"n_rb", g.link.n_rb},
        {"bs_array", {g.link.bs.rows, g.link.bs.cols}},
        {"ue_array", {g.link.ue.rows, g.link.ue.cols}},
        {"element_spacing", g.link.bs.element_spacing},
        {"speeds_kmh", g.speeds_kmh},
        {"max_snapshot_s", g.max_snapshot_s},
        {"delay_spread_s", delays},
        {"profile_checksums", checks}}},
      {"split",
       {{"ratios", m.ratios}, {"seed", m.split_seed}, {"train", m.split.train}, {"val", m.split.val}, {"test", m.split.test}}},
      {"files", files},
  };
  return j.dump(1) + "\n";
}

Manifest manifest_from_json(const std::string& text, const std::string& origin) {
  Manifest m;
  try {
    const json j = json::parse(text);
    if (j.at("format_version").get<int>() != Manifest::kFormatVersion)
      throw LoadError(origin + ": unsupported manifest version");
    const auto& g = j.at("generator");
    m.generator.per_class = g.at("per_class").get<std::size_t>();
    m.generator.master_seed = g.at("master_seed").get<std::uint64_t>();
    m.generator.link.carrier_hz = g.at("carrier_hz").get<double>();
    m.generator.link.scs_hz = g.at("scs_hz").get<double>();
    m.generator.link.n_rb = g.at("n_rb").get<int>();
    const auto bs = g.at("bs_array").get<std::array<int, 2>>();
    const auto ue = g.at("ue_array").get<std::array<int, 2>>();
    const double spacing = g.at("element_spacing").get<double>();
    m.generator.link.bs = ArrayConfig{bs[0], bs[1], spacing};
    m.generator.link.ue = ArrayConfig{ue[0], ue[1], spacing};
    m.generator.speeds_kmh = g.at("speeds_kmh").get<std::vector<double>>();
    m.generator.max_snapshot_s = g.at("max_snapshot_s").get<double>();
    for (std::size_t p = 0; p < kNumProfiles; ++p)
      m.profile_checksums[p] =
          g.at("profile_checksums").at(std::string(1, profile_letter(profile_from_index(static_cast<int>(p))))).get<std::string>();
    const auto& s = j.at("split");
    m.ratios = s.at("ratios").get<std::array<int, 3>>();
    m.split_seed = s.at("seed").get<std::uint64_t>();
    m.split.train = s.at("train").get<std::vector<std::size_t>>();
    m.split.val = s.at("val").get<std::vector<std::size_t>>();
    m.split.test = s.at("test").get<std::vector<std::size_t>>();
    for (const auto& f : j.at("files"))
      m.files.push_back({mode_from_string(f.at("mode").get<std::string>()), f.at("name").get<std::string>(),
                         f.at("checksum").get<std::string>()});
  } catch (const json::exception& e) {
    throw LoadError(origin + ": malformed manifest: " + e.what());
  } catch (const DomainError& e) {
    throw LoadError(origin + ": " + e.what());
  }
  m.generator.validate();
  return m;
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    os << manifest_to_json(m);
    if (!os.flush()) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open manifest " + path.string());
  return manifest_from_json({std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()}, path.string());
}

} // namespace emev::data
