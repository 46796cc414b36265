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

// Command-line driver: generate, train, eval, overhead, los-prob.
// Exit codes: 0 success, 1 usage, 2 runtime failure.

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "emev/channel.hpp"
#include "emev/dataset.hpp"
#include "emev/errors.hpp"
#include "emev/nn/model.hpp"
#include "emev/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace emev;

namespace {

constexpr const char* kSchema = "emev-results/1";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string timestamp() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string config_hash(const json& config) {
  const auto text = config.dump();
  return data::hex64(data::fnv1a({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()}));
}

json envelope(const std::string& command, const json& config) {
  return {{"schema", kSchema}, {"command", command}, {"config", config}, {"config_hash", config_hash(config)},
          {"created", timestamp()}};
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    os << text;
    if (!os.flush()) throw IoError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

// One process per output directory.
class DirLock {
public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".emev.lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw IoError("output directory " + dir.string() + " is locked by another run (remove " + path_.string() +
                    " if no other run is active)");
    const auto pid = std::to_string(::getpid()) + "\n";
    if (::write(fd_, pid.data(), pid.size()) < 0) { /* advisory content only */
    }
  }
  ~DirLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

private:
  fs::path path_;
  int fd_ = -1;
};

std::array<std::string, kNumProfiles> profile_checksums(const fs::path& dir) {
  std::array<std::string, kNumProfiles> out;
  for (std::size_t p = 0; p < kNumProfiles; ++p)
    out[p] = data::hex64(data::file_checksum(dir / profile_file_name(profile_from_index(static_cast<int>(p)))));
  return out;
}

const data::Manifest::File& find_file(const data::Manifest& m, data::Mode mode, const fs::path& dir) {
  for (const auto& f : m.files)
    if (f.mode == mode) return f;
  throw UsageError("dataset in " + dir.string() + " has no " + data::to_string(mode) +
                   " features; regenerate with --mode " + data::to_string(mode) + " or --mode both");
}

data::Dataset load_verified(const data::Manifest& m, data::Mode mode, const fs::path& dir) {
  const auto& f = find_file(m, mode, dir);
  const auto path = dir / f.name;
  if (!fs::exists(path)) throw LoadError("dataset file missing: " + path.string());
  const auto sum = data::hex64(data::file_checksum(path));
  if (sum != f.checksum) throw LoadError(path.string() + ": checksum " + sum + " does not match manifest " + f.checksum);
  return data::read_dataset(path);
}

data::Manifest load_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  if (!fs::exists(path)) throw LoadError("no dataset at " + dir.string() + " (missing manifest.json)");
  return data::read_manifest(path);
}

data::Mode mode_for(nn::Arch a) { return a == nn::Arch::emev_idnet ? data::Mode::emev : data::Mode::csi; }

json confusion_json(const nn::Confusion& c) {
  json rows = json::array();
  for (const auto& r : c) rows.push_back(r);
  return rows;
}

json per_class_accuracy(const nn::Confusion& c) {
  json out = json::object();
  for (std::size_t k = 0; k < kNumProfiles; ++k) {
    std::size_t n = 0;
    for (auto v : c[k]) n += v;
    out[std::string("CDL-") + profile_letter(profile_from_index(static_cast<int>(k)))] =
        n ? static_cast<double>(c[k][k]) / static_cast<double>(n) : 0.0;
  }
  return out;
}

// Fraction of samples whose predicted LOS/NLOS group differs from the truth.
double los_group_confusion(const nn::Confusion& c) {
  std::size_t wrong = 0, total = 0;
  for (std::size_t t = 0; t < kNumProfiles; ++t)
    for (std::size_t p = 0; p < kNumProfiles; ++p) {
      total += c[t][p];
      if ((t >= 3) != (p >= 3)) wrong += c[t][p];
    }
  return total ? static_cast<double>(wrong) / static_cast<double>(total) : 0.0;
}

std::string confusion_csv(const nn::Confusion& c) {
  std::string out = "true\\pred,A,B,C,D,E\n";
  for (std::size_t t = 0; t < kNumProfiles; ++t) {
    out += profile_letter(profile_from_index(static_cast<int>(t)));
    for (auto v : c[t]) out += "," + std::to_string(v);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::size_t per_class = 2000;
  std::uint64_t seed = 42;
  std::optional<std::uint64_t> split_seed;
  fs::path out;
  std::string mode = "both";
  std::optional<fs::path> profile_dir;
};

int cmd_generate(const GenerateArgs& a) {
  if (a.per_class < 1) throw UsageError("--per-class must be at least 1");
  std::vector<data::Mode> modes;
  if (a.mode == "both") modes = {data::Mode::emev, data::Mode::csi};
  else modes = {data::mode_from_string(a.mode)};

  data::Manifest m;
  m.generator.per_class = a.per_class;
  m.generator.master_seed = a.seed;
  if (a.profile_dir) m.generator.profile_dir = *a.profile_dir;
  m.generator.validate();
  m.split_seed = a.split_seed.value_or(a.seed);
  m.profile_checksums = profile_checksums(m.generator.profile_dir);

  DirLock lock(a.out);
  for (auto mode : modes) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = data::generate_dataset(m.generator, mode);
    const std::string name = std::string(data::to_string(mode)) + ".bin";
    data::write_dataset(d, a.out / name);
    m.files.push_back({mode, name, data::hex64(data::file_checksum(a.out / name))});
    if (m.split.train.empty()) m.split = data::stratified_split(d.examples.labels, m.ratios, m.split_seed);
    std::cerr << "generated " << d.size() << " " << data::to_string(mode) << " samples in "
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
  }
  data::write_manifest(m, a.out / "manifest.json");

  std::cout << "dataset     " << a.out.string() << "\n"
            << "samples     " << m.generator.total() << " (" << m.generator.per_class << " per class)\n"
            << "master seed " << m.generator.master_seed << "\n"
            << "split       " << m.split.train.size() << " / " << m.split.val.size() << " / " << m.split.test.size()
            << " (seed " << m.split_seed << ")\n";
  for (const auto& f : m.files) std::cout << "file        " << f.name << "  fnv1a " << f.checksum << "\n";
  return 0;
}

struct TrainArgs {
  std::string arch = "emev";
  fs::path data;
  fs::path out;
  nn::TrainConfig cfg{1e-3, 30, 64, 1, 3, 1e-4};
};

int cmd_train(const TrainArgs& a) {
  const auto arch = nn::arch_from_string(a.arch);
  if (!(a.cfg.learning_rate > 0.0)) throw UsageError("--lr must be positive");
  if (a.cfg.epochs < 1) throw UsageError("--epochs must be at least 1");
  if (a.cfg.batch_size < 1) throw UsageError("--batch must be at least 1");
  const fs::path out = a.out.empty() ? a.data : a.out;

  const auto m = load_manifest(a.data);
  const auto d = load_verified(m, mode_for(arch), a.data);
  const auto spec = nn::make_spec(arch, d.n_rb, d.n_r, d.n_t);
  const auto train_set = d.subset(m.split.train);
  const auto val_set = d.subset(m.split.val);

  DirLock lock(out);
  const json config = {{"arch", nn::to_string(arch)},
                       {"data", fs::absolute(a.data).string()},
                       {"dataset_checksum", find_file(m, mode_for(arch), a.data).checksum},
                       {"master_seed", m.generator.master_seed},
                       {"epochs", a.cfg.epochs},
                       {"learning_rate", a.cfg.learning_rate},
                       {"batch_size", a.cfg.batch_size},
                       {"seed", a.cfg.seed},
                       {"patience", a.cfg.patience},
                       {"min_delta", a.cfg.min_delta}};

  std::string csv = "epoch,train_loss,train_accuracy,val_loss,val_accuracy,seconds\n";
  const auto result = nn::train(spec, train_set.examples, val_set.examples, a.cfg, [&](const nn::EpochRecord& r) {
    char line[160];
    std::snprintf(line, sizeof line, "%d,%.6f,%.6f,%.6f,%.6f,%.3f\n", r.epoch, r.train_loss, r.train_accuracy,
                  r.val_loss, r.val_accuracy, r.seconds);
    csv += line;
    std::fprintf(stderr, "epoch %3d  loss %.4f  acc %.4f  val_loss %.4f  val_acc %.4f  (%.1f s)\n", r.epoch,
                 r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy, r.seconds);
  });

  const std::string stem = nn::to_string(arch);
  const auto ckpt = out / (stem + ".ckpt");
  nn::save_checkpoint(*result.model, ckpt);
  write_text(out / (stem + "_history.csv"), csv);

  json j = envelope("train", config);
  j["checkpoint"] = ckpt.filename().string();
  j["checkpoint_checksum"] = data::hex64(data::file_checksum(ckpt));
  j["converged"] = result.converged;
  j["epochs_run"] = result.history.size();
  j["final_val_accuracy"] = result.history.back().val_accuracy;
  j["final_val_loss"] = result.history.back().val_loss;
  write_text(out / (stem + "_train.json"), j.dump(1) + "\n");

  std::cout << "checkpoint       " << ckpt.string() << "\n"
            << "epochs run       " << result.history.size() << (result.converged ? " (converged)" : "") << "\n"
            << "final val acc    " << result.history.back().val_accuracy << "\n";
  return 0;
}

struct EvalArgs {
  fs::path checkpoint;
  fs::path data;
  fs::path out;
  std::vector<double> snr;
  std::optional<fs::path> profile_dir;
};

int cmd_eval(const EvalArgs& a) {
  if (!fs::exists(a.checkpoint)) throw LoadError("checkpoint not found: " + a.checkpoint.string());
  auto model = nn::load_checkpoint(a.checkpoint);
  const auto arch = model->spec().arch;
  const auto mode = mode_for(arch);
  auto m = load_manifest(a.data);
  const auto d = load_verified(m, mode, a.data);
  if (d.n_rb != model->spec().n_rb || d.n_r != model->spec().n_r || d.n_t != model->spec().n_t)
    throw UsageError("checkpoint dimensions do not match the dataset");
  const fs::path out = a.out.empty() ? a.checkpoint.parent_path() : a.out;
  const auto test_set = d.subset(m.split.test);

  DirLock lock(out);
  const auto clean = nn::evaluate(*model, test_set.examples);

  json config = {{"arch", nn::to_string(arch)},
                 {"checkpoint", fs::absolute(a.checkpoint).string()},
                 {"checkpoint_checksum", data::hex64(data::file_checksum(a.checkpoint))},
                 {"data", fs::absolute(a.data).string()},
                 {"dataset_checksum", find_file(m, mode, a.data).checksum},
                 {"master_seed", m.generator.master_seed},
                 {"snr_db", a.snr}};
  json j = envelope("eval", config);
  j["test_samples"] = clean.samples;
  j["clean"] = {{"accuracy", clean.accuracy},
                {"loss", clean.loss},
                {"per_class_accuracy", per_class_accuracy(clean.confusion)},
                {"los_nlos_confusion", los_group_confusion(clean.confusion)},
                {"confusion", confusion_json(clean.confusion)}};

  const std::string stem = nn::to_string(arch);
  write_text(out / (stem + "_confusion.csv"), confusion_csv(clean.confusion));
  std::cout << "clean accuracy   " << clean.accuracy << " on " << clean.samples << " test samples\n";

  if (!a.snr.empty()) {
    if (a.profile_dir) m.generator.profile_dir = *a.profile_dir;
    if (profile_checksums(m.generator.profile_dir) != m.profile_checksums)
      throw LoadError("profile tables in " + m.generator.profile_dir.string() +
                      " differ from those used to generate the dataset");
    std::string csv = "snr_db,accuracy,loss\n";
    json sweep = json::array();
    for (double snr : a.snr) {
      const auto noisy = data::regenerate_subset(m.generator, mode, m.split.test, snr);
      const auto r = nn::evaluate(*model, noisy.examples);
      sweep.push_back({{"snr_db", snr}, {"accuracy", r.accuracy}, {"loss", r.loss},
                       {"per_class_accuracy", per_class_accuracy(r.confusion)}, {"confusion", confusion_json(r.confusion)}});
      char line[96];
      std::snprintf(line, sizeof line, "%g,%.6f,%.6f\n", snr, r.accuracy, r.loss);
      csv += line;
      std::cout << "snr " << snr << " dB  accuracy " << r.accuracy << "\n";
    }
    j["snr_sweep"] = sweep;
    write_text(out / (stem + "_accuracy_vs_snr.csv"), csv);
  }
  write_text(out / (stem + "_metrics.json"), j.dump(1) + "\n");
  return 0;
}

struct OverheadArgs {
  fs::path out;
  int reps = 200;
  std::uint64_t seed = 1;
};

int cmd_overhead(const OverheadArgs& a) {
  if (a.reps < 1) throw UsageError("--reps must be at least 1");
  struct Row {
    std::size_t params, flops, file_bytes;
    double latency_s;
  };
  std::array<Row, 2> rows{};
  const std::array<nn::Arch, 2> archs = {nn::Arch::emev_idnet, nn::Arch::csi_idnet};
  for (std::size_t i = 0; i < 2; ++i) {
    const auto spec = nn::make_spec(archs[i], 13, 4, 64);
    nn::Model<float> model(spec, a.seed);
    nn::Examples one;
    one.u_shape = spec.input_u;
    one.s_shape = spec.input_s;
    Rng rng(a.seed);
    std::vector<float> u(nn::volume(spec.input_u)), s(spec.input_s.empty() ? 0 : nn::volume(spec.input_s));
    for (auto& v : u) v = static_cast<float>(rng.normal());
    for (auto& v : s) v = static_cast<float>(rng.uniform(0.0, 4.0));
    one.append(u, s, 0);
    rows[i] = {nn::count_params(spec), nn::count_flops(spec), nn::checkpoint_size(spec),
               nn::inference_latency(model, one, 0, a.reps)};
  }
  auto ratio = [](double x, double y) { return y > 0 ? x / y : 0.0; };
  const json config = {{"reps", a.reps}, {"seed", a.seed}, {"n_rb", 13}, {"n_r", 4}, {"n_t", 64}};
  json j = envelope("overhead", config);
  for (std::size_t i = 0; i < 2; ++i)
    j[nn::to_string(archs[i])] = {{"params", rows[i].params},
                                  {"flops", rows[i].flops},
                                  {"checkpoint_bytes", rows[i].file_bytes},
                                  {"median_latency_s", rows[i].latency_s}};
  j["ratio_emev_over_csi"] = {{"params", ratio(rows[0].params, rows[1].params)},
                              {"flops", ratio(rows[0].flops, rows[1].flops)},
                              {"checkpoint_bytes", ratio(rows[0].file_bytes, rows[1].file_bytes)},
                              {"latency", ratio(rows[0].latency_s, rows[1].latency_s)}};

  std::printf("%-18s %14s %14s %10s\n", "", "EMEV-IdNet", "CSI-IdNet", "ratio");
  std::printf("%-18s %14zu %14zu %9.2f%%\n", "parameters", rows[0].params, rows[1].params,
              100 * ratio(rows[0].params, rows[1].params));
  std::printf("%-18s %14zu %14zu %9.2f%%\n", "FLOPs", rows[0].flops, rows[1].flops,
              100 * ratio(rows[0].flops, rows[1].flops));
  std::printf("%-18s %14zu %14zu %9.2f%%\n", "checkpoint bytes", rows[0].file_bytes, rows[1].file_bytes,
              100 * ratio(rows[0].file_bytes, rows[1].file_bytes));
  std::printf("%-18s %11.1f us %11.1f us %9.2f%%\n", "median latency", rows[0].latency_s * 1e6,
              rows[1].latency_s * 1e6, 100 * ratio(rows[0].latency_s, rows[1].latency_s));

  if (!a.out.empty()) {
    DirLock lock(a.out);
    write_text(a.out / "overhead.json", j.dump(1) + "\n");
  }
  return 0;
}

int cmd_los_prob(double d2d, double hut) {
  double p = 0.0;
  try {
    p = los_probability(d2d, hut);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  std::printf("%.10g\n", p);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"EMEV channel identification workbench"};
  app.require_subcommand(1);

  GenerateArgs gen;
  std::string profile_dir_gen;
  auto* g = app.add_subcommand("generate", "Generate a labelled CDL dataset with a stratified split");
  g->add_option("--per-class", gen.per_class, "Samples per CDL profile")->capture_default_str();
  g->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  g->add_option("--split-seed", gen.split_seed, "Split shuffle seed (default: master seed)");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--mode", gen.mode, "Features to write")->check(CLI::IsMember({"emev", "csi", "both"}))->capture_default_str();
  g->add_option("--profile-dir", profile_dir_gen, "CDL table directory (default: $EMEV_PROFILE_DIR or built-in)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train EMEV-IdNet or CSI-IdNet on a generated dataset");
  t->add_option("--arch", tr.arch, "Architecture")->check(CLI::IsMember({"emev", "csi"}))->capture_default_str();
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--out", tr.out, "Output directory (default: dataset directory)");
  t->add_option("--epochs", tr.cfg.epochs, "Maximum epochs")->capture_default_str();
  t->add_option("--lr", tr.cfg.learning_rate, "Adam learning rate")->capture_default_str();
  t->add_option("--batch", tr.cfg.batch_size, "Mini-batch size")->capture_default_str();
  t->add_option("--seed", tr.cfg.seed, "Initialisation and shuffle seed")->capture_default_str();
  t->add_option("--patience", tr.cfg.patience, "Epochs without val-loss improvement before stopping")
      ->capture_default_str();
  t->add_option("--min-delta", tr.cfg.min_delta, "Minimum val-loss improvement")->capture_default_str();

  EvalArgs ev;
  std::string profile_dir_eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on the test split, optionally under AWGN");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--out", ev.out, "Output directory (default: checkpoint directory)");
  e->add_option("--snr", ev.snr, "SNR grid in dB, e.g. --snr 10,12,14,16,18,20")->delimiter(',');
  e->add_option("--profile-dir", profile_dir_eval, "CDL table directory for regenerating noisy channels");

  OverheadArgs ov;
  auto* o = app.add_subcommand("overhead", "Report parameters, FLOPs, checkpoint size and CPU latency");
  o->add_option("--out", ov.out, "Directory for overhead.json (optional)");
  o->add_option("--reps", ov.reps, "Latency repetitions")->capture_default_str();
  o->add_option("--seed", ov.seed, "Weight and input seed")->capture_default_str();

  double d2d = 0.0, hut = 1.5;
  auto* l = app.add_subcommand("los-prob", "UMa line-of-sight probability");
  l->add_option("--d2d", d2d, "2D distance in metres")->required();
  l->add_option("--hut", hut, "UE height in metres")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 1;
  }

  try {
    if (!profile_dir_gen.empty()) gen.profile_dir = profile_dir_gen;
    if (!profile_dir_eval.empty()) ev.profile_dir = profile_dir_eval;
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*o) return cmd_overhead(ov);
    if (*l) return cmd_los_prob(d2d, hut);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 1;
  } catch (const DomainError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 1;
}
