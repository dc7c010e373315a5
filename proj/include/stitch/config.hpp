#pragma once

// JSON run configuration for the command line tool. See configs/SCHEMA.md.
//
// Every section is optional; missing keys keep their defaults. Unknown keys
// and out-of-range values are collected and reported together.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stitch/error.hpp"
#include "stitch/generator.hpp"
#include "stitch/segnet.hpp"
#include "stitch/signal_bank.hpp"
#include "stitch/waveform.hpp"
#include "stitch/wideband.hpp"

namespace stitch {

struct SynthSection {
  std::size_t duration_samples = 4096;
  double snr_db = 30.0;
};

struct DataSection {
  std::size_t train_count = 2000;
  std::size_t heldout_count = 500;
};

struct TilingSection {
  double bandwidth_multiple = 1.0;  // B_tilde / B
  double overlap = kDefaultOverlap;
  double threshold = kDefaultThreshold;
  std::size_t frame_limit = 0;      // 0: every frame of the input
};

struct BenchSection {
  std::vector<double> multiples{1, 2, 4};
  std::size_t runs = 100;
};

struct PathSection {
  std::string bank = "bank.sbnk";
  std::string train = "train.stch";
  std::string heldout = "heldout.stch";
  std::string checkpoint = "model.sgnt";
  std::string noise_ref = "noise_ref.json";
  std::string input;  // IQF32 capture for `infer`
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t workers = 0;  // 0: hardware concurrency
  std::string out_dir = "out";
  SynthSection synth;
  SyntheticBankOptions bank;
  GeneratorConfig generator;
  DataSection data;
  nn::SegNetConfig model;
  nn::TrainHyper train;
  TilingSection tiling;
  BenchSection bench;
  PathSection paths;

  /// Output-relative path resolution.
  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : std::filesystem::path(out_dir) / path;
  }
};

namespace detail {

class ConfigReader {
 public:
  std::vector<std::string> errors;

  template <class T>
  void read(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      errors.push_back(where + "." + key + ": wrong type");
    }
  }

  void known(const nlohmann::json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    if (!obj.is_object()) {
      errors.push_back(where + ": expected an object");
      return;
    }
    for (const auto& [k, v] : obj.items()) {
      bool found = false;
      for (const char* key : keys) found = found || k == key;
      if (!found) errors.push_back(where + "." + k + ": unknown key");
    }
  }

  const nlohmann::json& section(const nlohmann::json& root, const char* key) {
    static const nlohmann::json empty = nlohmann::json::object();
    return root.contains(key) ? root.at(key) : empty;
  }
};

}  // namespace detail

/// All constraint violations of a resolved configuration.
inline std::vector<std::string> config_violations(const RunConfig& c) {
  std::vector<std::string> out;
  for (const auto& v : c.generator.violations()) out.push_back("generator: " + v);
  for (const auto& v : c.model.violations()) out.push_back("model: " + v);
  if (c.model.n_iq != c.generator.n_iq) out.emplace_back("model: n_iq must equal generator.n_iq");
  if (c.model.classes != static_cast<std::size_t>(c.generator.class_count)) {
    out.emplace_back("model: classes must equal generator.class_count");
  }
  if (c.generator.class_count > static_cast<int>(default_classes().size())) {
    out.emplace_back("generator: class_count exceeds the " + std::to_string(default_classes().size()) +
                     " synthesizable classes");
  }
  if (c.synth.duration_samples < 64) out.emplace_back("synth: duration_samples must be >= 64");
  if (c.bank.captures_per_class == 0) out.emplace_back("bank: captures_per_class must be positive");
  if (!is_power_of_two(c.bank.build.fft_size)) out.emplace_back("bank: fft_size must be a power of two");
  if (c.bank.build.fft_size != c.generator.n_iq) out.emplace_back("bank: fft_size must equal generator.n_iq");
  if (c.bank.burst_samples < c.bank.build.fft_size) out.emplace_back("bank: burst_samples must be >= fft_size");
  if (!(c.bank.build.silence_threshold > 0 && c.bank.build.silence_threshold < 1)) {
    out.emplace_back("bank: silence_threshold must lie in (0, 1)");
  }
  if (c.bank.sample_rate_hz != c.generator.bandwidth_hz) {
    out.emplace_back("bank: sample_rate_hz must equal generator.bandwidth_hz");
  }
  if (c.data.train_count == 0) out.emplace_back("data: train_count must be positive");
  if (!(c.train.lr >= 0)) out.emplace_back("train: lr must be non-negative");
  if (!(c.train.weight_decay >= 0)) out.emplace_back("train: weight_decay must be non-negative");
  if (c.train.batch_size == 0) out.emplace_back("train: batch_size must be positive");
  if (c.train.epochs == 0) out.emplace_back("train: epochs must be positive");
  if (!(c.tiling.bandwidth_multiple >= 1)) out.emplace_back("tiling: bandwidth_multiple must be >= 1");
  {
    const double nt = c.tiling.bandwidth_multiple * static_cast<double>(c.generator.n_iq);
    if (std::abs(nt - std::round(nt)) > 1e-9 * nt) {
      out.emplace_back("tiling: bandwidth_multiple * n_iq must be an integer");
    }
  }
  if (!(c.tiling.overlap >= 0 && c.tiling.overlap < 1)) out.emplace_back("tiling: overlap must lie in [0, 1)");
  if (!(c.tiling.threshold > 0 && c.tiling.threshold < 1)) out.emplace_back("tiling: threshold must lie in (0, 1)");
  if (c.bench.runs < 100) out.emplace_back("bench: runs must be >= 100");
  if (c.bench.multiples.empty()) out.emplace_back("bench: multiples must be nonempty");
  for (double m : c.bench.multiples) {
    if (!(m >= 1)) out.emplace_back("bench: every multiple must be >= 1");
  }
  return out;
}

/// Parses a configuration document. Throws InvalidConfig listing every
/// problem found.
inline RunConfig parse_config(const nlohmann::json& root) {
  RunConfig c;
  detail::ConfigReader r;
  r.known(root, {"seed", "workers", "out_dir", "synth", "bank", "generator", "data", "model", "train", "tiling",
                 "bench", "paths"},
          "config");
  r.read(root, "seed", c.seed, "config");
  r.read(root, "workers", c.workers, "config");
  r.read(root, "out_dir", c.out_dir, "config");

  const auto& sy = r.section(root, "synth");
  r.known(sy, {"duration_samples", "snr_db"}, "synth");
  r.read(sy, "duration_samples", c.synth.duration_samples, "synth");
  r.read(sy, "snr_db", c.synth.snr_db, "synth");

  const auto& bk = r.section(root, "bank");
  r.known(bk, {"captures_per_class", "burst_samples", "max_pad", "snr_db", "sample_rate_hz", "fft_size",
               "silence_threshold", "min_fragments", "max_fragments", "lte_hole_fraction"},
          "bank");
  r.read(bk, "captures_per_class", c.bank.captures_per_class, "bank");
  r.read(bk, "burst_samples", c.bank.burst_samples, "bank");
  r.read(bk, "max_pad", c.bank.max_pad, "bank");
  r.read(bk, "snr_db", c.bank.snr_db, "bank");
  r.read(bk, "sample_rate_hz", c.bank.sample_rate_hz, "bank");
  r.read(bk, "fft_size", c.bank.build.fft_size, "bank");
  r.read(bk, "silence_threshold", c.bank.build.silence_threshold, "bank");
  r.read(bk, "min_fragments", c.bank.build.min_fragments, "bank");
  r.read(bk, "max_fragments", c.bank.build.max_fragments, "bank");
  r.read(bk, "lte_hole_fraction", c.bank.waveform.lte_hole_fraction, "bank");

  const auto& ge = r.section(root, "generator");
  r.known(ge, {"class_count", "bandwidth_hz", "max_signals", "p_empty", "p_center", "n_iq", "noise_power",
               "snr_min_db", "snr_max_db"},
          "generator");
  r.read(ge, "class_count", c.generator.class_count, "generator");
  r.read(ge, "bandwidth_hz", c.generator.bandwidth_hz, "generator");
  r.read(ge, "max_signals", c.generator.max_signals, "generator");
  r.read(ge, "p_empty", c.generator.p_empty, "generator");
  r.read(ge, "p_center", c.generator.p_center, "generator");
  r.read(ge, "n_iq", c.generator.n_iq, "generator");
  r.read(ge, "noise_power", c.generator.noise_power, "generator");
  r.read(ge, "snr_min_db", c.generator.snr_min_db, "generator");
  r.read(ge, "snr_max_db", c.generator.snr_max_db, "generator");

  const auto& da = r.section(root, "data");
  r.known(da, {"train_count", "heldout_count"}, "data");
  r.read(da, "train_count", c.data.train_count, "data");
  r.read(da, "heldout_count", c.data.heldout_count, "data");

  c.model.n_iq = c.generator.n_iq;
  c.model.classes = static_cast<std::size_t>(std::max(0, c.generator.class_count));
  const auto& mo = r.section(root, "model");
  r.known(mo, {"widths", "nonlocal_dim", "use_nonlocal", "nonlocal_residual", "input_features"}, "model");
  if (mo.contains("widths")) {
    std::vector<std::size_t> w;
    r.read(mo, "widths", w, "model");
    if (w.size() == nn::kStages) {
      std::copy(w.begin(), w.end(), c.model.widths.begin());
    } else {
      r.errors.push_back("model.widths: expected " + std::to_string(nn::kStages) + " entries");
    }
  }
  r.read(mo, "nonlocal_dim", c.model.nonlocal_dim, "model");
  r.read(mo, "use_nonlocal", c.model.use_nonlocal, "model");
  r.read(mo, "nonlocal_residual", c.model.nonlocal_residual, "model");
  if (mo.contains("input_features")) {
    std::string f;
    const auto before = r.errors.size();
    r.read(mo, "input_features", f, "model");
    if (const auto v = nn::input_features_from_string(f)) {
      c.model.features = *v;
    } else if (r.errors.size() == before) {
      r.errors.push_back("model.input_features: expected iq, log_iq or log_magnitude");
    }
  }

  const auto& tr = r.section(root, "train");
  r.known(tr, {"lr", "lr_final", "batch_size", "epochs", "momentum", "weight_decay", "mirror_bins"}, "train");
  r.read(tr, "lr", c.train.lr, "train");
  r.read(tr, "lr_final", c.train.lr_final, "train");
  r.read(tr, "batch_size", c.train.batch_size, "train");
  r.read(tr, "epochs", c.train.epochs, "train");
  r.read(tr, "momentum", c.train.momentum, "train");
  r.read(tr, "weight_decay", c.train.weight_decay, "train");
  r.read(tr, "mirror_bins", c.train.mirror_bins, "train");

  const auto& ti = r.section(root, "tiling");
  r.known(ti, {"bandwidth_multiple", "overlap", "threshold", "frame_limit"}, "tiling");
  r.read(ti, "bandwidth_multiple", c.tiling.bandwidth_multiple, "tiling");
  r.read(ti, "overlap", c.tiling.overlap, "tiling");
  r.read(ti, "threshold", c.tiling.threshold, "tiling");
  r.read(ti, "frame_limit", c.tiling.frame_limit, "tiling");

  const auto& be = r.section(root, "bench");
  r.known(be, {"multiples", "runs"}, "bench");
  r.read(be, "multiples", c.bench.multiples, "bench");
  r.read(be, "runs", c.bench.runs, "bench");

  const auto& pa = r.section(root, "paths");
  r.known(pa, {"bank", "train", "heldout", "checkpoint", "noise_ref", "input"}, "paths");
  r.read(pa, "bank", c.paths.bank, "paths");
  r.read(pa, "train", c.paths.train, "paths");
  r.read(pa, "heldout", c.paths.heldout, "paths");
  r.read(pa, "checkpoint", c.paths.checkpoint, "paths");
  r.read(pa, "noise_ref", c.paths.noise_ref, "paths");
  r.read(pa, "input", c.paths.input, "paths");

  c.generator.master_seed = c.seed;
  c.train.seed = c.seed;
  if (!bk.contains("fft_size")) c.bank.build.fft_size = c.generator.n_iq;
  if (!bk.contains("sample_rate_hz")) c.bank.sample_rate_hz = c.generator.bandwidth_hz;

  auto errors = r.errors;
  for (auto& v : config_violations(c)) errors.push_back(std::move(v));
  if (!errors.empty()) {
    std::string msg = std::to_string(errors.size()) + " problem(s):";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw Error(Errc::InvalidConfig, msg);
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::NotFound, "config not found: " + path.string());
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
  return parse_config(root);
}

/// Resolved configuration as JSON, in the same shape as the input format.
inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["out_dir"] = c.out_dir;
  j["synth"] = {{"duration_samples", c.synth.duration_samples}, {"snr_db", c.synth.snr_db}};
  j["bank"] = {{"captures_per_class", c.bank.captures_per_class},
               {"burst_samples", c.bank.burst_samples},
               {"max_pad", c.bank.max_pad},
               {"snr_db", c.bank.snr_db},
               {"sample_rate_hz", c.bank.sample_rate_hz},
               {"fft_size", c.bank.build.fft_size},
               {"silence_threshold", c.bank.build.silence_threshold},
               {"min_fragments", c.bank.build.min_fragments},
               {"max_fragments", c.bank.build.max_fragments},
               {"lte_hole_fraction", c.bank.waveform.lte_hole_fraction}};
  j["generator"] = {{"class_count", c.generator.class_count}, {"bandwidth_hz", c.generator.bandwidth_hz},
                    {"max_signals", c.generator.max_signals}, {"p_empty", c.generator.p_empty},
                    {"p_center", c.generator.p_center},       {"n_iq", c.generator.n_iq},
                    {"noise_power", c.generator.noise_power}, {"snr_min_db", c.generator.snr_min_db},
                    {"snr_max_db", c.generator.snr_max_db}};
  j["data"] = {{"train_count", c.data.train_count}, {"heldout_count", c.data.heldout_count}};
  j["model"] = {{"widths", std::vector<std::size_t>(c.model.widths.begin(), c.model.widths.end())},
                {"nonlocal_dim", c.model.nonlocal_dim},
                {"use_nonlocal", c.model.use_nonlocal},
                {"nonlocal_residual", c.model.nonlocal_residual},
                {"input_features", nn::to_string(c.model.features)}};
  j["train"] = {{"lr", c.train.lr},
                {"lr_final", c.train.lr_final},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"momentum", c.train.momentum},
                {"weight_decay", c.train.weight_decay},
                {"mirror_bins", c.train.mirror_bins}};
  j["tiling"] = {{"bandwidth_multiple", c.tiling.bandwidth_multiple},
                 {"overlap", c.tiling.overlap},
                 {"threshold", c.tiling.threshold},
                 {"frame_limit", c.tiling.frame_limit}};
  j["bench"] = {{"multiples", c.bench.multiples}, {"runs", c.bench.runs}};
  j["paths"] = {{"bank", c.paths.bank},           {"train", c.paths.train},
                {"heldout", c.paths.heldout},     {"checkpoint", c.paths.checkpoint},
                {"noise_ref", c.paths.noise_ref}, {"input", c.paths.input}};
  return j;
}

}  // namespace stitch
