// stitch: synthesize -> bank -> generate -> train -> infer -> eval -> bench
//
// Every subcommand takes --config, --seed, --workers and --out. Artifacts land
// under the output directory; relative paths in the config resolve against it.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "stitch/stitch.hpp"

namespace fs = std::filesystem;
using namespace stitch;

namespace {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level log_level() {
  const char* env = std::getenv("STITCH_LOG");
  if (!env) return Level::Info;
  const std::string v(env);
  if (v == "error") return Level::Error;
  if (v == "warn") return Level::Warn;
  if (v == "debug") return Level::Debug;
  return Level::Info;
}

void log(Level level, const std::string& msg) {
  static const Level threshold = log_level();
  if (level > threshold) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << '\n';
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
};

RunConfig resolve(const Common& c, const std::string& command) {
  nlohmann::json root = nlohmann::json::object();
  if (!c.config.empty()) {
    std::ifstream is(c.config);
    if (!is) throw Error(Errc::NotFound, "config not found: " + c.config);
    try {
      root = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::InvalidConfig, c.config + ": " + e.what());
    }
  }
  if (c.seed) root["seed"] = *c.seed;
  if (c.workers) root["workers"] = *c.workers;
  if (c.out) root["out_dir"] = *c.out;
  RunConfig cfg = parse_config(root);
  if (cfg.workers == 0) cfg.workers = std::max(1u, std::thread::hardware_concurrency());
  fs::create_directories(cfg.out_dir);
  log(Level::Info, command + " config: " + config_to_json(cfg).dump());
  return cfg;
}

std::vector<std::string> class_names(const RunConfig& cfg) {
  std::vector<std::string> out;
  for (int c = 1; c <= cfg.generator.class_count; ++c) out.push_back(class_by_id(c).name);
  return out;
}

std::vector<ProtocolClass> active_classes(const RunConfig& cfg) {
  const auto& all = default_classes();
  return {all.begin(), all.begin() + cfg.generator.class_count};
}

void write_noise_ref(const fs::path& path, const NoiseReference& ref, std::size_t n_iq) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::Io, "cannot write " + path.string());
  os << nlohmann::json{{"ref_floor", ref.ref_floor}, {"window_bins", kFloorWindow}, {"n_iq", n_iq}}.dump(2) << '\n';
}

NoiseReference read_noise_ref(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::NotFound, "noise reference not found: " + path.string());
  try {
    const auto j = nlohmann::json::parse(is);
    NoiseReference ref{j.at("ref_floor").get<double>()};
    if (!(ref.ref_floor > 0)) throw Error(Errc::ZeroFloor, "stored ref_floor is not positive");
    return ref;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
}

nn::SegNet<float> load_model(const RunConfig& cfg) {
  return nn::checkpoint_load<float>(cfg.resolve(cfg.paths.checkpoint), &cfg.model);
}

// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig& cfg) {
  const fs::path dir = fs::path(cfg.out_dir) / "synth";
  fs::create_directories(dir);
  for (const auto& cls : active_classes(cfg)) {
    SynthParams p{cls, cfg.synth.duration_samples, cfg.synth.snr_db, mix_seed(cfg.seed, static_cast<std::uint64_t>(cls.id)),
                  cfg.bank.sample_rate_hz, cfg.bank.waveform};
    const fs::path path = dir / (cls.name + ".iqf32");
    write_iqf32(path, synthesize(p), cls.name, 0.0);
    log(Level::Info, "wrote " + path.string());
  }
  return 0;
}

int cmd_bank(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const SignalBank bank = build_synthetic_bank(active_classes(cfg), cfg.bank, cfg.seed);
  const fs::path path = cfg.resolve(cfg.paths.bank);
  bank_save(bank, path);
  log(Level::Info, "wrote " + path.string() + " (" + std::to_string(bank.entries.size()) + " entries, " +
                       std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) +
                       " s)");
  return 0;
}

int cmd_generate(const RunConfig& cfg) {
  const SignalBank bank = bank_load(cfg.resolve(cfg.paths.bank));
  const fs::path train = cfg.resolve(cfg.paths.train);
  const fs::path heldout = cfg.resolve(cfg.paths.heldout);
  generate_dataset(cfg.generator, bank, cfg.data.train_count, train, cfg.workers, 0);
  log(Level::Info, "wrote " + train.string());
  if (cfg.data.heldout_count > 0) {
    generate_dataset(cfg.generator, bank, cfg.data.heldout_count, heldout, cfg.workers, kHeldoutFirstIndex);
    log(Level::Info, "wrote " + heldout.string());
  }
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  Dataset data = read_dataset(cfg.resolve(cfg.paths.train));
  const NoiseReference ref = estimate_noise_reference(data);
  write_noise_ref(cfg.resolve(cfg.paths.noise_ref), ref, data.header.n_iq);
  normalize_dataset(data, ref);
  if (cfg.workers != 1) log(Level::Warn, "training runs on one thread; --workers only affects other commands");

  nn::TrainResult trace;
  const auto t0 = std::chrono::steady_clock::now();
  const auto net = train_network(cfg.model, data, cfg.train, &trace, [&](std::size_t epoch, double loss) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log(Level::Info, "epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.train.epochs) +
                         " loss " + std::to_string(loss) + " (" + std::to_string(secs) + " s)");
  });
  nn::checkpoint_save(net, cfg.resolve(cfg.paths.checkpoint));

  const fs::path trace_path = fs::path(cfg.out_dir) / "loss_trace.csv";
  std::ofstream os(trace_path);
  os << "step,loss\n";
  for (std::size_t i = 0; i < trace.batch_loss.size(); ++i) os << i << ',' << trace.batch_loss[i] << '\n';
  log(Level::Info, "wrote " + cfg.resolve(cfg.paths.checkpoint).string() + " and " + trace_path.string());
  return 0;
}

int cmd_infer(const RunConfig& cfg) {
  const auto net = load_model(cfg);
  const NoiseReference ref = read_noise_ref(cfg.resolve(cfg.paths.noise_ref));
  const double B = cfg.generator.bandwidth_hz;
  const double b_tilde = cfg.tiling.bandwidth_multiple * B;
  const TilingPlan plan = plan_tiling(b_tilde, B, cfg.model.n_iq, cfg.tiling.overlap);
  const std::size_t nt = plan.n_iq_tilde;
  log(Level::Info, "tiling: n_iq_tilde " + std::to_string(nt) + ", " + std::to_string(plan.window_count()) + " windows");

  std::vector<std::vector<float>> frames;
  if (!cfg.paths.input.empty()) {
    IqMetadata meta;
    const IqBuffer capture = read_iqf32(cfg.paths.input, &meta);
    if (std::abs(meta.sample_rate_hz - b_tilde) > 1e-6 * b_tilde) {
      log(Level::Warn, "capture rate " + std::to_string(meta.sample_rate_hz) + " Hz differs from B_tilde " +
                           std::to_string(b_tilde) + " Hz");
    }
    for (std::size_t start = 0; start + nt <= capture.size(); start += nt) {
      if (cfg.tiling.frame_limit && frames.size() >= cfg.tiling.frame_limit) break;
      IqBuffer frame{std::vector<cplx>(capture.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                       capture.samples.begin() + static_cast<std::ptrdiff_t>(start + nt)),
                     meta.sample_rate_hz};
      frames.push_back(spectrum_input(frame));
    }
    if (frames.empty()) throw Error(Errc::InvalidArgument, "capture is shorter than one frame");
  } else {
    // No capture given: compose wide scenes from the bank, one signal per
    // native-bandwidth segment.
    const SignalBank bank = bank_load(cfg.resolve(cfg.paths.bank));
    const auto segments = static_cast<std::size_t>(std::llround(cfg.tiling.bandwidth_multiple));
    if (std::abs(cfg.tiling.bandwidth_multiple - static_cast<double>(segments)) > 1e-9) {
      throw Error(Errc::InvalidConfig, "synthetic scenes need an integer bandwidth_multiple");
    }
    const std::size_t count = cfg.tiling.frame_limit ? cfg.tiling.frame_limit : 64;
    for (std::size_t f = 0; f < count; ++f) {
      Rng rng(mix_seed(cfg.seed, 0x1f0000 + f));
      std::vector<int> classes(segments);
      for (auto& c : classes) c = static_cast<int>(uniform_int(rng, 0, static_cast<std::uint64_t>(cfg.generator.class_count)));
      frames.push_back(compose_wideband(cfg.generator, bank, classes, rng()).input);
    }
  }

  InferOptions opt;
  opt.threshold = cfg.tiling.threshold;
  opt.workers = cfg.workers;
  std::vector<OccupancyMap> maps;
  for (const auto& f : frames) maps.push_back(infer_wideband(net, f, plan, ref, opt));

  const fs::path csv = fs::path(cfg.out_dir) / "occupancy.csv";
  std::ofstream os(csv);
  write_occupancy_csv(os, maps, class_names(cfg));
  const fs::path img = fs::path(cfg.out_dir) / "spectrum_map.ppm";
  write_ppm(img, spectrum_map(frames, maps));
  log(Level::Info, "wrote " + csv.string() + " and " + img.string() + " (" + std::to_string(frames.size()) + " frames)");
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  const auto net = load_model(cfg);
  const NoiseReference ref = read_noise_ref(cfg.resolve(cfg.paths.noise_ref));
  const Dataset heldout = read_dataset(cfg.resolve(cfg.paths.heldout));
  const IoUReport rep = evaluate(net, heldout, ref, cfg.tiling.threshold);
  const auto names = class_names(cfg);

  const fs::path csv = fs::path(cfg.out_dir) / "iou.csv";
  std::ofstream os(csv);
  write_iou_csv(os, rep, names);
  std::cout << "samples " << rep.sample_count << '\n';
  std::vector<double> bars;
  for (const auto& [id, v] : rep.per_class) {
    std::cout << "  " << names[static_cast<std::size_t>(id - 1)] << "  IoU " << v << '\n';
    bars.push_back(v);
  }
  std::cout << "mean IoU " << rep.mean_iou << '\n';
  write_ppm(fs::path(cfg.out_dir) / "iou.ppm", bar_chart(bars, 1.0));

  HoleStreamOptions hs;
  hs.n_iq = cfg.generator.n_iq;
  hs.bandwidth_hz = cfg.generator.bandwidth_hz;
  hs.hole_fraction = cfg.bank.waveform.lte_hole_fraction;
  hs.p_empty = cfg.generator.p_empty;
  const auto box = box_oracle_compare(lte_hole_stream(hs, cfg.seed), cfg.model.classes, hs.n_iq);
  std::ofstream bs(fs::path(cfg.out_dir) / "box_oracle.csv");
  bs << "segmentation_occupancy_error,box_occupancy_error,expected_box_error\n"
     << box.segmentation_occupancy_error << ',' << box.box_occupancy_error << ',' << lte_hole_expected_excess(hs) << '\n';
  std::cout << "box oracle false occupancy " << box.box_occupancy_error << " (segmentation "
            << box.segmentation_occupancy_error << ")\n";
  log(Level::Info, "wrote " + csv.string());
  return 0;
}

int cmd_bench(const RunConfig& cfg) {
  const auto net = load_model(cfg);
  const LatencyReport rep = latency_bench(net, cfg.bench.multiples, cfg.bench.runs, cfg.generator.bandwidth_hz, 1, cfg.seed);
  const fs::path csv = fs::path(cfg.out_dir) / "latency.csv";
  std::ofstream os(csv);
  write_latency_csv(os, rep);
  std::vector<double> bars;
  double hi = 0;
  for (std::size_t i = 0; i < rep.entries.size(); ++i) {
    const auto& e = rep.entries[i];
    std::cout << "B~/B " << e.multiple << "  windows " << e.windows << "  " << e.mean_ms << " +- " << e.std_ms
              << " ms  ratio " << rep.ratio(i) << '\n';
    bars.push_back(e.mean_ms);
    hi = std::max(hi, e.mean_ms);
  }
  write_ppm(fs::path(cfg.out_dir) / "latency.ppm", bar_chart(bars, hi));
  log(Level::Info, "wrote " + csv.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wide-band spectrum segmentation pipeline"};
  app.require_subcommand(1);
  Common common;

  using Fn = int (*)(const RunConfig&);
  const std::vector<std::tuple<std::string, std::string, Fn>> commands{
      {"synth", "Synthesize one IQF32 capture per class", cmd_synth},
      {"bank", "Build the signal bank", cmd_bank},
      {"generate", "Generate stitched training and held-out datasets", cmd_generate},
      {"train", "Train the segmentation network", cmd_train},
      {"infer", "Wide-band occupancy inference", cmd_infer},
      {"eval", "Held-out IoU and box-oracle report", cmd_eval},
      {"bench", "Inference latency versus observed bandwidth", cmd_bench},
  };
  std::string chosen;
  Fn fn = nullptr;
  for (const auto& [name, help, f] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", common.config, "JSON run configuration");
    sub->add_option("--seed", common.seed, "Master seed");
    sub->add_option("--workers", common.workers, "Worker threads (0: all cores)");
    sub->add_option("--out", common.out, "Output directory");
    sub->callback([&chosen, &fn, name = name, f = f] {
      chosen = name;
      fn = f;
    });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const RunConfig cfg = resolve(common, chosen);
    return fn(cfg);
  } catch (const Error& e) {
    log(Level::Error, e.what());
    return e.code() == Errc::InvalidConfig ? 2 : 1;
  } catch (const std::exception& e) {
    log(Level::Error, std::string("unexpected: ") + e.what());
    return 1;
  }
}
