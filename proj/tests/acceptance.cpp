// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "stitch/stitch.hpp"
#include "support/gradcheck.hpp"

using namespace stitch;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d (%s): %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

// ---------------------------------------------------------------------------

void dft_oracle() {
  const auto t0 = Clock::now();
  double worst_fwd = 0.0, worst_rt = 0.0;
  for (std::size_t n : {64u, 256u, 1024u}) {
    std::vector<cplx> tw(n);
    for (std::size_t k = 0; k < n; ++k) {
      tw[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    }
    Rng rng(mix_seed(17, n));
    for (int trial = 0; trial < 100; ++trial) {
      IqBuffer x{std::vector<cplx>(n), 1.0};
      for (auto& v : x.samples) v = {normal(rng), normal(rng)};
      const Spectrum s = fft_forward(x);
      for (std::size_t k = 0; k < n; ++k) {
        cplx acc = 0;
        for (std::size_t t = 0; t < n; ++t) acc += x.samples[t] * tw[(k * t) % n];
        // natural index k sits at shifted position (k + n/2) mod n
        worst_fwd = std::max(worst_fwd, std::abs(acc - s.bins[(k + n / 2) % n]));
      }
      const IqBuffer back = fft_inverse(s);
      for (std::size_t t = 0; t < n; ++t) worst_rt = std::max(worst_rt, std::abs(back.samples[t] - x.samples[t]));
    }
  }
  const double secs = seconds_since(t0);
  report(1, "DFT oracle", worst_fwd < 1e-6 && worst_rt < 1e-6 && secs < 10.0,
         fmt("max |fft - dft| %.3g, round trip %.3g, %.2f s", worst_fwd, worst_rt, secs));
}

// ---------------------------------------------------------------------------

void gradient_check() {
  const auto t0 = Clock::now();
  Rng rng(23);
  nn::SegNet<long double> net(testing::tiny_config(true), 5);
  testing::randomize_projection(net, rng);
  nn::Mat<long double> x(2, 64), t(2, 64);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = bernoulli(rng, 0.3) ? 1.0 : 0.0;
  const auto r = testing::check_gradients(net, x, t);
  const double secs = seconds_since(t0);
  const bool ok = r.scalars == net.parameter_count() && r.unresolved == 0 && r.worst_rel < 1e-3 && secs < 120.0;
  report(2, "gradient correctness", ok,
         fmt("%zu parameters, worst relative error %.3g, %zu needed a smaller step, %zu unresolved, %.1f s", r.scalars,
             r.worst_rel, r.reduced_step, r.unresolved, secs));
}

// ---------------------------------------------------------------------------

void generator_statistics() {
  const auto t0 = Clock::now();
  GeneratorConfig cfg;
  cfg.p_empty = 0.05;
  cfg.max_signals = 2;
  cfg.p_center = 0.5;
  constexpr std::size_t draws = 100000;
  Rng rng(29);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < draws; ++i) zeros += draw_signal_count(cfg, rng) == 0;
  const double p0 = static_cast<double>(zeros) / draws;

  const double b = 2e6;
  const double half = cfg.bandwidth_hz / 2 + b / 2;
  std::vector<double> f;
  for (std::size_t i = 0; i < draws; ++i) {
    const double v = draw_center_freq(cfg, b, rng);
    if (v != 0.0) f.push_back(v);
  }
  std::sort(f.begin(), f.end());
  double ks = 0.0;
  const double m = static_cast<double>(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double cdf = (f[i] + half) / (2 * half);
    ks = std::max({ks, std::abs(cdf - static_cast<double>(i) / m), std::abs(static_cast<double>(i + 1) / m - cdf)});
  }
  const double secs = seconds_since(t0);
  report(3, "generator statistics", p0 >= 0.04 && p0 <= 0.06 && ks < 0.01 && secs < 30.0,
         fmt("P(M=0) %.4f, KS %.4f over %zu nonzero draws, %.2f s", p0, ks, f.size(), secs));
}

// ---------------------------------------------------------------------------

const SignalBank& desk_bank(const RunConfig& cfg) {
  static const SignalBank bank = [&] {
    const auto& all = default_classes();
    return build_synthetic_bank({all.begin(), all.begin() + cfg.generator.class_count}, cfg.bank, cfg.seed);
  }();
  return bank;
}

void label_geometry(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const GeneratorConfig& g = cfg.generator;
  const double F = g.resolution_hz();
  const std::size_t n = g.n_iq;
  std::size_t mismatches = 0, overlap_columns = 0;
  for (std::uint64_t idx = 0; idx < 1000; ++idx) {
    const StitchedSample s = generate_sample(g, desk_bank(cfg), idx);
    for (std::size_t j = 0; j < n; ++j) {
      const double fj = (static_cast<double>(j) - static_cast<double>(n / 2)) * F;
      std::vector<bool> expect(static_cast<std::size_t>(g.class_count), false);
      int hits = 0;
      for (const auto& p : s.provenance) {
        // placed band: width bin_count * F centred on the quantized frequency
        const double fc = static_cast<double>(std::llround(p.center_hz / F)) * F;
        const double hw = static_cast<double>(p.bin_count) * F / 2;
        if (fj >= fc - hw && fj < fc + hw) {
          expect[static_cast<std::size_t>(p.class_id - 1)] = true;
          ++hits;
        }
      }
      overlap_columns += hits > 1;
      for (std::size_t c = 0; c < expect.size(); ++c) mismatches += s.label.at(c, j) != expect[c];
    }
  }
  const double secs = seconds_since(t0);
  report(4, "label geometry", mismatches == 0 && overlap_columns > 0 && secs < 60.0,
         fmt("%zu mismatching cells over 1000 samples, %zu overlap columns checked, %.1f s", mismatches,
             overlap_columns, secs));
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void determinism(const RunConfig& cfg) {
  const fs::path dir = fs::temp_directory_path() / "stitch_acceptance";
  fs::create_directories(dir);
  generate_dataset(cfg.generator, desk_bank(cfg), 1000, dir / "w1.stch", 1);
  generate_dataset(cfg.generator, desk_bank(cfg), 1000, dir / "w8.stch", 8);
  const std::string a = slurp(dir / "w1.stch"), b = slurp(dir / "w8.stch");
  report(5, "determinism", !a.empty() && a == b, fmt("%zu bytes, identical: %s", a.size(), a == b ? "yes" : "no"));
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------

struct DeskRun {
  std::uint64_t seed = 0;
  bool nonlocal = true;
  double train_seconds = 0.0;
  double reached_at = -1.0;  // training seconds when held-out mIoU first hit the target
  std::size_t reached_epoch = 0;
  double best = 0.0;
  IoUReport final_report;
  nn::SegNet<float> net{nn::SegNetConfig{}, 0};
};

constexpr double kTargetIoU = 0.85;
constexpr double kBudgetSeconds = 15 * 60;

DeskRun desk_run(const RunConfig& cfg, const Dataset& train_n, const Dataset& heldout, const NoiseReference& ref,
                 std::uint64_t seed, bool nonlocal) {
  DeskRun run;
  run.seed = seed;
  run.nonlocal = nonlocal;
  nn::SegNetConfig mc = cfg.model;
  mc.use_nonlocal = nonlocal;
  nn::TrainHyper h = cfg.train;
  h.seed = seed;
  nn::SegNet<float> net(mc, mix_seed(seed, 0x5e9));
  double eval_seconds = 0.0;
  const auto t0 = Clock::now();
  nn::train(net, train_n, h, [&](std::size_t epoch, double loss) {
    const auto e0 = Clock::now();
    const double trained = seconds_since(t0) - eval_seconds;
    const IoUReport r = evaluate(net, heldout, ref);
    run.best = std::max(run.best, r.mean_iou);
    if (run.reached_at < 0 && r.mean_iou >= kTargetIoU) {
      run.reached_at = trained;
      run.reached_epoch = epoch + 1;
    }
    std::printf("  seed %llu %s epoch %zu loss %.4f held-out mIoU %.4f (%.0f s training)\n",
                static_cast<unsigned long long>(seed), nonlocal ? "non-local" : "plain", epoch + 1, loss, r.mean_iou,
                trained);
    std::fflush(stdout);
    eval_seconds += seconds_since(e0);
  });
  run.train_seconds = seconds_since(t0) - eval_seconds;
  run.final_report = evaluate(net, heldout, ref);
  run.net = std::move(net);
  return run;
}

std::vector<DeskRun> desk_learning(const RunConfig& cfg, const Dataset& train_n, const Dataset& heldout,
                                   const NoiseReference& ref) {
  std::vector<DeskRun> runs;
  int reached = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    runs.push_back(desk_run(cfg, train_n, heldout, ref, seed, true));
    const auto& r = runs.back();
    const bool ok = r.reached_at >= 0 && r.reached_at <= kBudgetSeconds;
    reached += ok;
    detail += fmt("seed %llu best %.4f final %.4f ", static_cast<unsigned long long>(seed), r.best,
                  r.final_report.mean_iou);
    detail += r.reached_at >= 0 ? fmt("reached %.2f at epoch %zu after %.0f s; ", kTargetIoU, r.reached_epoch, r.reached_at)
                                : fmt("never reached %.2f in %.0f s; ", kTargetIoU, r.train_seconds);
  }
  detail += fmt("%d of 3 seeds within %.0f s", reached, kBudgetSeconds);
  report(6, "desk-scale learning", reached >= 2, detail);
  return runs;
}

void ablation(const RunConfig& cfg, const Dataset& train_n, const Dataset& heldout, const NoiseReference& ref,
              const std::vector<DeskRun>& with) {
  AblationReport rep;
  std::string detail;
  for (const auto& w : with) {
    const DeskRun wo = desk_run(cfg, train_n, heldout, ref, w.seed, false);
    AblationSeed s;
    s.seed = w.seed;
    s.with_nonlocal = w.final_report;
    s.without_nonlocal = wo.final_report;
    s.train_seconds_with = w.train_seconds;
    s.train_seconds_without = wo.train_seconds;
    rep.runs.push_back(s);
    detail += fmt("seed %llu delta %+.4f (%.4f vs %.4f); ", static_cast<unsigned long long>(w.seed),
                  rep.wideband_delta(s), w.final_report.mean_iou, wo.final_report.mean_iou);
  }
  const double mean = rep.mean_wideband_delta();
  detail += fmt("mean WiFi/LTE delta %+.4f, sd %.4f", mean, rep.stddev_wideband_delta());
  report(7, "non-local ablation", mean >= 0.0, detail);
}

// ---------------------------------------------------------------------------

void tiling(const RunConfig& cfg, const nn::SegNet<float>& net, const NoiseReference& ref) {
  const std::size_t n = net.config().n_iq;
  const double B = cfg.generator.bandwidth_hz;
  bool ok = true;
  std::string detail;

  // B_tilde = B against direct inference on held-out style samples
  std::size_t identical = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const StitchedSample s = generate_sample(cfg.generator, desk_bank(cfg), kHeldoutFirstIndex + i);
    const OccupancyMap a = infer_wideband(net, s.input, plan_tiling(B, B, n), ref);
    const OccupancyMap b = infer_direct(net, s.input, ref, B);
    identical += a.probs == b.probs && a.binary == b.binary;
  }
  ok &= identical == 20;
  detail += fmt("B~=B bit-identical %zu/20; ", identical);

  const TilingPlan p = plan_tiling(4 * B, B, 1024);
  std::vector<int> cover(p.n_iq_tilde, 0);
  for (std::size_t s : p.window_starts) {
    for (std::size_t k = s; k < s + 1024 && k < cover.size(); ++k) ++cover[k];
  }
  const bool covered = std::all_of(cover.begin(), cover.end(), [](int c) { return c > 0; });
  ok &= p.n_iq_tilde == 4096 && covered;
  detail += fmt("4B at 1024: n_iq_tilde %zu, %zu windows, all covered %s; ", p.n_iq_tilde, p.window_count(),
                covered ? "yes" : "no");

  const TilingPlan p4 = plan_tiling(4 * B, B, n);
  double worst = 0.0;
  for (std::uint64_t f = 0; f < 10; ++f) {
    std::vector<int> classes{1 + static_cast<int>(f % 5), 0, 1 + static_cast<int>((f + 2) % 5), 1 + static_cast<int>((f + 4) % 5)};
    const WideScene scene = compose_wideband(cfg.generator, desk_bank(cfg), classes, mix_seed(77, f));
    const OccupancyMap base = infer_wideband(net, scene.input, p4, ref);
    for (float alpha : {0.1f, 10.0f}) {
      auto y = scene.input;
      for (auto& v : y) v *= alpha;
      const OccupancyMap m = infer_wideband(net, y, p4, ref);
      for (std::size_t i = 0; i < m.probs.size(); ++i) {
        worst = std::max(worst, static_cast<double>(std::abs(m.probs[i] - base.probs[i])));
      }
    }
  }
  ok &= worst < 1e-4;
  detail += fmt("amplitude scaling max probability change %.3g", worst);
  report(8, "tiling equivalence", ok, detail);
}

// ---------------------------------------------------------------------------

void box_oracle(const RunConfig& cfg) {
  HoleStreamOptions opt;
  opt.frames = 20000;
  opt.n_iq = cfg.generator.n_iq;
  opt.bandwidth_hz = cfg.generator.bandwidth_hz;
  opt.hole_fraction = 0.25;
  opt.p_empty = cfg.generator.p_empty;
  const auto stream = lte_hole_stream(opt, 41);
  const BoxComparison r = box_oracle_compare(stream, static_cast<std::size_t>(cfg.generator.class_count), opt.n_iq);
  const double expected = lte_hole_expected_excess(opt);
  // Per-frame excess is holes/n with probability 1 - p_e, zero otherwise.
  const double per_frame = expected / (1.0 - opt.p_empty);
  const double sigma = per_frame * std::sqrt(opt.p_empty * (1.0 - opt.p_empty) / static_cast<double>(opt.frames));
  const double dev = std::abs(r.box_occupancy_error - expected);
  report(9, "box-oracle holes", dev <= 4.0 * sigma && r.segmentation_occupancy_error == 0.0 && r.box_occupancy_error > 0,
         fmt("box excess %.5f, expected %.5f (4 sigma %.5f), segmentation excess %.5f over %zu frames",
             r.box_occupancy_error, expected, 4.0 * sigma, r.segmentation_occupancy_error, opt.frames));
}

// ---------------------------------------------------------------------------

void latency(const nn::SegNet<float>& net) {
  const LatencyReport r = latency_bench(net, {1.0, 2.0, 4.0}, 100, 25e6, 1);
  bool monotone = true;
  std::string detail;
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    if (i > 0 && r.entries[i].mean_ms < r.entries[i - 1].mean_ms) monotone = false;
    detail += fmt("%gB: %zu windows %.3f ms; ", r.entries[i].multiple, r.entries[i].windows, r.entries[i].mean_ms);
  }
  const double ratio = r.ratio(2);
  detail += fmt("t(4B)/t(B) %.2f", ratio);
  report(10, "latency scaling", monotone && ratio <= 7.0, detail);
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path config_path = argc > 1 ? fs::path(argv[1]) : fs::path(STITCH_SOURCE_DIR) / "configs" / "desk.json";
  const RunConfig cfg = load_config(config_path);
  std::printf("config %s\n", config_path.string().c_str());

  dft_oracle();
  gradient_check();
  generator_statistics();
  label_geometry(cfg);
  determinism(cfg);
  box_oracle(cfg);

  Dataset train = generate_in_memory(cfg.generator, desk_bank(cfg), cfg.data.train_count, 0);
  const Dataset heldout =
      generate_in_memory(cfg.generator, desk_bank(cfg), cfg.data.heldout_count, kHeldoutFirstIndex);
  const NoiseReference ref = estimate_noise_reference(train);
  normalize_dataset(train, ref);

  const auto runs = desk_learning(cfg, train, heldout, ref);
  const auto best = std::max_element(runs.begin(), runs.end(), [](const DeskRun& a, const DeskRun& b) {
    return a.final_report.mean_iou < b.final_report.mean_iou;
  });
  tiling(cfg, best->net, ref);
  latency(best->net);
  ablation(cfg, train, heldout, ref, runs);

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
