#pragma once

// Wide-band inference: noise-floor normalization and overlapping-window
// tiling of an observation wider than the network's native bandwidth.
//
//   wide spectrum (n_tilde bins)
//     ├─ window 0      [0, n)           ─┐
//     ├─ window 1      [s, s+n)          ├─ normalize → SegNet → probabilities
//     └─ window N-1    [n_tilde-n, ...) ─┘
//   per-bin mean over covering windows → threshold → OccupancyMap

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "stitch/dsp.hpp"
#include "stitch/error.hpp"
#include "stitch/generator.hpp"
#include "stitch/segnet.hpp"

namespace stitch {

inline constexpr std::size_t kFloorWindow = 31;
inline constexpr double kDefaultOverlap = 0.5;
inline constexpr double kDefaultThreshold = 0.5;

struct NoiseReference {
  double ref_floor = 1.0;
};

/// Minimum over bins of the smoothed power of a 2 x n input (real row, then
/// imaginary row).
inline double min_smoothed_power(std::span<const float> input, std::size_t n, std::size_t window = kFloorWindow) {
  if (input.size() != 2 * n) throw Error(Errc::ShapeMismatch, "input is not 2 x " + std::to_string(n));
  std::vector<std::complex<double>> bins(n);
  for (std::size_t k = 0; k < n; ++k) bins[k] = {input[k], input[n + k]};
  const auto p = smoothed_power(std::span<const std::complex<double>>(bins), std::min(window, n % 2 ? n : n - 1));
  return *std::min_element(p.begin(), p.end());
}

/// Mean over the dataset of each sample's minimum smoothed power.
inline NoiseReference estimate_noise_reference(const Dataset& data) {
  if (data.samples.empty()) throw Error(Errc::InvalidArgument, "noise reference needs a nonempty dataset");
  double sum = 0.0;
  for (const auto& s : data.samples) sum += min_smoothed_power(s.input, data.header.n_iq);
  NoiseReference ref{sum / static_cast<double>(data.samples.size())};
  if (!(ref.ref_floor > 0.0)) throw Error(Errc::ZeroFloor, "dataset has a zero noise floor");
  return ref;
}

/// Scales the input so its minimum smoothed power equals ref.ref_floor.
inline std::vector<float> normalize(std::span<const float> input, std::size_t n, const NoiseReference& ref) {
  const double floor = min_smoothed_power(input, n);
  if (!(floor > 0.0)) throw Error(Errc::ZeroFloor, "input has zero minimum smoothed power");
  const double scale = std::sqrt(ref.ref_floor / floor);
  std::vector<float> out(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = static_cast<float>(static_cast<double>(input[i]) * scale);
  return out;
}

/// Normalizes every sample of a dataset in place.
inline void normalize_dataset(Dataset& data, const NoiseReference& ref) {
  for (auto& s : data.samples) s.input = normalize(s.input, data.header.n_iq, ref);
}

// ---------------------------------------------------------------------------
// Tiling

struct TilingPlan {
  double b_tilde_hz = 0;
  double b_hz = 0;
  std::size_t n_iq = 0;
  std::size_t n_iq_tilde = 0;
  std::vector<std::size_t> window_starts;
  double overlap_fraction = 0;

  std::size_t window_count() const { return window_starts.size(); }
};

inline TilingPlan plan_tiling(double b_tilde_hz, double b_hz, std::size_t n_iq, double overlap_fraction = kDefaultOverlap) {
  if (!(b_hz > 0.0) || n_iq == 0) throw Error(Errc::InvalidGeometry, "B and n_iq must be positive");
  if (!(b_tilde_hz >= b_hz)) throw Error(Errc::InvalidGeometry, "observed bandwidth is below the native bandwidth");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    throw Error(Errc::InvalidGeometry, "overlap_fraction must lie in [0, 1)");
  }
  const double exact = b_tilde_hz / b_hz * static_cast<double>(n_iq);
  const double rounded = std::round(exact);
  if (std::abs(exact - rounded) > 1e-9 * exact) {
    throw Error(Errc::InvalidGeometry, "B_tilde / B * n_iq = " + std::to_string(exact) + " is not an integer");
  }
  TilingPlan plan{b_tilde_hz, b_hz, n_iq, static_cast<std::size_t>(rounded), {}, overlap_fraction};
  const auto stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(n_iq) * (1.0 - overlap_fraction))));
  const std::size_t last = plan.n_iq_tilde - n_iq;
  for (std::size_t s = 0; s < last; s += stride) plan.window_starts.push_back(s);
  plan.window_starts.push_back(last);
  return plan;
}

// ---------------------------------------------------------------------------
// Occupancy

struct OccupancyMap {
  std::size_t classes = 0;
  std::size_t bins = 0;
  double bin_width_hz = 0;
  double threshold = kDefaultThreshold;
  std::vector<float> probs;           // classes x bins, row-major
  std::vector<std::uint8_t> binary;   // probs >= threshold

  float prob(std::size_t c, std::size_t k) const { return probs[c * bins + k]; }
  bool occupied(std::size_t c, std::size_t k) const { return binary[c * bins + k] != 0; }
  double freq_hz(std::size_t k) const {
    return (static_cast<double>(k) - static_cast<double>(bins / 2)) * bin_width_hz;
  }

  LabelMatrix as_label() const {
    LabelMatrix m(classes, bins);
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t k = 0; k < bins; ++k) m.set(c, k, occupied(c, k));
    }
    return m;
  }
};

inline void apply_threshold(OccupancyMap& map, double threshold) {
  map.threshold = threshold;
  map.binary.resize(map.probs.size());
  for (std::size_t i = 0; i < map.probs.size(); ++i) map.binary[i] = map.probs[i] >= threshold ? 1 : 0;
}

struct InferOptions {
  double threshold = kDefaultThreshold;
  std::size_t workers = 1;
  std::size_t windows_per_batch = 8;
  // Processing order of windows; empty means index order. Output does not
  // depend on it.
  std::vector<std::size_t> order;
};

/// Tiled inference over a 2 x n_iq_tilde wide input.
inline OccupancyMap infer_wideband(const nn::SegNet<float>& net, std::span<const float> wide, const TilingPlan& plan,
                                   const NoiseReference& ref, const InferOptions& opt = {}) {
  const std::size_t n = net.config().n_iq;
  const std::size_t C = net.config().classes;
  const std::size_t nt = plan.n_iq_tilde;
  if (plan.n_iq != n) throw Error(Errc::ShapeMismatch, "plan window width differs from the network n_iq");
  if (wide.size() != 2 * nt) throw Error(Errc::ShapeMismatch, "wide input is not 2 x " + std::to_string(nt));

  const std::size_t N = plan.window_count();
  std::vector<std::size_t> order = opt.order;
  if (order.empty()) {
    order.resize(N);
    for (std::size_t i = 0; i < N; ++i) order[i] = i;
  }
  const std::size_t per_batch = std::max<std::size_t>(1, opt.windows_per_batch);
  const std::size_t batches = (order.size() + per_batch - 1) / per_batch;

  std::vector<nn::Mat<float>> window_probs(N);
  auto run_batch = [&](std::size_t b) {
    const std::size_t lo = b * per_batch;
    const std::size_t hi = std::min(order.size(), lo + per_batch);
    nn::Mat<float> x(2, static_cast<Eigen::Index>((hi - lo) * n));
    std::vector<float> slice(2 * n);
    for (std::size_t i = lo; i < hi; ++i) {
      const std::size_t s = plan.window_starts[order[i]];
      std::copy_n(wide.begin() + static_cast<std::ptrdiff_t>(s), n, slice.begin());
      std::copy_n(wide.begin() + static_cast<std::ptrdiff_t>(nt + s), n, slice.begin() + static_cast<std::ptrdiff_t>(n));
      const auto norm = normalize(slice, n, ref);
      x.middleCols(static_cast<Eigen::Index>((i - lo) * n), static_cast<Eigen::Index>(n)) = nn::input_matrix<float>(norm, n);
    }
    const nn::Mat<float> p = net.predict(x);
    for (std::size_t i = lo; i < hi; ++i) {
      window_probs[order[i]] = p.middleCols(static_cast<Eigen::Index>((i - lo) * n), static_cast<Eigen::Index>(n));
    }
  };

  const std::size_t workers = std::min(std::max<std::size_t>(1, opt.workers), batches);
  if (workers <= 1) {
    for (std::size_t b = 0; b < batches; ++b) run_batch(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t b = next++; b < batches; b = next++) {
            try {
              run_batch(b);
            } catch (...) {
              std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
            }
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

  // Reduce in window index order so the result is independent of scheduling.
  std::vector<double> sum(C * nt, 0.0);
  std::vector<std::uint32_t> cover(nt, 0);
  for (std::size_t w = 0; w < N; ++w) {
    const std::size_t s = plan.window_starts[w];
    const auto& p = window_probs[w];
    for (std::size_t k = 0; k < n; ++k) {
      ++cover[s + k];
      for (std::size_t c = 0; c < C; ++c) {
        sum[c * nt + s + k] += static_cast<double>(p(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)));
      }
    }
  }
  OccupancyMap map;
  map.classes = C;
  map.bins = nt;
  map.bin_width_hz = plan.b_tilde_hz / static_cast<double>(nt);
  map.probs.resize(C * nt);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t k = 0; k < nt; ++k) {
      map.probs[c * nt + k] = static_cast<float>(sum[c * nt + k] / static_cast<double>(cover[k]));
    }
  }
  apply_threshold(map, opt.threshold);
  return map;
}

/// Single-window shortcut: normalize, forward, threshold.
inline OccupancyMap infer_direct(const nn::SegNet<float>& net, std::span<const float> input, const NoiseReference& ref,
                                 double bandwidth_hz, double threshold = kDefaultThreshold) {
  const std::size_t n = net.config().n_iq;
  const nn::Mat<float> p = net.predict(nn::input_matrix<float>(normalize(input, n, ref), n));
  OccupancyMap map;
  map.classes = net.config().classes;
  map.bins = n;
  map.bin_width_hz = bandwidth_hz / static_cast<double>(n);
  map.probs.resize(map.classes * n);
  for (std::size_t c = 0; c < map.classes; ++c) {
    for (std::size_t k = 0; k < n; ++k) {
      map.probs[c * n + k] = p(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
    }
  }
  apply_threshold(map, threshold);
  return map;
}

// ---------------------------------------------------------------------------
// Wide scenes

/// A wide spectrum built from the bank: segment s of `segments` hosts the
/// signal classes[s], centred in that segment.
struct WideScene {
  std::vector<float> input;  // 2 x n_tilde
  LabelMatrix label;
  std::vector<PlacedSignal> provenance;
};

inline WideScene compose_wideband(const GeneratorConfig& cfg, const SignalBank& bank, const std::vector<int>& classes,
                                  std::uint64_t seed) {
  cfg.validate();
  detail::check_bank(cfg, bank);
  const std::size_t n = cfg.n_iq;
  const std::size_t segments = classes.size();
  const std::size_t nt = n * segments;
  const double F = cfg.resolution_hz();
  Rng rng(seed);

  WideScene scene;
  scene.label = LabelMatrix(static_cast<std::size_t>(cfg.class_count), nt);
  Spectrum acc{std::vector<cplx>(nt), F};
  for (std::size_t s = 0; s < segments; ++s) {
    const int cls = classes[s];
    if (cls == 0) continue;
    if (cls < 1 || cls > cfg.class_count) throw Error(Errc::UnknownClass, "class id " + std::to_string(cls));
    PlacedSignal placed;
    placed.class_id = cls;
    const auto candidates = bank.entries_of(cls);
    placed.bank_entry_index = candidates[uniform_int(rng, 0, candidates.size() - 1)];
    const BankEntry& entry = bank.entries[placed.bank_entry_index];
    placed.bandwidth_hz = entry.bandwidth_hz;
    const long long offset = static_cast<long long>(s * n + n / 2) - static_cast<long long>(nt / 2);
    placed.center_hz = static_cast<double>(offset) * F;
    placed.snr_db = uniform(rng, cfg.snr_min_db, cfg.snr_max_db);
    placed.bin_count = entry.bins.size();
    placed.first_bin = placement_first_bin(nt, F, placed.bin_count, placed.center_hz);
    stitch_entry(acc, entry, offset, snr_gain(entry, placed.snr_db, nt, cfg.noise_power));
    for (std::size_t i = 0; i < placed.bin_count; ++i) {
      const long long j = placed.first_bin + static_cast<long long>(i);
      if (j >= 0 && j < static_cast<long long>(nt)) scene.label.set(static_cast<std::size_t>(cls - 1), static_cast<std::size_t>(j));
    }
    scene.provenance.push_back(placed);
  }
  const Spectrum noise =
      fft_forward(synthesize_noise(nt, cfg.noise_power, rng(), cfg.bandwidth_hz * static_cast<double>(segments)));
  scene.input.resize(2 * nt);
  for (std::size_t k = 0; k < nt; ++k) {
    const cplx v = acc.bins[k] + noise.bins[k];
    scene.input[k] = static_cast<float>(v.real());
    scene.input[nt + k] = static_cast<float>(v.imag());
  }
  return scene;
}

/// Input grid of a time-domain frame: FFT, then real row and imaginary row.
inline std::vector<float> spectrum_input(const IqBuffer& frame) {
  const Spectrum s = fft_forward(frame);
  const std::size_t n = s.bins.size();
  std::vector<float> out(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = static_cast<float>(s.bins[k].real());
    out[n + k] = static_cast<float>(s.bins[k].imag());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export

/// CSV: frame, bin_index, freq_hz, p_1..p_C, occ_1..occ_C.
inline void write_occupancy_csv(std::ostream& os, const std::vector<OccupancyMap>& frames,
                                const std::vector<std::string>& class_names) {
  if (frames.empty()) return;
  const std::size_t C = frames.front().classes;
  os << "frame,bin_index,freq_hz";
  for (std::size_t c = 0; c < C; ++c) os << ",p_" << (c < class_names.size() ? class_names[c] : std::to_string(c + 1));
  for (std::size_t c = 0; c < C; ++c) os << ",occ_" << (c < class_names.size() ? class_names[c] : std::to_string(c + 1));
  os << '\n';
  char buf[64];
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& m = frames[f];
    for (std::size_t k = 0; k < m.bins; ++k) {
      std::snprintf(buf, sizeof buf, "%.1f", m.freq_hz(k));
      os << f << ',' << k << ',' << buf;
      for (std::size_t c = 0; c < C; ++c) {
        std::snprintf(buf, sizeof buf, "%.6f", static_cast<double>(m.prob(c, k)));
        os << ',' << buf;
      }
      for (std::size_t c = 0; c < C; ++c) os << ',' << (m.occupied(c, k) ? 1 : 0);
      os << '\n';
    }
  }
}

}  // namespace stitch
