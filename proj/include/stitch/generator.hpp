#pragma once

// Stitched-sample generator: draws signals from the bank, places them in a
// B-wide band on the n_iq bin grid, adds white noise, and labels every bin
// with the classes whose placed band covers it.
//
// STCH file layout (little-endian):
//   "STCH" | u16 version | u16 C | u32 n_iq | f64 B_hz | u64 count
//   per sample: u64 seed | 2*n_iq f32 (real row, then imaginary row)
//               | ceil(C*n_iq/8) bytes of label bits, row-major, LSB-first

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <exception>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "stitch/binary_io.hpp"
#include "stitch/dsp.hpp"
#include "stitch/error.hpp"
#include "stitch/rng.hpp"
#include "stitch/signal_bank.hpp"
#include "stitch/waveform.hpp"

namespace stitch {

struct GeneratorConfig {
  int class_count = 5;                // C
  double bandwidth_hz = 25e6;         // B, equal to the sampling rate
  int max_signals = 2;                // n_s
  double p_empty = 0.05;              // p_e
  double p_center = 0.5;              // p_c
  std::size_t n_iq = 256;
  double noise_power = 1.0;           // per time-domain sample
  double snr_min_db = 5.0;            // per-signal in-band SNR range
  double snr_max_db = 25.0;
  std::uint64_t master_seed = 1;

  double resolution_hz() const { return bandwidth_hz / static_cast<double>(n_iq); }

  /// All violated constraints, empty when valid.
  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (class_count < 1) out.emplace_back("class_count must be >= 1");
    if (!(bandwidth_hz > 0.0)) out.emplace_back("bandwidth_hz must be positive");
    if (max_signals < 1) out.emplace_back("max_signals must be >= 1");
    if (!(p_empty >= 0.0 && p_empty <= 1.0)) out.emplace_back("p_empty must lie in [0, 1]");
    if (!(p_center >= 0.0 && p_center <= 1.0)) out.emplace_back("p_center must lie in [0, 1]");
    if (!is_power_of_two(n_iq) || n_iq % 32 != 0) {
      out.emplace_back("n_iq must be a power of two divisible by 32");
    }
    if (!(noise_power > 0.0)) out.emplace_back("noise_power must be positive");
    if (!(snr_min_db <= snr_max_db)) out.emplace_back("snr_min_db must not exceed snr_max_db");
    return out;
  }

  void validate() const {
    const auto v = violations();
    if (v.empty()) return;
    std::string msg;
    for (const auto& s : v) msg += (msg.empty() ? "" : "; ") + s;
    throw Error(Errc::InvalidConfig, msg);
  }
};

/// C x n binary grid; row i is class i+1. The empty class has no row: an
/// all-zero column means "no signal".
class LabelMatrix {
 public:
  LabelMatrix() = default;
  LabelMatrix(std::size_t classes, std::size_t bins) : rows_(classes), cols_(bins), bits_(classes * bins, 0) {}

  std::size_t classes() const { return rows_; }
  std::size_t bins() const { return cols_; }

  bool at(std::size_t row, std::size_t col) const { return bits_[row * cols_ + col] != 0; }
  void set(std::size_t row, std::size_t col, bool v = true) { bits_[row * cols_ + col] = v ? 1 : 0; }

  std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }
  bool empty() const { return count() == 0; }

  bool operator==(const LabelMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct PlacedSignal {
  int class_id = 0;          // c_m
  double bandwidth_hz = 0;   // b_m
  double center_hz = 0;      // f_m as drawn
  std::size_t bank_entry_index = 0;
  long long first_bin = 0;   // placed span [first_bin, first_bin + bin_count), may exceed the window
  std::size_t bin_count = 0;
  double snr_db = 0;
};

struct StitchedSample {
  std::vector<float> input;  // 2 x n_iq: real row then imaginary row
  LabelMatrix label;
  std::vector<PlacedSignal> provenance;
  std::uint64_t seed = 0;
};

/// Placed bin span of an entry of `bin_count` bins centred at `center_hz`:
/// the entry's middle bin lands on n/2 + round(center_hz / F).
inline long long placement_first_bin(std::size_t n_bins, double resolution_hz, std::size_t bin_count,
                                     double center_hz) {
  const long long offset = std::llround(center_hz / resolution_hz);
  return static_cast<long long>(n_bins / 2) + offset - static_cast<long long>(bin_count / 2);
}

inline bool span_intersects_window(long long first, std::size_t count, std::size_t n_bins) {
  return first < static_cast<long long>(n_bins) && first + static_cast<long long>(count) > 0;
}

/// Signal count: 0 with probability p_e, else uniform on {1, ..., n_s}.
inline int draw_signal_count(const GeneratorConfig& cfg, Rng& rng) {
  if (bernoulli(rng, cfg.p_empty)) return 0;
  return static_cast<int>(uniform_int(rng, 1, static_cast<std::uint64_t>(cfg.max_signals)));
}

/// Center frequency: 0 Hz with probability p_c, else uniform on (-B/2 - b/2, B/2 + b/2).
/// A continuous draw whose quantized span misses the window entirely (only
/// possible within half a bin of the interval ends) is redrawn.
inline double draw_center_freq(const GeneratorConfig& cfg, double bandwidth_hz, Rng& rng) {
  if (!(bandwidth_hz > 0.0)) throw Error(Errc::InvalidArgument, "signal bandwidth must be positive");
  if (bernoulli(rng, cfg.p_center)) return 0.0;
  const double F = cfg.resolution_hz();
  const auto bins = static_cast<std::size_t>(std::max<long long>(1, std::llround(bandwidth_hz / F)));
  const double half = cfg.bandwidth_hz / 2.0 + bandwidth_hz / 2.0;
  for (;;) {
    const double f = uniform_open(rng, -half, half);
    if (span_intersects_window(placement_first_bin(cfg.n_iq, F, bins, f), bins, cfg.n_iq)) return f;
  }
}

namespace detail {

inline void check_bank(const GeneratorConfig& cfg, const SignalBank& bank) {
  const double F = cfg.resolution_hz();
  if (std::abs(bank.bin_width_hz - F) > 1e-9 * F) {
    throw Error(Errc::ConfigMismatch, "bank bin width " + std::to_string(bank.bin_width_hz) +
                                          " Hz differs from resolution " + std::to_string(F) + " Hz");
  }
  for (int c = 1; c <= cfg.class_count; ++c) {
    if (bank.entries_of(c).empty()) {
      throw Error(Errc::MissingClass, "bank has no entries of class " + std::to_string(c));
    }
  }
}

}  // namespace detail

/// Adds `entry` scaled by `gain` into `acc` with its middle bin at
/// n/2 + offset_bins; out-of-window bins are dropped.
inline void stitch_entry(Spectrum& acc, const BankEntry& entry, long long offset_bins, double gain) {
  const std::size_t n = acc.size();
  Spectrum centred{std::vector<cplx>(n), acc.bin_width_hz};
  const long long start = static_cast<long long>(n / 2) - static_cast<long long>(entry.bins.size() / 2);
  for (std::size_t i = 0; i < entry.bins.size(); ++i) {
    const long long j = start + static_cast<long long>(i);
    if (j >= 0 && j < static_cast<long long>(n)) {
      centred.bins[static_cast<std::size_t>(j)] = cplx(entry.bins[i].real(), entry.bins[i].imag()) * gain;
    }
  }
  const Spectrum shifted = freq_shift(centred, static_cast<double>(offset_bins) * acc.bin_width_hz);
  for (std::size_t k = 0; k < n; ++k) acc.bins[k] += shifted.bins[k];
}

/// Gain that brings the entry's mean bin power to snr * n * noise_power,
/// i.e. the expected per-bin noise power of an n-point transform.
inline double snr_gain(const BankEntry& entry, double snr_db, std::size_t n_bins, double noise_power) {
  const double mean_power =
      energy(std::span<const std::complex<float>>(entry.bins)) / static_cast<double>(entry.bins.size());
  const double target = std::pow(10.0, snr_db / 10.0) * static_cast<double>(n_bins) * noise_power;
  return std::sqrt(target / mean_power);
}

inline StitchedSample generate_sample(const GeneratorConfig& cfg, const SignalBank& bank, std::uint64_t index) {
  cfg.validate();
  detail::check_bank(cfg, bank);
  const std::size_t n = cfg.n_iq;
  const double F = cfg.resolution_hz();

  StitchedSample sample;
  sample.seed = mix_seed(cfg.master_seed, index);
  sample.label = LabelMatrix(static_cast<std::size_t>(cfg.class_count), n);
  Rng rng(sample.seed);

  Spectrum acc{std::vector<cplx>(n), F};
  const int count = draw_signal_count(cfg, rng);
  for (int m = 0; m < count; ++m) {
    PlacedSignal placed;
    placed.class_id = static_cast<int>(uniform_int(rng, 1, static_cast<std::uint64_t>(cfg.class_count)));
    const auto candidates = bank.entries_of(placed.class_id);
    placed.bank_entry_index = candidates[uniform_int(rng, 0, candidates.size() - 1)];
    const BankEntry& entry = bank.entries[placed.bank_entry_index];
    placed.bandwidth_hz = entry.bandwidth_hz;
    placed.center_hz = draw_center_freq(cfg, entry.bandwidth_hz, rng);
    placed.snr_db = uniform(rng, cfg.snr_min_db, cfg.snr_max_db);
    placed.bin_count = entry.bins.size();
    placed.first_bin = placement_first_bin(n, F, placed.bin_count, placed.center_hz);

    stitch_entry(acc, entry, std::llround(placed.center_hz / F), snr_gain(entry, placed.snr_db, n, cfg.noise_power));
    const auto row = static_cast<std::size_t>(placed.class_id - 1);
    for (std::size_t i = 0; i < placed.bin_count; ++i) {
      const long long j = placed.first_bin + static_cast<long long>(i);
      if (j >= 0 && j < static_cast<long long>(n)) sample.label.set(row, static_cast<std::size_t>(j));
    }
    sample.provenance.push_back(placed);
  }

  const Spectrum noise = fft_forward(synthesize_noise(n, cfg.noise_power, rng(), cfg.bandwidth_hz));
  sample.input.resize(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    const cplx v = acc.bins[k] + noise.bins[k];
    sample.input[k] = static_cast<float>(v.real());
    sample.input[n + k] = static_cast<float>(v.imag());
  }
  return sample;
}

// ---------------------------------------------------------------------------
// STCH datasets

inline constexpr std::uint16_t kDatasetVersion = 1;

struct DatasetHeader {
  int class_count = 0;
  std::size_t n_iq = 0;
  double bandwidth_hz = 0.0;
  std::uint64_t count = 0;
};

struct Dataset {
  DatasetHeader header;
  std::vector<StitchedSample> samples;  // provenance is not persisted

  std::size_t size() const { return samples.size(); }
};

namespace detail {

inline void write_header(std::ostream& os, const DatasetHeader& h) {
  io::put_magic(os, "STCH");
  io::put<std::uint16_t>(os, kDatasetVersion);
  io::put<std::uint16_t>(os, static_cast<std::uint16_t>(h.class_count));
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(h.n_iq));
  io::put<double>(os, h.bandwidth_hz);
  io::put<std::uint64_t>(os, h.count);
}

inline void write_record(std::ostream& os, const StitchedSample& s) {
  io::put<std::uint64_t>(os, s.seed);
  for (float v : s.input) io::put<float>(os, v);
  const std::size_t total = s.label.classes() * s.label.bins();
  std::vector<std::uint8_t> packed((total + 7) / 8, 0);
  for (std::size_t r = 0; r < s.label.classes(); ++r) {
    for (std::size_t c = 0; c < s.label.bins(); ++c) {
      if (s.label.at(r, c)) {
        const std::size_t k = r * s.label.bins() + c;
        packed[k / 8] = static_cast<std::uint8_t>(packed[k / 8] | (1u << (k % 8)));
      }
    }
  }
  os.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
}

}  // namespace detail

inline void write_dataset(const std::filesystem::path& path, const DatasetHeader& header,
                          const std::vector<StitchedSample>& samples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  DatasetHeader h = header;
  h.count = samples.size();
  detail::write_header(os, h);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    detail::write_record(os, samples[i]);
    if (!os) throw Error(Errc::Io, "write failed at sample " + std::to_string(i));
  }
}

inline Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::NotFound, "dataset not found: " + path.string());
  constexpr Errc bad = Errc::CorruptDataset;
  io::expect_magic(is, "STCH", bad);
  const auto version = io::get<std::uint16_t>(is, bad);
  if (version != kDatasetVersion) throw Error(bad, "unsupported version " + std::to_string(version));
  Dataset ds;
  ds.header.class_count = io::get<std::uint16_t>(is, bad);
  ds.header.n_iq = io::get<std::uint32_t>(is, bad);
  ds.header.bandwidth_hz = io::get<double>(is, bad);
  ds.header.count = io::get<std::uint64_t>(is, bad);
  const std::size_t n = ds.header.n_iq;
  const auto classes = static_cast<std::size_t>(ds.header.class_count);
  if (n == 0 || classes == 0) throw Error(bad, "empty geometry");
  ds.samples.resize(ds.header.count);
  std::vector<std::uint8_t> packed((classes * n + 7) / 8);
  for (std::uint64_t i = 0; i < ds.header.count; ++i) {
    auto& s = ds.samples[i];
    s.seed = io::get<std::uint64_t>(is, bad);
    s.input.resize(2 * n);
    for (auto& v : s.input) v = io::get<float>(is, bad);
    is.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (is.gcount() != static_cast<std::streamsize>(packed.size())) {
      throw Error(bad, "truncated label at sample " + std::to_string(i));
    }
    s.label = LabelMatrix(classes, n);
    for (std::size_t k = 0; k < classes * n; ++k) {
      if (packed[k / 8] & (1u << (k % 8))) s.label.set(k / n, k % n);
    }
  }
  io::expect_eof(is, bad);
  return ds;
}

/// Generates `count` samples (sample k seeded by mix_seed(master_seed, k))
/// and writes them in index order. The file is independent of `workers`.
inline void generate_dataset(const GeneratorConfig& cfg, const SignalBank& bank, std::size_t count,
                             const std::filesystem::path& path, unsigned workers = 1,
                             std::uint64_t first_index = 0) {
  if (count == 0) throw Error(Errc::InvalidArgument, "dataset count must be >= 1");
  cfg.validate();
  detail::check_bank(cfg, bank);
  workers = std::max(1u, workers);

  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  detail::write_header(os, {cfg.class_count, cfg.n_iq, cfg.bandwidth_hz, count});

  constexpr std::size_t kBlock = 256;
  std::vector<StitchedSample> block;
  for (std::size_t base = 0; base < count; base += kBlock) {
    const std::size_t len = std::min(kBlock, count - base);
    block.assign(len, StitchedSample{});
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
      try {
        for (std::size_t i = next++; i < len; i = next++) {
          block[i] = generate_sample(cfg, bank, first_index + base + i);
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = len;
      }
    };
    if (workers == 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < std::min<std::size_t>(workers, len); ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);
    for (std::size_t i = 0; i < len; ++i) {
      detail::write_record(os, block[i]);
      if (!os) throw Error(Errc::Io, "write failed at sample " + std::to_string(base + i));
    }
  }
}

/// Held-out samples draw from a disjoint index range.
inline constexpr std::uint64_t kHeldoutFirstIndex = std::uint64_t{1} << 40;

/// In-memory counterpart of generate_dataset, same sample seeds.
inline Dataset generate_in_memory(const GeneratorConfig& cfg, const SignalBank& bank, std::size_t count,
                                  std::uint64_t first_index = 0) {
  Dataset ds;
  ds.header = {cfg.class_count, cfg.n_iq, cfg.bandwidth_hz, count};
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) ds.samples.push_back(generate_sample(cfg, bank, first_index + i));
  return ds;
}

}  // namespace stitch
