#pragma once

// Signal bank: isolated, preprocessed signal fragments stored in the
// frequency domain. A capture is cropped to its active span, cut into a few
// fragments of random duration, transformed, and pruned to the band the
// signal occupies.
//
// BANK file layout (little-endian):
//   "SBNK" | u16 version | u16 class_count | f64 bin_width_hz | u32 entry_count
//   per entry: u16 class_id | u32 bin_count | f64 bandwidth_hz | bin_count x (f32 re, f32 im)

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stitch/binary_io.hpp"
#include "stitch/dsp.hpp"
#include "stitch/error.hpp"
#include "stitch/rng.hpp"
#include "stitch/waveform.hpp"

namespace stitch {

inline constexpr double kDefaultSilenceThreshold = 0.02;
inline constexpr std::size_t kSilenceSmoothing = 64;

struct BankEntry {
  int class_id = 0;
  std::vector<std::complex<float>> bins;  // contiguous, signal band only
  double bandwidth_hz = 0.0;              // bins.size() * source_bin_width_hz
  double source_bin_width_hz = 0.0;

  bool operator==(const BankEntry&) const = default;
};

struct SignalBank {
  int class_count = 0;
  double bin_width_hz = 0.0;
  std::vector<BankEntry> entries;

  std::vector<std::size_t> entries_of(int class_id) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].class_id == class_id) out.push_back(i);
    }
    return out;
  }

  bool operator==(const SignalBank&) const = default;
};

/// Trims leading and trailing silence. A sample is active when its
/// 64-sample moving-average power exceeds threshold_rel * peak.
inline IqBuffer crop_silence(const IqBuffer& x, double threshold_rel = kDefaultSilenceThreshold) {
  if (x.samples.empty()) throw Error(Errc::InvalidArgument, "crop_silence on empty buffer");
  if (!(threshold_rel > 0.0 && threshold_rel < 1.0)) {
    throw Error(Errc::InvalidArgument, "threshold_rel must lie in (0, 1)");
  }
  const std::size_t n = x.size();
  constexpr std::size_t before = kSilenceSmoothing / 2;
  constexpr std::size_t after = kSilenceSmoothing - before - 1;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + std::norm(x.samples[i]);
  std::vector<double> smooth(n);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= before ? i - before : 0;
    const std::size_t hi = std::min(n - 1, i + after);
    smooth[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
    peak = std::max(peak, smooth[i]);
  }
  const double threshold = threshold_rel * peak;
  std::size_t first = n;
  std::size_t last = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (smooth[i] > threshold) {
      first = std::min(first, i);
      last = i;
    }
  }
  if (first == n) throw Error(Errc::AllSilence, "no sample above threshold");
  return IqBuffer{std::vector<cplx>(x.samples.begin() + static_cast<std::ptrdiff_t>(first),
                                    x.samples.begin() + static_cast<std::ptrdiff_t>(last) + 1),
                  x.sample_rate_hz};
}

/// Zero-pads to the next power of two, transforms, masks to `band` and keeps
/// only the in-band bins.
inline BankEntry make_entry(const IqBuffer& x, const ProtocolClass& cls, const FilterSpec& band) {
  x.validate();
  if (cls.id < 1) throw Error(Errc::UnknownClass, "bank classes start at 1");
  const double nyquist = x.sample_rate_hz / 2.0;
  if (band.low_hz < -nyquist || band.high_hz > nyquist) {
    throw Error(Errc::InvalidBand, "band exceeds Nyquist range");
  }
  IqBuffer padded = x;
  padded.samples.resize(next_power_of_two(x.size()));
  const Spectrum spectrum = bandpass(fft_forward(padded), band);

  BankEntry entry;
  entry.class_id = cls.id;
  entry.source_bin_width_hz = spectrum.bin_width_hz;
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    const double fc = spectrum.bin_center_hz(k);
    if (fc >= band.low_hz && fc <= band.high_hz) {
      entry.bins.emplace_back(static_cast<float>(spectrum.bins[k].real()),
                              static_cast<float>(spectrum.bins[k].imag()));
    }
  }
  if (entry.bins.empty()) throw Error(Errc::InvalidBand, "band contains no bins");
  if (energy(std::span<const std::complex<float>>(entry.bins)) <= 0.0) {
    throw Error(Errc::InvalidArgument, "fragment has no energy in band");
  }
  entry.bandwidth_hz = static_cast<double>(entry.bins.size()) * entry.source_bin_width_hz;
  return entry;
}

inline FilterSpec nominal_band(const ProtocolClass& cls) {
  return {-cls.nominal_bandwidth_hz / 2.0, cls.nominal_bandwidth_hz / 2.0};
}

struct BankBuildOptions {
  std::size_t fft_size = 256;  // fragments are cut to (fft_size/2, fft_size] samples
  double silence_threshold = kDefaultSilenceThreshold;
  std::size_t min_fragments = 2;
  std::size_t max_fragments = 4;
};

/// Crops a capture and appends 2-4 fragments of random duration to `bank`.
/// Fragments are contiguous, non-overlapping slices of the active span.
inline void add_capture(SignalBank& bank, const IqBuffer& capture, const ProtocolClass& cls,
                        const BankBuildOptions& opts, Rng& rng) {
  if (!is_power_of_two(opts.fft_size) || opts.fft_size < 4) {
    throw Error(Errc::NonPowerOfTwoLength, "bank fft_size " + std::to_string(opts.fft_size));
  }
  const IqBuffer active = crop_silence(capture, opts.silence_threshold);
  const std::size_t min_len = opts.fft_size / 2 + 1;
  const std::size_t fit = active.size() / min_len;
  if (fit == 0) throw Error(Errc::InvalidArgument, "capture shorter than one fragment");
  const std::size_t hi = std::min(opts.max_fragments, fit);
  const std::size_t lo = std::min(opts.min_fragments, hi);
  const auto count = static_cast<std::size_t>(uniform_int(rng, lo, hi));

  std::vector<std::size_t> lengths(count);
  std::size_t used = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t remaining_min = (count - i - 1) * min_len;
    const std::size_t max_len = std::min(opts.fft_size, active.size() - used - remaining_min);
    lengths[i] = static_cast<std::size_t>(uniform_int(rng, min_len, max_len));
    used += lengths[i];
  }
  std::size_t slack = active.size() - used;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto gap = static_cast<std::size_t>(uniform_int(rng, 0, slack / (count - i)));
    slack -= gap;
    pos += gap;
    IqBuffer fragment{std::vector<cplx>(active.samples.begin() + static_cast<std::ptrdiff_t>(pos),
                                        active.samples.begin() + static_cast<std::ptrdiff_t>(pos + lengths[i])),
                      active.sample_rate_hz};
    pos += lengths[i];
    BankEntry entry = make_entry(fragment, cls, nominal_band(cls));
    if (bank.entries.empty() && bank.bin_width_hz == 0.0) bank.bin_width_hz = entry.source_bin_width_hz;
    if (entry.source_bin_width_hz != bank.bin_width_hz) {
      throw Error(Errc::ConfigMismatch, "fragment bin width differs from bank bin width");
    }
    bank.entries.push_back(std::move(entry));
  }
}

/// A burst of `cls` surrounded by silence, with white noise over the whole
/// capture at `snr_db`.
inline IqBuffer synthesize_capture(const ProtocolClass& cls, std::size_t burst_samples, std::size_t max_pad,
                                   double snr_db, std::uint64_t seed,
                                   double sample_rate_hz = kDefaultSampleRateHz,
                                   const WaveformOptions& options = {}) {
  Rng rng(seed);
  const auto lead = static_cast<std::size_t>(uniform_int(rng, 0, max_pad));
  const auto trail = static_cast<std::size_t>(uniform_int(rng, 0, max_pad));
  SynthParams p{cls, burst_samples, std::numeric_limits<double>::infinity(), rng(), sample_rate_hz, options};
  const IqBuffer burst = synthesize(p);
  IqBuffer x{std::vector<cplx>(lead + burst_samples + trail), sample_rate_hz};
  std::copy(burst.samples.begin(), burst.samples.end(), x.samples.begin() + static_cast<std::ptrdiff_t>(lead));
  detail::add_noise(x, snr_db, rng);
  return x;
}

struct SyntheticBankOptions {
  std::size_t captures_per_class = 40;
  std::size_t burst_samples = 1024;  // at least fft_size for four fragments to fit
  std::size_t max_pad = 256;
  double snr_db = 30.0;
  double sample_rate_hz = kDefaultSampleRateHz;
  WaveformOptions waveform;
  BankBuildOptions build;
};

/// Synthesize -> crop -> fragment -> transform -> prune, for every class.
/// Capture j of class c is seeded by mix_seed(seed, c * 2^20 + j).
inline SignalBank build_synthetic_bank(const std::vector<ProtocolClass>& classes,
                                       const SyntheticBankOptions& opts, std::uint64_t seed) {
  SignalBank bank;
  bank.class_count = static_cast<int>(classes.size());
  bank.bin_width_hz = opts.sample_rate_hz / static_cast<double>(opts.build.fft_size);
  for (const auto& cls : classes) {
    for (std::size_t j = 0; j < opts.captures_per_class; ++j) {
      const std::uint64_t cap_seed = mix_seed(seed, (static_cast<std::uint64_t>(cls.id) << 20) + j);
      const IqBuffer capture = synthesize_capture(cls, opts.burst_samples, opts.max_pad, opts.snr_db,
                                                  cap_seed, opts.sample_rate_hz, opts.waveform);
      Rng rng(splitmix64(cap_seed));
      add_capture(bank, capture, cls, opts.build, rng);
    }
  }
  return bank;
}

inline constexpr std::uint16_t kBankVersion = 1;

inline void bank_save(const SignalBank& bank, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  io::put_magic(os, "SBNK");
  io::put<std::uint16_t>(os, kBankVersion);
  io::put<std::uint16_t>(os, static_cast<std::uint16_t>(bank.class_count));
  io::put<double>(os, bank.bin_width_hz);
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(bank.entries.size()));
  for (const auto& e : bank.entries) {
    io::put<std::uint16_t>(os, static_cast<std::uint16_t>(e.class_id));
    io::put<std::uint32_t>(os, static_cast<std::uint32_t>(e.bins.size()));
    io::put<double>(os, e.bandwidth_hz);
    for (const auto& b : e.bins) {
      io::put<float>(os, b.real());
      io::put<float>(os, b.imag());
    }
  }
  if (!os) throw Error(Errc::Io, "write failed for " + path.string());
}

inline SignalBank bank_load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::NotFound, "bank " + path.string());
  constexpr Errc bad = Errc::CorruptBank;
  io::expect_magic(is, "SBNK", bad);
  const auto version = io::get<std::uint16_t>(is, bad);
  if (version != kBankVersion) throw Error(bad, "unsupported version " + std::to_string(version));
  SignalBank bank;
  bank.class_count = io::get<std::uint16_t>(is, bad);
  bank.bin_width_hz = io::get<double>(is, bad);
  if (!(bank.bin_width_hz > 0.0)) throw Error(bad, "non-positive bin width");
  const auto count = io::get<std::uint32_t>(is, bad);
  bank.entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    BankEntry e;
    e.class_id = io::get<std::uint16_t>(is, bad);
    if (e.class_id < 1 || e.class_id > bank.class_count) {
      throw Error(bad, "entry " + std::to_string(i) + " has class " + std::to_string(e.class_id));
    }
    const auto bins = io::get<std::uint32_t>(is, bad);
    if (bins == 0) throw Error(bad, "entry " + std::to_string(i) + " is empty");
    e.bandwidth_hz = io::get<double>(is, bad);
    e.source_bin_width_hz = bank.bin_width_hz;
    e.bins.resize(bins);
    for (auto& b : e.bins) {
      const float re = io::get<float>(is, bad);
      const float im = io::get<float>(is, bad);
      b = {re, im};
    }
    bank.entries.push_back(std::move(e));
  }
  io::expect_eof(is, bad);
  return bank;
}

}  // namespace stitch
