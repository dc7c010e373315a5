#pragma once

// Synthetic stand-ins for the five protocol classes. These are not
// standards-conformant PHYs; each family is chosen so its spectral shape is
// distinct and confined to the nominal band:
//   WiFi   OFDM, QPSK subcarriers, DC null and boosted constant pilots
//   LTE    OFDM, QPSK subcarriers, runs of unoccupied subcarriers (holes)
//   BLE    Gaussian-filtered binary FSK
//   LoRa   linear up-chirps with random cyclic shifts (one symbol per chirp)
//   ZigBee DSSS offset-QPSK with half-sine chip shaping

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stitch/dsp.hpp"
#include "stitch/error.hpp"
#include "stitch/rng.hpp"

namespace stitch {

struct ProtocolClass {
  int id = 0;  // 1..C; 0 is the implicit "empty" class
  std::string name;
  double nominal_bandwidth_hz = 0.0;

  bool operator==(const ProtocolClass&) const = default;
};

inline constexpr double kDefaultSampleRateHz = 25e6;

/// Desk-scale class table, ids 1..5.
inline const std::vector<ProtocolClass>& default_classes() {
  static const std::vector<ProtocolClass> classes = {
      {1, "WiFi", 8e6},
      {2, "LTE", 5e6},
      {3, "BLE", 1e6},
      {4, "LoRa", 3e6},
      {5, "ZigBee", 2e6},
  };
  return classes;
}

inline const ProtocolClass& class_by_id(int id) {
  for (const auto& c : default_classes()) {
    if (c.id == id) return c;
  }
  throw Error(Errc::UnknownClass, "class id " + std::to_string(id));
}

inline const ProtocolClass& class_by_name(std::string_view name) {
  for (const auto& c : default_classes()) {
    if (c.name == name) return c;
  }
  throw Error(Errc::UnknownClass, "class name \"" + std::string(name) + "\"");
}

/// Per-family knobs. Defaults target B = 25 MHz sampling.
struct WaveformOptions {
  std::size_t ofdm_fft = 256;          // subcarrier spacing = fs / ofdm_fft
  std::size_t ofdm_cp = 32;            // cyclic prefix samples
  double wifi_pilot_gain = 2.0;        // pilot amplitude relative to data
  double lte_hole_fraction = 0.25;     // fraction of in-band subcarriers left empty
  double ble_symbol_rate_hz = 1e6;
  double ble_mod_index = 0.5;          // deviation = h * Rs / 2
  double ble_bt = 0.5;
  std::size_t lora_chirp_samples = 128;
  double zigbee_chip_rate_hz = 2e6;
};

struct SynthParams {
  ProtocolClass cls;
  std::size_t duration_samples = 0;
  double snr_db = std::numeric_limits<double>::infinity();  // +inf: no noise
  std::uint64_t seed = 0;
  double sample_rate_hz = kDefaultSampleRateHz;
  WaveformOptions options;
};

namespace detail {

/// Active-subcarrier offsets for an OFDM signal of the given bandwidth, in
/// subcarrier units relative to DC, ascending.
inline std::vector<long long> ofdm_offsets(double bandwidth_hz, double spacing_hz) {
  const auto count = static_cast<long long>(std::floor(bandwidth_hz / spacing_hz));
  std::vector<long long> out;
  for (long long i = 0; i < count; ++i) out.push_back(i - count / 2);
  return out;
}

inline cplx qpsk(Rng& rng) {
  const auto sym = uniform_int(rng, 0, 3);
  constexpr double a = std::numbers::sqrt2 / 2.0;
  return {(sym & 1) ? a : -a, (sym & 2) ? a : -a};
}

/// Random composition of `total` into `parts` positive integers.
inline std::vector<std::size_t> random_composition(std::size_t total, std::size_t parts, Rng& rng) {
  std::vector<std::size_t> cuts;
  while (cuts.size() + 1 < parts) {
    const auto c = static_cast<std::size_t>(uniform_int(rng, 1, total - 1));
    if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::size_t> out;
  std::size_t prev = 0;
  for (auto c : cuts) {
    out.push_back(c - prev);
    prev = c;
  }
  out.push_back(total - prev);
  return out;
}

inline void add_noise(IqBuffer& x, double snr_db, Rng& rng) {
  if (!std::isfinite(snr_db)) return;
  const double power = std::pow(10.0, -snr_db / 10.0);
  for (auto& s : x.samples) s += complex_normal(rng, power);
}

inline void normalize_power(IqBuffer& x) {
  const double p = energy(x) / static_cast<double>(x.size());
  if (p > 0.0) {
    const double g = 1.0 / std::sqrt(p);
    for (auto& s : x.samples) s *= g;
  }
}

}  // namespace detail

/// Occupancy mask over `subcarriers` in-band subcarriers with
/// round(hole_fraction * subcarriers) of them switched off. The holes form
/// one to three runs and never touch the first or last subcarrier, so the
/// occupied span always equals the nominal band.
inline std::vector<bool> lte_subcarrier_mask(std::size_t subcarriers, double hole_fraction, Rng& rng) {
  std::vector<bool> mask(subcarriers, true);
  const auto holes = static_cast<std::size_t>(std::llround(hole_fraction * static_cast<double>(subcarriers)));
  if (holes == 0) return mask;
  if (holes + 2 > subcarriers) {
    throw Error(Errc::InvalidArgument, "hole fraction leaves no band edges");
  }
  const std::size_t active = subcarriers - holes;
  const std::size_t max_runs = std::min<std::size_t>({3, holes, active - 1});
  const auto runs = static_cast<std::size_t>(uniform_int(rng, 1, max_runs));
  const auto hole_runs = detail::random_composition(holes, runs, rng);
  const auto active_runs = detail::random_composition(active, runs + 1, rng);
  std::size_t pos = 0;
  for (std::size_t r = 0; r < runs; ++r) {
    pos += active_runs[r];
    for (std::size_t i = 0; i < hole_runs[r]; ++i) mask[pos++] = false;
  }
  return mask;
}

namespace detail {

inline IqBuffer synth_ofdm(const SynthParams& p, Rng& rng, bool lte) {
  const auto& o = p.options;
  const double spacing = p.sample_rate_hz / static_cast<double>(o.ofdm_fft);
  const auto offsets = ofdm_offsets(p.cls.nominal_bandwidth_hz, spacing);
  if (offsets.empty() || offsets.size() >= o.ofdm_fft) {
    throw Error(Errc::InvalidArgument, "OFDM bandwidth does not fit the subcarrier grid");
  }
  std::vector<bool> active(offsets.size(), true);
  std::vector<double> pilot_gain(offsets.size(), 0.0);
  if (lte) {
    active = lte_subcarrier_mask(offsets.size(), o.lte_hole_fraction, rng);
  } else {
    const double k = static_cast<double>(offsets.size());
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      if (offsets[i] == 0) active[i] = false;  // DC null
    }
    for (double frac : {-21.0 / 52.0, -7.0 / 52.0, 7.0 / 52.0, 21.0 / 52.0}) {
      const auto target = std::llround(frac * k);
      for (std::size_t i = 0; i < offsets.size(); ++i) {
        if (offsets[i] == target && target != 0) pilot_gain[i] = o.wifi_pilot_gain;
      }
    }
  }

  const std::size_t sym_len = o.ofdm_fft + o.ofdm_cp;
  const std::size_t lead = static_cast<std::size_t>(uniform_int(rng, 0, sym_len - 1));
  const std::size_t total = p.duration_samples + lead;
  std::vector<cplx> out;
  out.reserve(total + sym_len);
  std::vector<cplx> freq(o.ofdm_fft);
  while (out.size() < total) {
    std::fill(freq.begin(), freq.end(), cplx{});
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      const auto bin = static_cast<std::size_t>((offsets[i] + static_cast<long long>(o.ofdm_fft)) %
                                                static_cast<long long>(o.ofdm_fft));
      if (pilot_gain[i] > 0.0) {
        freq[bin] = {pilot_gain[i], 0.0};
      } else if (active[i]) {
        freq[bin] = qpsk(rng);
      }
    }
    detail::fft_radix2(freq, +1);
    for (std::size_t i = o.ofdm_fft - o.ofdm_cp; i < o.ofdm_fft; ++i) out.push_back(freq[i]);
    out.insert(out.end(), freq.begin(), freq.end());
  }
  IqBuffer x{std::vector<cplx>(out.begin() + static_cast<std::ptrdiff_t>(lead),
                               out.begin() + static_cast<std::ptrdiff_t>(total)),
             p.sample_rate_hz};
  return x;
}

inline IqBuffer synth_gfsk(const SynthParams& p, Rng& rng) {
  const auto& o = p.options;
  const double fs = p.sample_rate_hz;
  const double symbol_t = 1.0 / o.ble_symbol_rate_hz;
  const double deviation = o.ble_mod_index * o.ble_symbol_rate_hz / 2.0;
  const double kappa = std::numbers::pi * o.ble_bt * std::sqrt(2.0 / std::log(2.0));
  const double duration_t = static_cast<double>(p.duration_samples) / fs;
  const auto n_symbols = static_cast<std::size_t>(std::ceil(duration_t / symbol_t)) + 8;
  std::vector<double> bits(n_symbols);
  for (auto& b : bits) b = bernoulli(rng, 0.5) ? 1.0 : -1.0;
  const double t0 = uniform(rng, 0.0, symbol_t) + 4.0 * symbol_t;

  // Frequency pulse: rectangular symbol convolved with a Gaussian of
  // bandwidth-time product BT.
  auto pulse = [&](double u) {
    return 0.5 * (std::erf(kappa * (u + 0.5)) - std::erf(kappa * (u - 0.5)));
  };
  IqBuffer x{std::vector<cplx>(p.duration_samples), fs};
  double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  for (std::size_t n = 0; n < p.duration_samples; ++n) {
    const double t = t0 + static_cast<double>(n) / fs;
    const double u = t / symbol_t;
    const auto center = static_cast<long long>(std::floor(u));
    double f = 0.0;
    for (long long k = center - 3; k <= center + 3; ++k) {
      if (k < 0 || k >= static_cast<long long>(n_symbols)) continue;
      f += bits[static_cast<std::size_t>(k)] * pulse(u - static_cast<double>(k) - 0.5);
    }
    x.samples[n] = std::polar(1.0, phase);
    phase += 2.0 * std::numbers::pi * deviation * f / fs;
  }
  return x;
}

inline IqBuffer synth_chirp(const SynthParams& p, Rng& rng) {
  const auto period = p.options.lora_chirp_samples;
  const double fs = p.sample_rate_hz;
  const double bw = p.cls.nominal_bandwidth_hz;
  const double slope = bw / static_cast<double>(period);  // Hz per sample
  IqBuffer x{std::vector<cplx>(p.duration_samples), fs};
  const auto lead = static_cast<std::size_t>(uniform_int(rng, 0, period - 1));
  double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  std::size_t shift = static_cast<std::size_t>(uniform_int(rng, 0, period - 1));
  for (std::size_t n = 0; n < p.duration_samples; ++n) {
    const std::size_t pos = (n + lead) % period;
    if (pos == 0 && n > 0) shift = static_cast<std::size_t>(uniform_int(rng, 0, period - 1));
    const std::size_t chip = (pos + shift) % period;
    const double f = -bw / 2.0 + slope * (static_cast<double>(chip) + 0.5);
    x.samples[n] = std::polar(1.0, phase);
    phase += 2.0 * std::numbers::pi * f / fs;
  }
  return x;
}

inline IqBuffer synth_oqpsk(const SynthParams& p, Rng& rng) {
  const double fs = p.sample_rate_hz;
  const double chip_t = 1.0 / p.options.zigbee_chip_rate_hz;
  const double duration_t = static_cast<double>(p.duration_samples) / fs;
  const auto n_chips = static_cast<std::size_t>(std::ceil(duration_t / chip_t)) + 8;
  std::vector<double> chips(n_chips);
  for (auto& c : chips) c = bernoulli(rng, 0.5) ? 1.0 : -1.0;
  const double t0 = uniform(rng, 0.0, 2.0 * chip_t) + 2.0 * chip_t;
  IqBuffer x{std::vector<cplx>(p.duration_samples), fs};
  // Even chips on I, odd chips on Q; each chip is a half-sine spanning two
  // chip periods, consecutive chips offset by one chip period.
  for (std::size_t n = 0; n < p.duration_samples; ++n) {
    const double t = t0 + static_cast<double>(n) / fs;
    const auto k = static_cast<long long>(std::floor(t / chip_t));
    double i_val = 0.0;
    double q_val = 0.0;
    for (long long c = k - 1; c <= k; ++c) {
      if (c < 0 || c >= static_cast<long long>(n_chips)) continue;
      const double u = (t - static_cast<double>(c) * chip_t) / (2.0 * chip_t);
      const double shape = std::sin(std::numbers::pi * u);
      if (c % 2 == 0) {
        i_val += chips[static_cast<std::size_t>(c)] * shape;
      } else {
        q_val += chips[static_cast<std::size_t>(c)] * shape;
      }
    }
    x.samples[n] = {i_val, q_val};
  }
  return x;
}

}  // namespace detail

/// Unit-power signal of the requested family plus optional white noise at
/// `snr_db` (full-band SNR). Deterministic in `seed`.
inline IqBuffer synthesize(const SynthParams& p) {
  if (p.duration_samples < 64) {
    throw Error(Errc::InvalidArgument, "duration_samples must be at least 64");
  }
  if (!(p.sample_rate_hz > 0.0) || !(p.cls.nominal_bandwidth_hz > 0.0)) {
    throw Error(Errc::InvalidArgument, "rates and bandwidth must be positive");
  }
  if (p.cls.nominal_bandwidth_hz > p.sample_rate_hz) {
    throw Error(Errc::InvalidArgument, "nominal bandwidth exceeds sample rate");
  }
  if (p.cls.id < 1) throw Error(Errc::UnknownClass, "class id must be >= 1");
  Rng rng(p.seed);
  IqBuffer x;
  if (p.cls.name == "WiFi") {
    x = detail::synth_ofdm(p, rng, false);
  } else if (p.cls.name == "LTE") {
    x = detail::synth_ofdm(p, rng, true);
  } else if (p.cls.name == "BLE") {
    x = detail::synth_gfsk(p, rng);
  } else if (p.cls.name == "LoRa") {
    x = detail::synth_chirp(p, rng);
  } else if (p.cls.name == "ZigBee") {
    x = detail::synth_oqpsk(p, rng);
  } else {
    throw Error(Errc::UnknownClass, "no waveform family for \"" + p.cls.name + "\"");
  }
  detail::normalize_power(x);
  detail::add_noise(x, p.snr_db, rng);
  return x;
}

/// Circularly-symmetric complex white Gaussian noise, E|x|^2 = power.
inline IqBuffer synthesize_noise(std::size_t duration_samples, double power, std::uint64_t seed,
                                 double sample_rate_hz = kDefaultSampleRateHz) {
  if (duration_samples == 0) throw Error(Errc::InvalidArgument, "noise duration must be positive");
  if (!(power > 0.0)) throw Error(Errc::InvalidArgument, "noise power must be positive");
  Rng rng(seed);
  IqBuffer x{std::vector<cplx>(duration_samples), sample_rate_hz};
  for (auto& s : x.samples) s = complex_normal(rng, power);
  return x;
}

}  // namespace stitch
