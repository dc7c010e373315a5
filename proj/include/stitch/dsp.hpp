#pragma once

// Complex-sample containers and spectral primitives.
//
// Conventions used everywhere in the library:
//   * forward transform is the unnormalized DFT, inverse applies 1/n;
//   * spectra are stored DC-centered: index n/2 holds DC, index 0 holds -B/2;
//   * no window is applied before the transform.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "stitch/error.hpp"

namespace stitch {

using cplx = std::complex<double>;

struct IqBuffer {
  std::vector<cplx> samples;
  double sample_rate_hz = 0.0;

  std::size_t size() const { return samples.size(); }

  /// Throws InvalidArgument when the buffer violates its invariants
  /// (empty, non-positive rate, non-finite samples).
  void validate() const {
    if (samples.empty()) throw Error(Errc::InvalidArgument, "IqBuffer is empty");
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
      throw Error(Errc::InvalidArgument, "IqBuffer sample rate must be positive");
    }
    for (const auto& s : samples) {
      if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
        throw Error(Errc::InvalidArgument, "IqBuffer contains non-finite samples");
      }
    }
  }
};

struct Spectrum {
  std::vector<cplx> bins;  // DC-centered
  double bin_width_hz = 0.0;

  std::size_t size() const { return bins.size(); }
  double bandwidth_hz() const { return bin_width_hz * static_cast<double>(bins.size()); }

  /// Center frequency of bin `k` relative to DC.
  double bin_center_hz(std::size_t k) const {
    return (static_cast<double>(k) - static_cast<double>(bins.size() / 2)) * bin_width_hz;
  }
};

/// Passband edges relative to DC.
struct FilterSpec {
  double low_hz = 0.0;
  double high_hz = 0.0;
};

template <class C>
double energy(std::span<const C> x) {
  double e = 0.0;
  for (const auto& v : x) e += std::norm(std::complex<double>(v));
  return e;
}

inline double energy(const IqBuffer& x) { return energy(std::span<const cplx>(x.samples)); }
inline double energy(const Spectrum& s) { return energy(std::span<const cplx>(s.bins)); }

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

constexpr std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace detail {

/// In-place iterative radix-2 decimation-in-time transform in natural order.
/// sign = -1 for the forward kernel e^{-2 pi i jk/n}, +1 for the inverse
/// kernel. No scaling is applied.
inline void fft_radix2(std::span<cplx> a, int sign) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) {
    throw Error(Errc::NonPowerOfTwoLength, "transform length " + std::to_string(n));
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  std::vector<cplx> twiddle(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddle[k] = {std::cos(angle), std::sin(angle)};
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cplx u = a[start + k];
        const cplx v = a[start + k + half] * twiddle[k * step];
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

}  // namespace detail

/// Natural order -> DC-centered order.
template <class C>
std::vector<C> fftshift(std::span<const C> x) {
  const std::size_t n = x.size();
  std::vector<C> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = x[(k + n / 2) % n];
  return out;
}

/// DC-centered order -> natural order.
template <class C>
std::vector<C> ifftshift(std::span<const C> x) {
  const std::size_t n = x.size();
  std::vector<C> out(n);
  for (std::size_t k = 0; k < n; ++k) out[(k + n / 2) % n] = x[k];
  return out;
}

inline Spectrum fft_forward(const IqBuffer& x) {
  if (!is_power_of_two(x.size())) {
    throw Error(Errc::NonPowerOfTwoLength, "fft_forward input length " + std::to_string(x.size()));
  }
  std::vector<cplx> work = x.samples;
  detail::fft_radix2(work, -1);
  return Spectrum{fftshift(std::span<const cplx>(work)),
                  x.sample_rate_hz / static_cast<double>(x.size())};
}

inline IqBuffer fft_inverse(const Spectrum& s) {
  if (!is_power_of_two(s.size())) {
    throw Error(Errc::NonPowerOfTwoLength, "fft_inverse input length " + std::to_string(s.size()));
  }
  std::vector<cplx> work = ifftshift(std::span<const cplx>(s.bins));
  detail::fft_radix2(work, +1);
  const double scale = 1.0 / static_cast<double>(work.size());
  for (auto& v : work) v *= scale;
  return IqBuffer{std::move(work), s.bin_width_hz * static_cast<double>(s.size())};
}

/// Moves every bin by round(shift_hz / bin_width_hz) positions. Bins pushed
/// past either edge are dropped and the vacated edge is zero-filled.
inline Spectrum freq_shift(const Spectrum& s, double shift_hz) {
  const auto n = static_cast<long long>(s.size());
  const auto k = std::llround(shift_hz / s.bin_width_hz);
  Spectrum out{std::vector<cplx>(s.size()), s.bin_width_hz};
  for (long long i = 0; i < n; ++i) {
    const long long j = i + k;
    if (j >= 0 && j < n) out.bins[static_cast<std::size_t>(j)] = s.bins[static_cast<std::size_t>(i)];
  }
  return out;
}

/// Ideal brick-wall mask: bins whose center lies in [low_hz, high_hz] pass.
inline Spectrum bandpass(const Spectrum& s, const FilterSpec& f) {
  if (!(f.low_hz < f.high_hz)) {
    throw Error(Errc::InvalidBand, "low edge must be below high edge");
  }
  Spectrum out{std::vector<cplx>(s.size()), s.bin_width_hz};
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double fc = s.bin_center_hz(k);
    if (fc >= f.low_hz && fc <= f.high_hz) out.bins[k] = s.bins[k];
  }
  return out;
}

/// Moving average of |X_k|^2 with a symmetric odd window that shrinks at the
/// edges (the average is taken over the bins actually inside the spectrum).
template <class C>
std::vector<double> smoothed_power(std::span<const C> bins, std::size_t window_bins) {
  const std::size_t n = bins.size();
  if (window_bins == 0 || window_bins % 2 == 0 || window_bins > n) {
    throw Error(Errc::InvalidWindow, "window must be odd and at most " + std::to_string(n));
  }
  std::vector<double> power(n);
  for (std::size_t k = 0; k < n; ++k) power[k] = std::norm(std::complex<double>(bins[k]));
  // Direct summation rather than prefix sums: no cancellation when the
  // dynamic range across the spectrum is large.
  const std::size_t half = window_bins / 2;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k >= half ? k - half : 0;
    const std::size_t hi = std::min(n - 1, k + half);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += power[j];
    out[k] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

inline std::vector<double> smoothed_power(const Spectrum& s, std::size_t window_bins) {
  return smoothed_power(std::span<const cplx>(s.bins), window_bins);
}

}  // namespace stitch
