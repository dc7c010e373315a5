#pragma once

// Portable random variates on top of std::mt19937_64.
//
// The engine's output sequence is fixed by the standard, but the std::
// distributions are not, so files generated on one toolchain would differ on
// another. The transforms here are written out so every artifact is a pure
// function of its seed.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace stitch {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Per-item seed derivation: seed_k = splitmix64(master ^ splitmix64(k)).
/// Used for dataset samples, bank captures and anything else indexed by k.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t k) {
  return splitmix64(master ^ splitmix64(k));
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform on the open interval (lo, hi).
inline double uniform_open(Rng& rng, double lo, double hi) {
  for (;;) {
    const double u = uniform01(rng);
    if (u > 0.0) return lo + (hi - lo) * u;
  }
}

/// Uniform integer on [lo, hi] (inclusive), unbiased by rejection.
inline std::uint64_t uniform_int(Rng& rng, std::uint64_t lo, std::uint64_t hi) {
  const std::uint64_t span = hi - lo;
  if (span == ~std::uint64_t{0}) return rng();
  const std::uint64_t range = span + 1;
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % range);
  for (;;) {
    const std::uint64_t x = rng();
    if (x < limit) return lo + x % range;
  }
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

/// Standard normal via Box-Muller (no cached second variate, so the draw
/// count per call is fixed at two engine outputs).
inline double normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Circularly-symmetric complex Gaussian with E|z|^2 = power.
inline std::complex<double> complex_normal(Rng& rng, double power) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  const double r = std::sqrt(-power * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(phi), r * std::sin(phi)};
}

}  // namespace stitch
