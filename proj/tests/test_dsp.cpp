#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "stitch/dsp.hpp"
#include "stitch/rng.hpp"

using namespace stitch;

namespace {

// O(n^2) reference, natural order.
std::vector<cplx> naive_dft(const std::vector<cplx>& x, int sign) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc{};
    for (std::size_t j = 0; j < n; ++j) {
      const double a = sign * 2.0 * std::numbers::pi * static_cast<double>(j * k % n) / static_cast<double>(n);
      acc += x[j] * cplx(std::cos(a), std::sin(a));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<cplx> random_vec(std::size_t n, Rng& rng) {
  std::vector<cplx> v(n);
  for (auto& s : v) s = complex_normal(rng, 1.0);
  return v;
}

double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("impulse transforms to a flat spectrum") {
  const Spectrum s = fft_forward(IqBuffer{{1, 0, 0, 0}, 4.0});
  for (const auto& b : s.bins) CHECK(std::abs(b - cplx(1, 0)) < 1e-12);
  CHECK(s.bin_width_hz == 1.0);
}

TEST_CASE("constant input lands in the centre bin") {
  const Spectrum s = fft_forward(IqBuffer{{1, 1, 1, 1}, 1e6});
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(s.bins[k] - cplx(k == 2 ? 4.0 : 0.0, 0)) < 1e-12);
  CHECK(s.bin_center_hz(2) == 0.0);
}

TEST_CASE("fft_forward matches the naive DFT") {
  Rng rng(3);
  for (std::size_t n : {2u, 8u, 64u, 256u, 1024u}) {
    const auto x = random_vec(n, rng);
    const Spectrum s = fft_forward(IqBuffer{x, 1.0});
    const auto ref = fftshift(std::span<const cplx>(naive_dft(x, -1)));
    CHECK(max_abs_diff(s.bins, ref) < 1e-6);
  }
}

TEST_CASE("fft_inverse undoes fft_forward") {
  Rng rng(4);
  const auto x = random_vec(64, rng);
  const IqBuffer back = fft_inverse(fft_forward(IqBuffer{x, 2e6}));
  CHECK(max_abs_diff(back.samples, x) < 1e-6);
  CHECK(back.sample_rate_hz == Catch::Approx(2e6));
}

TEST_CASE("fft_inverse of a centred DC spectrum is constant") {
  const IqBuffer x = fft_inverse(Spectrum{{0, 0, 4, 0}, 1.0});
  for (const auto& s : x.samples) CHECK(std::abs(s - cplx(1, 0)) < 1e-12);
}

TEST_CASE("fft_inverse is linear") {
  Rng rng(5);
  const auto s1 = random_vec(128, rng);
  const auto s2 = random_vec(128, rng);
  const cplx a(0.7, -1.2), b(-2.0, 0.3);
  std::vector<cplx> mix(128);
  for (std::size_t i = 0; i < 128; ++i) mix[i] = a * s1[i] + b * s2[i];
  const auto lhs = fft_inverse(Spectrum{mix, 1.0}).samples;
  const auto r1 = fft_inverse(Spectrum{s1, 1.0}).samples;
  const auto r2 = fft_inverse(Spectrum{s2, 1.0}).samples;
  std::vector<cplx> rhs(128);
  for (std::size_t i = 0; i < 128; ++i) rhs[i] = a * r1[i] + b * r2[i];
  CHECK(max_abs_diff(lhs, rhs) < 1e-6);
}

TEST_CASE("non power of two lengths are rejected") {
  CHECK_THROWS_MATCHES(fft_forward(IqBuffer{std::vector<cplx>(12), 1.0}), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == Errc::NonPowerOfTwoLength;
                       }));
  CHECK_THROWS_AS(fft_inverse(Spectrum{std::vector<cplx>(0), 1.0}), Error);
}

TEST_CASE("freq_shift moves bins by whole positions") {
  Spectrum s{std::vector<cplx>(32), 100.0};
  s.bins[10] = {2, 1};
  SECTION("zero shift is the identity") { CHECK(freq_shift(s, 0.0).bins == s.bins); }
  SECTION("three bins up") {
    const Spectrum t = freq_shift(s, 300.0);
    CHECK(t.bins[13] == cplx(2, 1));
    CHECK(energy(t) == Catch::Approx(energy(s)));
  }
  SECTION("bins pushed past the edge are dropped") {
    Rng rng(6);
    Spectrum w{random_vec(32, rng), 100.0};
    const Spectrum t = freq_shift(w, -5 * 100.0);
    double lost = 0;
    for (std::size_t k = 0; k < 5; ++k) lost += std::norm(w.bins[k]);
    CHECK(energy(t) == Catch::Approx(energy(w) - lost).epsilon(1e-12));
    for (std::size_t k = 27; k < 32; ++k) CHECK(t.bins[k] == cplx{});
  }
}

TEST_CASE("bandpass keeps bins whose centre is in the band") {
  Rng rng(7);
  Spectrum s{random_vec(256, rng), 1000.0};
  SECTION("full band is the identity") { CHECK(bandpass(s, {-128000.0, 127000.0}).bins == s.bins); }
  SECTION("zero input stays zero") {
    Spectrum z{std::vector<cplx>(256), 1000.0};
    CHECK(energy(bandpass(z, {-1000.0, 1000.0})) == 0.0);
  }
  SECTION("quarter band") {
    const FilterSpec f{-32000.0, 31000.0};
    const Spectrum t = bandpass(s, f);
    std::size_t kept = 0;
    for (std::size_t k = 0; k < 256; ++k) {
      const bool in = s.bin_center_hz(k) >= f.low_hz && s.bin_center_hz(k) <= f.high_hz;
      kept += in;
      CHECK(t.bins[k] == (in ? s.bins[k] : cplx{}));
    }
    CHECK(kept == 64);
  }
  SECTION("inverted band is an error") {
    CHECK_THROWS_MATCHES(bandpass(s, {10.0, -10.0}), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Errc::InvalidBand;
                         }));
  }
}

TEST_CASE("smoothed_power against direct averaging") {
  Rng rng(8);
  const auto x = random_vec(40, rng);
  Spectrum s{x, 1.0};
  SECTION("window 1 is pointwise power") {
    const auto p = smoothed_power(s, 1);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(p[k] == Catch::Approx(std::norm(x[k])));
  }
  SECTION("window 7, edges shrink") {
    const auto p = smoothed_power(s, 7);
    for (std::size_t k = 0; k < x.size(); ++k) {
      double sum = 0;
      int cnt = 0;
      for (int j = static_cast<int>(k) - 3; j <= static_cast<int>(k) + 3; ++j) {
        if (j < 0 || j >= static_cast<int>(x.size())) continue;
        sum += std::norm(x[static_cast<std::size_t>(j)]);
        ++cnt;
      }
      CHECK(p[k] == Catch::Approx(sum / cnt).epsilon(1e-12));
    }
  }
  SECTION("constant magnitude stays constant") {
    Spectrum c{std::vector<cplx>(16, cplx(0.6, 0.8)), 1.0};
    for (double v : smoothed_power(c, 5)) CHECK(v == Catch::Approx(1.0));
  }
  SECTION("impulse with window 3") {
    Spectrum imp{std::vector<cplx>(9), 1.0};
    imp.bins[4] = std::sqrt(6.0);
    const auto p = smoothed_power(imp, 3);
    CHECK(p[3] == Catch::Approx(2.0));
    CHECK(p[4] == Catch::Approx(2.0));
    CHECK(p[5] == Catch::Approx(2.0));
    CHECK(p[2] == 0.0);
    Spectrum edge{std::vector<cplx>(9), 1.0};
    edge.bins[0] = std::sqrt(6.0);
    const auto q = smoothed_power(edge, 3);
    CHECK(q[0] == Catch::Approx(3.0));  // two bins in the shrunken window
    CHECK(q[1] == Catch::Approx(2.0));
  }
  SECTION("invalid windows") {
    for (std::size_t w : {0u, 4u, 41u}) {
      CHECK_THROWS_MATCHES(smoothed_power(s, w), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::InvalidWindow;
                           }));
    }
  }
}

TEST_CASE("IqBuffer validation") {
  CHECK_THROWS_AS((IqBuffer{{}, 1.0}.validate()), Error);
  CHECK_THROWS_AS((IqBuffer{{1}, 0.0}.validate()), Error);
  CHECK_THROWS_AS((IqBuffer{{cplx(NAN, 0)}, 1.0}.validate()), Error);
  CHECK_NOTHROW((IqBuffer{{1}, 1.0}.validate()));
}
