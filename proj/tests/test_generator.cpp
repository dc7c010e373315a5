#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "stitch/generator.hpp"

using namespace stitch;

namespace {

auto code_is(Errc c) {
  return Catch::Matchers::Predicate<Error>([c](const Error& e) { return e.code() == c; }, to_string(c));
}

// One white-noise entry per class, pruned to a band of `bw_hz[c-1]`.
SignalBank flat_bank(const std::vector<double>& bw_hz, std::size_t n, double rate, std::uint64_t seed) {
  SignalBank bank;
  bank.class_count = static_cast<int>(bw_hz.size());
  bank.bin_width_hz = rate / static_cast<double>(n);
  for (std::size_t c = 0; c < bw_hz.size(); ++c) {
    const ProtocolClass cls{static_cast<int>(c + 1), "c", bw_hz[c]};
    bank.entries.push_back(make_entry(synthesize_noise(n, 1.0, seed + c, rate), cls, nominal_band(cls)));
  }
  return bank;
}

const SignalBank& small_bank() {
  static const SignalBank bank = [] {
    SyntheticBankOptions opt;
    opt.captures_per_class = 3;
    return build_synthetic_bank(default_classes(), opt, 21);
  }();
  return bank;
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("signal count distribution") {
  GeneratorConfig cfg;
  Rng rng(1);
  SECTION("p_e = 1 is always empty") {
    cfg.p_empty = 1.0;
    for (int i = 0; i < 1000; ++i) CHECK(draw_signal_count(cfg, rng) == 0);
  }
  SECTION("n_s = 1, p_e = 0 is always one") {
    cfg.p_empty = 0.0;
    cfg.max_signals = 1;
    for (int i = 0; i < 1000; ++i) CHECK(draw_signal_count(cfg, rng) == 1);
  }
  SECTION("Monte Carlo frequencies") {
    std::array<int, 3> hist{};
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) hist[static_cast<std::size_t>(draw_signal_count(cfg, rng))]++;
    CHECK(hist[0] / double(draws) >= 0.04);
    CHECK(hist[0] / double(draws) <= 0.06);
    CHECK(std::abs(hist[1] / double(draws) - 0.475) < 0.01);
    CHECK(std::abs(hist[2] / double(draws) - 0.475) < 0.01);
  }
}

TEST_CASE("centre frequency distribution") {
  GeneratorConfig cfg;
  Rng rng(2);
  SECTION("p_c = 1 is always DC") {
    cfg.p_center = 1.0;
    for (int i = 0; i < 1000; ++i) CHECK(draw_center_freq(cfg, 2e6, rng) == 0.0);
  }
  SECTION("off-centre draws are uniform on the extended band") {
    std::vector<double> f;
    for (int i = 0; i < 100000; ++i) {
      const double v = draw_center_freq(cfg, 2e6, rng);
      if (v != 0.0) f.push_back(v);
    }
    CHECK(std::abs(f.size() / 1e5 - 0.5) < 0.01);
    std::sort(f.begin(), f.end());
    const double lo = -13.5e6, hi = 13.5e6;
    double ks = 0;
    const double m = static_cast<double>(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      CHECK((f[i] > lo && f[i] < hi));
      const double cdf = (f[i] - lo) / (hi - lo);
      ks = std::max({ks, std::abs(cdf - i / m), std::abs(cdf - (i + 1) / m)});
    }
    CHECK(ks < 0.01);
  }
  SECTION("every placed span intersects the window") {
    for (double bw : {0.5e6, 2e6, 8e6}) {
      const auto bins = static_cast<std::size_t>(std::llround(bw / cfg.resolution_hz()));
      for (int i = 0; i < 20000; ++i) {
        const double f = draw_center_freq(cfg, bw, rng);
        const long long first = placement_first_bin(cfg.n_iq, cfg.resolution_hz(), bins, f);
        bool any = false;
        for (std::size_t k = 0; k < bins; ++k) {
          const long long j = first + static_cast<long long>(k);
          any = any || (j >= 0 && j < static_cast<long long>(cfg.n_iq));
        }
        REQUIRE(any);
      }
    }
  }
}

TEST_CASE("config validation") {
  GeneratorConfig cfg;
  CHECK(cfg.violations().empty());
  cfg.n_iq = 48;
  CHECK_FALSE(cfg.violations().empty());
  cfg.n_iq = 256;
  cfg.p_empty = 1.5;
  CHECK_THROWS_MATCHES(cfg.validate(), Error, code_is(Errc::InvalidConfig));
  cfg.p_empty = 0.05;
  cfg.max_signals = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("empty draw gives pure noise and an all-zero label") {
  GeneratorConfig cfg;
  cfg.p_empty = 1.0;
  const StitchedSample s = generate_sample(cfg, small_bank(), 3);
  CHECK(s.label.empty());
  CHECK(s.provenance.empty());
  double p = 0;
  for (float v : s.input) p += double(v) * v;
  CHECK(p / 256.0 == Catch::Approx(256.0).epsilon(0.3));  // per-bin noise power is n * noise_power
}

TEST_CASE("2 MHz signal at DC with 1024 bins") {
  GeneratorConfig cfg;
  cfg.n_iq = 1024;
  cfg.class_count = 1;
  cfg.p_empty = 0.0;
  cfg.p_center = 1.0;
  cfg.max_signals = 1;
  const SignalBank bank = flat_bank({2e6}, 1024, 25e6, 4);
  const StitchedSample s = generate_sample(cfg, bank, 0);
  const double F = cfg.resolution_hz();
  const auto lo = static_cast<std::size_t>(std::ceil(512 - 1e6 / F));
  const auto hi = static_cast<std::size_t>(std::floor(512 + 1e6 / F));
  CHECK(lo == 472);
  CHECK(hi == 552);
  for (std::size_t j = 0; j < 1024; ++j) CHECK(s.label.at(0, j) == (j >= lo && j <= hi));
}

TEST_CASE("overlapping signals set bits in both rows") {
  GeneratorConfig cfg;
  cfg.class_count = 2;
  cfg.p_empty = 0.0;
  cfg.p_center = 1.0;
  const SignalBank bank = flat_bank({4e6, 2e6}, 256, 25e6, 9);
  int seen = 0;
  for (std::uint64_t k = 0; k < 200 && seen < 3; ++k) {
    const StitchedSample s = generate_sample(cfg, bank, k);
    if (s.provenance.size() != 2 || s.provenance[0].class_id == s.provenance[1].class_id) continue;
    ++seen;
    CHECK(s.label.at(0, 128));
    CHECK(s.label.at(1, 128));
  }
  CHECK(seen == 3);
}

TEST_CASE("labels match a brute-force coverage scan") {
  GeneratorConfig cfg;
  cfg.master_seed = 77;
  const double F = cfg.resolution_hz();
  for (std::uint64_t k = 0; k < 300; ++k) {
    const StitchedSample s = generate_sample(cfg, small_bank(), k);
    LabelMatrix expect(5, cfg.n_iq);
    for (const auto& p : s.provenance) {
      const auto& e = small_bank().entries[p.bank_entry_index];
      CHECK(e.class_id == p.class_id);
      // Entry bin i sits at absolute column n/2 + round(f/F) + i - floor(L/2).
      for (std::size_t i = 0; i < e.bins.size(); ++i) {
        const long long j = static_cast<long long>(cfg.n_iq / 2) + std::llround(p.center_hz / F) +
                            static_cast<long long>(i) - static_cast<long long>(e.bins.size() / 2);
        if (j >= 0 && j < static_cast<long long>(cfg.n_iq)) expect.set(static_cast<std::size_t>(p.class_id - 1), static_cast<std::size_t>(j));
      }
    }
    REQUIRE(s.label == expect);
  }
}

TEST_CASE("shifting the centre by whole bins shifts the label") {
  GeneratorConfig cfg;
  cfg.class_count = 1;
  const SignalBank bank = flat_bank({3e6}, 256, 25e6, 5);
  const double F = cfg.resolution_hz();
  const auto L = bank.entries[0].bins.size();
  for (long long base : {-40LL, 0LL, 17LL}) {
    for (long long k : {1LL, 5LL}) {
      const long long a = placement_first_bin(256, F, L, static_cast<double>(base) * F);
      const long long b = placement_first_bin(256, F, L, static_cast<double>(base + k) * F);
      CHECK(b - a == k);
    }
  }
}

TEST_CASE("unlabelled columns carry only noise power") {
  GeneratorConfig cfg;
  cfg.master_seed = 5;
  double sum = 0;
  std::size_t count = 0;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const StitchedSample s = generate_sample(cfg, small_bank(), k);
    for (std::size_t j = 0; j < cfg.n_iq; ++j) {
      bool any = false;
      for (std::size_t c = 0; c < 5; ++c) any = any || s.label.at(c, j);
      if (any) continue;
      sum += double(s.input[j]) * s.input[j] + double(s.input[cfg.n_iq + j]) * s.input[cfg.n_iq + j];
      ++count;
    }
  }
  CHECK(sum / static_cast<double>(count) == Catch::Approx(256.0).epsilon(0.02));
}

TEST_CASE("samples are pure functions of the index") {
  GeneratorConfig cfg;
  const StitchedSample a = generate_sample(cfg, small_bank(), 42);
  const StitchedSample b = generate_sample(cfg, small_bank(), 42);
  CHECK(a.input == b.input);
  CHECK(a.label == b.label);
  CHECK(generate_sample(cfg, small_bank(), 43).input != a.input);
  for (float v : a.input) CHECK(std::isfinite(v));
}

TEST_CASE("bank geometry must match the generator") {
  GeneratorConfig cfg;
  cfg.n_iq = 512;
  CHECK_THROWS_MATCHES(generate_sample(cfg, small_bank(), 0), Error, code_is(Errc::ConfigMismatch));
}

TEST_CASE("dataset files") {
  GeneratorConfig cfg;
  cfg.master_seed = 9;
  const auto dir = std::filesystem::temp_directory_path();
  const auto p1 = dir / "stitch_gen_1.stch";
  const auto p8 = dir / "stitch_gen_8.stch";
  generate_dataset(cfg, small_bank(), 300, p1, 1);
  generate_dataset(cfg, small_bank(), 300, p8, 8);
  CHECK(slurp(p1) == slurp(p8));

  const Dataset ds = read_dataset(p1);
  CHECK(ds.header.count == 300);
  CHECK(ds.header.n_iq == 256);
  const Dataset mem = generate_in_memory(cfg, small_bank(), 300);
  for (std::size_t i = 0; i < 300; ++i) {
    CHECK(ds.samples[i].input == mem.samples[i].input);
    CHECK(ds.samples[i].label == mem.samples[i].label);
    CHECK(ds.samples[i].seed == mix_seed(9, i));
  }

  std::filesystem::resize_file(p1, std::filesystem::file_size(p1) - 3);
  CHECK_THROWS_MATCHES(read_dataset(p1), Error, code_is(Errc::CorruptDataset));
  CHECK_THROWS_MATCHES(read_dataset(dir / "stitch_does_not_exist.stch"), Error, code_is(Errc::NotFound));
  std::filesystem::remove(p1);
  std::filesystem::remove(p8);
}

TEST_CASE("empty-label fraction over 20000 samples") {
  GeneratorConfig cfg;
  cfg.master_seed = 1234;
  std::size_t empty = 0;
  for (std::uint64_t k = 0; k < 20000; ++k) {
    Rng rng(mix_seed(cfg.master_seed, k));
    empty += draw_signal_count(cfg, rng) == 0;  // same first draw as generate_sample
  }
  CHECK(empty / 20000.0 >= 0.04);
  CHECK(empty / 20000.0 <= 0.06);
}
