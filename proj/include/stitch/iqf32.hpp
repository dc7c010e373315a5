#pragma once

// IQF32 raw capture files: interleaved little-endian float32 I/Q pairs, with a
// JSON sidecar (`<file>.json`) carrying sample_rate_hz, center_freq_hz, class
// and sample_count.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "stitch/binary_io.hpp"
#include "stitch/dsp.hpp"
#include "stitch/error.hpp"

namespace stitch {

struct IqMetadata {
  double sample_rate_hz = 0.0;
  double center_freq_hz = 0.0;
  std::string class_name;
  std::uint64_t sample_count = 0;
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& data_path) {
  auto p = data_path;
  p += ".json";
  return p;
}

inline void write_iqf32(const std::filesystem::path& path, const IqBuffer& x,
                        const std::string& class_name, double center_freq_hz = 0.0) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  for (const auto& s : x.samples) {
    io::put(os, static_cast<float>(s.real()));
    io::put(os, static_cast<float>(s.imag()));
  }
  if (!os) throw Error(Errc::Io, "write failed for " + path.string());

  nlohmann::json meta = {
      {"sample_rate_hz", x.sample_rate_hz},
      {"center_freq_hz", center_freq_hz},
      {"class", class_name},
      {"sample_count", static_cast<std::uint64_t>(x.size())},
  };
  std::ofstream ms(sidecar_path(path));
  if (!ms) throw Error(Errc::Io, "cannot open sidecar for " + path.string());
  ms << meta.dump(2) << '\n';
}

inline IqMetadata read_iqf32_metadata(const std::filesystem::path& path) {
  std::ifstream ms(sidecar_path(path));
  if (!ms) throw Error(Errc::NotFound, "missing sidecar " + sidecar_path(path).string());
  try {
    const auto meta = nlohmann::json::parse(ms);
    IqMetadata out;
    out.sample_rate_hz = meta.at("sample_rate_hz").get<double>();
    out.center_freq_hz = meta.at("center_freq_hz").get<double>();
    out.class_name = meta.at("class").get<std::string>();
    out.sample_count = meta.at("sample_count").get<std::uint64_t>();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Io, "bad sidecar " + sidecar_path(path).string() + ": " + e.what());
  }
}

/// Reads samples and sidecar; the sample count must match the metadata.
inline IqBuffer read_iqf32(const std::filesystem::path& path, IqMetadata* meta_out = nullptr) {
  const IqMetadata meta = read_iqf32_metadata(path);
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::NotFound, "cannot open " + path.string());
  IqBuffer x;
  x.sample_rate_hz = meta.sample_rate_hz;
  x.samples.resize(meta.sample_count);
  for (auto& s : x.samples) {
    const float re = io::get<float>(is, Errc::Io);
    const float im = io::get<float>(is, Errc::Io);
    s = {re, im};
  }
  io::expect_eof(is, Errc::Io);
  if (meta_out) *meta_out = meta;
  return x;
}

}  // namespace stitch
