#pragma once

// Minimal RGB raster with binary PPM output, plus the renderers used by the
// command line tool.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "stitch/error.hpp"
#include "stitch/wideband.hpp"

namespace stitch {

using Rgb = std::array<std::uint8_t, 3>;

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(std::size_t w, std::size_t h, Rgb fill = {0, 0, 0}) : width(w), height(h), rgb(w * h * 3) {
    for (std::size_t i = 0; i < w * h; ++i) std::copy(fill.begin(), fill.end(), rgb.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }

  void set(std::size_t x, std::size_t y, Rgb c) {
    if (x >= width || y >= height) return;
    std::copy(c.begin(), c.end(), rgb.begin() + static_cast<std::ptrdiff_t>(3 * (y * width + x)));
  }
  Rgb get(std::size_t x, std::size_t y) const {
    const std::size_t i = 3 * (y * width + x);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  void fill_rect(std::size_t x0, std::size_t y0, std::size_t x1, std::size_t y1, Rgb c) {
    for (std::size_t y = y0; y < std::min(y1, height); ++y) {
      for (std::size_t x = x0; x < std::min(x1, width); ++x) set(x, y, c);
    }
  }
};

inline void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!os) throw Error(Errc::Io, "write failed for " + path.string());
}

inline const std::vector<Rgb>& class_palette() {
  static const std::vector<Rgb> p{
      {230, 60, 50}, {60, 120, 230}, {70, 190, 80}, {240, 180, 40}, {170, 80, 200}, {40, 200, 200}, {240, 120, 180}};
  return p;
}

/// Spectrum map: one row per frame, one column per bin. Background is the
/// power in dB on a gray ramp; occupied bins are tinted by class (mixed when
/// several classes share a bin).
inline Image spectrum_map(const std::vector<std::vector<float>>& inputs, const std::vector<OccupancyMap>& maps,
                          std::size_t row_height = 2) {
  if (inputs.size() != maps.size()) throw Error(Errc::ShapeMismatch, "one occupancy map per frame expected");
  if (inputs.empty()) return {};
  const std::size_t n = maps.front().bins;
  Image img(n, inputs.size() * row_height);
  std::vector<double> db;
  for (const auto& in : inputs) {
    for (std::size_t k = 0; k < n; ++k) {
      db.push_back(10.0 * std::log10(std::max(1e-30, double(in[k]) * in[k] + double(in[n + k]) * in[n + k])));
    }
  }
  const double hi = *std::max_element(db.begin(), db.end());
  const double lo = hi - 50.0;
  const auto& pal = class_palette();
  for (std::size_t f = 0; f < inputs.size(); ++f) {
    for (std::size_t k = 0; k < n; ++k) {
      const double g = std::clamp((db[f * n + k] - lo) / (hi - lo), 0.0, 1.0);
      std::array<double, 3> c{g * 255, g * 255, g * 255};
      std::size_t hits = 0;
      std::array<double, 3> tint{0, 0, 0};
      for (std::size_t cl = 0; cl < maps[f].classes; ++cl) {
        if (!maps[f].occupied(cl, k)) continue;
        const Rgb& p = pal[cl % pal.size()];
        for (int i = 0; i < 3; ++i) tint[i] += p[i];
        ++hits;
      }
      if (hits) {
        for (int i = 0; i < 3; ++i) c[i] = 0.35 * c[i] + 0.65 * tint[i] / static_cast<double>(hits);
      }
      const Rgb px{static_cast<std::uint8_t>(c[0]), static_cast<std::uint8_t>(c[1]), static_cast<std::uint8_t>(c[2])};
      for (std::size_t r = 0; r < row_height; ++r) img.set(k, f * row_height + r, px);
    }
  }
  return img;
}

/// Vertical bars scaled to `max_value`.
inline Image bar_chart(std::span<const double> values, double max_value, std::size_t bar_width = 40,
                       std::size_t height = 200) {
  const std::size_t gap = bar_width / 4 + 1;
  Image img(values.size() * (bar_width + gap) + gap, height, {255, 255, 255});
  const auto& pal = class_palette();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double frac = max_value > 0 ? std::clamp(values[i] / max_value, 0.0, 1.0) : 0.0;
    const auto h = static_cast<std::size_t>(std::lround(frac * static_cast<double>(height - 1)));
    const std::size_t x0 = gap + i * (bar_width + gap);
    img.fill_rect(x0, height - h, x0 + bar_width, height, pal[i % pal.size()]);
  }
  return img;
}

}  // namespace stitch
