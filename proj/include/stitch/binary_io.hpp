#pragma once

// Little-endian scalar encoding shared by the BANK, STCH and SGNT formats.
// Values are written byte by byte, so the layout does not depend on host
// endianness.

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>

#include "stitch/error.hpp"

namespace stitch::io {

template <class T>
concept LeScalar = std::is_integral_v<T> || std::is_same_v<T, float> || std::is_same_v<T, double>;

template <LeScalar T>
void put(std::ostream& os, T value) {
  using U = std::make_unsigned_t<
      std::conditional_t<std::is_floating_point_v<T>,
                         std::conditional_t<sizeof(T) == 4, std::int32_t, std::int64_t>, T>>;
  U bits;
  if constexpr (std::is_floating_point_v<T>) {
    bits = std::bit_cast<U>(value);
  } else {
    bits = static_cast<U>(value);
  }
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
  }
  os.write(buf.data(), sizeof(T));
}

/// Reads one scalar; throws `Error(on_fail, ...)` on a short read.
template <LeScalar T>
T get(std::istream& is, Errc on_fail) {
  std::array<unsigned char, sizeof(T)> buf{};
  is.read(reinterpret_cast<char*>(buf.data()), sizeof(T));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw Error(on_fail, "unexpected end of file");
  }
  using U = std::make_unsigned_t<
      std::conditional_t<std::is_floating_point_v<T>,
                         std::conditional_t<sizeof(T) == 4, std::int32_t, std::int64_t>, T>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
  }
  if constexpr (std::is_floating_point_v<T>) {
    return std::bit_cast<T>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

inline void put_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& is, std::string_view magic, Errc on_fail) {
  std::string got(magic.size(), '\0');
  is.read(got.data(), static_cast<std::streamsize>(magic.size()));
  if (is.gcount() != static_cast<std::streamsize>(magic.size()) || got != magic) {
    throw Error(on_fail, "bad magic, expected \"" + std::string(magic) + "\"");
  }
}

/// Throws if any bytes remain after a record that should end the file.
inline void expect_eof(std::istream& is, Errc on_fail) {
  if (is.peek() != std::char_traits<char>::eof()) {
    throw Error(on_fail, "trailing bytes after last record");
  }
}

}  // namespace stitch::io
