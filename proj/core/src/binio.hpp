#pragma once

// Little-endian binary helpers shared by the file formats.

#include <bit>
#include <complex>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "seabed/error.hpp"

namespace seabed::binio {

inline std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  v = to_le(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }

inline void put_u8(std::ostream& os, std::uint8_t b) { os.put(static_cast<char>(b)); }

inline void put_bytes(std::ostream& os, std::string_view s) { os.write(s.data(), static_cast<std::streamsize>(s.size())); }

inline void put_string(std::ostream& os, std::string_view s) {
  put_u64(os, s.size());
  put_bytes(os, s);
}

inline void put_f64s(std::ostream& os, const std::vector<double>& v) {
  for (double d : v) put_f64(os, d);
}

inline void require(std::istream& is, const char* what) {
  if (!is) throw FormatError(std::string("truncated input while reading ") + what);
}

inline std::uint64_t get_u64(std::istream& is, const char* what = "integer") {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  require(is, what);
  return to_le(v);
}

inline double get_f64(std::istream& is, const char* what = "float") {
  return std::bit_cast<double>(get_u64(is, what));
}

inline std::uint8_t get_u8(std::istream& is, const char* what = "byte") {
  char c = 0;
  is.get(c);
  require(is, what);
  return static_cast<std::uint8_t>(c);
}

inline std::string get_bytes(std::istream& is, std::size_t n, const char* what = "bytes") {
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  require(is, what);
  return s;
}

// Bounded so that a corrupted length cannot trigger a huge allocation.
inline std::string get_string(std::istream& is, const char* what = "string") {
  const std::uint64_t n = get_u64(is, what);
  if (n > (1u << 20)) throw FormatError(std::string("implausible length for ") + what);
  return get_bytes(is, n, what);
}

inline std::vector<double> get_f64s(std::istream& is, std::size_t n, const char* what = "array") {
  std::vector<double> v(n);
  for (auto& d : v) d = get_f64(is, what);
  return v;
}

inline void expect_magic(std::istream& is, std::string_view magic) {
  const std::string got = get_bytes(is, magic.size(), "magic");
  if (got != magic) {
    throw FormatError("bad magic: expected '" + std::string(magic) + "'");
  }
}

}  // namespace seabed::binio
