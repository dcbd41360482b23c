#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "bpe/error.hpp"

// Little-endian primitives shared by every checkpoint section.
namespace bpe::binio {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
  }
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void put_f64(std::ostream& os, double d) {
  put_u64(os, std::bit_cast<std::uint64_t>(d));
}

inline void put_magic(std::ostream& os, const char (&tag)[5]) { os.write(tag, 4); }

inline void expect(std::istream& is, const char* what) {
  if (!is) throw FormatError(std::string("truncated input while reading ") + what);
}

inline std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  expect(is, "u32");
  return to_little(v);
}

inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  expect(is, "u64");
  return to_little(v);
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline void get_magic(std::istream& is, const char (&tag)[5]) {
  char buf[4] = {};
  is.read(buf, 4);
  expect(is, "magic");
  if (std::memcmp(buf, tag, 4) != 0)
    throw FormatError(std::string("bad magic: expected ") + tag);
}

/// Row-major f64 dump of any dense matrix or vector.
template <typename Derived>
void put_array(std::ostream& os, const Eigen::DenseBase<Derived>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(os, m(r, c));
}

/// Fills an already-sized matrix or vector in row-major order.
template <typename Derived>
void get_array(std::istream& is, Eigen::DenseBase<Derived>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get_f64(is);
}

inline void put_string(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is) {
  const auto n = get_u64(is);
  if (n > (1ull << 32)) throw FormatError("string length out of range");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  expect(is, "string");
  return s;
}

}  // namespace bpe::binio
