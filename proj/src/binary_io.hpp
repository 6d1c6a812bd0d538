#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "refinegan/error.hpp"

namespace refinegan::detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
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

inline void put_f32(std::ostream& os, float v) {
  std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(v));
  os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

inline void read_exact(std::istream& is, void* dst, std::size_t n, const std::string& what) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw MalformedFile(what + ": truncated file");
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
  std::uint32_t v;
  read_exact(is, &v, sizeof v, what);
  return to_little(v);
}

inline std::uint64_t get_u64(std::istream& is, const std::string& what) {
  std::uint64_t v;
  read_exact(is, &v, sizeof v, what);
  return to_little(v);
}

inline float get_f32(std::istream& is, const std::string& what) {
  std::uint32_t bits;
  read_exact(is, &bits, sizeof bits, what);
  return std::bit_cast<float>(to_little(bits));
}

}  // namespace refinegan::detail
