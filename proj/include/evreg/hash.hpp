#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace evreg {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

// FNV-1a over a byte range, chainable through the h argument.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = kFnvOffset) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t h = kFnvOffset) {
  return fnv1a64(s.data(), s.size(), h);
}

// Mixes a 64-bit integer in little-endian byte order.
inline std::uint64_t fnv1a64_u64(std::uint64_t x, std::uint64_t h) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
  return fnv1a64(b, 8, h);
}

inline std::string hex64(std::uint64_t x) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[x & 0xf];
    x >>= 4;
  }
  return out;
}

}  // namespace evreg
