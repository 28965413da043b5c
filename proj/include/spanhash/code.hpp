#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace spanhash {

// Fixed-width binary label in {-1,+1}^K, K <= 24.
// Bit k (1-based) lives at position (width - k), so bit 1 is the most
// significant; the bitstring and hex renderings read bit 1 first.
struct Code {
  std::uint32_t bits = 0;
  int width = 0;

  Code() = default;
  Code(std::uint32_t b, int w) : bits(b), width(w) {}

  int bit(int k) const { return ((bits >> (width - k)) & 1u) ? +1 : -1; }

  void set_bit(int k, int value) {
    std::uint32_t m = 1u << (width - k);
    if (value > 0)
      bits |= m;
    else
      bits &= ~m;
  }

  // '1' = +1, bit 1 first.
  std::string bitstring() const {
    std::string s(static_cast<std::size_t>(width), '0');
    for (int k = 1; k <= width; ++k)
      if (bit(k) > 0) s[static_cast<std::size_t>(k - 1)] = '1';
    return s;
  }

  // Uppercase hex, bit 1 as the most significant bit of the value,
  // zero-padded to ceil(width/4) digits.
  std::string hex() const {
    int digits = (width + 3) / 4;
    std::string s(static_cast<std::size_t>(digits), '0');
    std::uint32_t v = bits;
    for (int i = digits - 1; i >= 0; --i) {
      s[static_cast<std::size_t>(i)] = "0123456789ABCDEF"[v & 0xfu];
      v >>= 4;
    }
    return s;
  }

  static Code from_bitstring(const std::string& s) {
    Code c(0, static_cast<int>(s.size()));
    for (int k = 1; k <= c.width; ++k) {
      char ch = s[static_cast<std::size_t>(k - 1)];
      if (ch != '0' && ch != '1') throw std::invalid_argument("bad code bitstring: " + s);
      if (ch == '1') c.set_bit(k, +1);
    }
    return c;
  }

  int hamming(const Code& other) const {
    return std::popcount(bits ^ other.bits);
  }

  bool operator==(const Code& o) const { return bits == o.bits && width == o.width; }
  // Lexicographic bitstring order coincides with numeric order on bits.
  bool operator<(const Code& o) const { return bits < o.bits; }
};

}  // namespace spanhash
