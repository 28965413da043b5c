#include "spanhash/rng.hpp"

namespace spanhash {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

static std::uint64_t mix_u64(std::uint64_t h, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) {
    h ^= (x >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ull;
  }
  return h;
}

RngStream RngStream::derive(std::uint64_t seed, std::string_view name,
                            std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix_u64(0xcbf29ce484222325ull, seed);
  h = fnv1a(name, h);
  h = mix_u64(h, a);
  h = mix_u64(h, b);
  return RngStream(h);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  const std::uint64_t lim = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
  std::uint64_t x = next_u64();
  while (x >= lim) x = next_u64();
  return x % n;
}

}  // namespace spanhash
