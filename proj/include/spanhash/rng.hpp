#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace spanhash {

// Deterministic named sub-streams derived from one master seed.
// All draws go through raw 64-bit outputs of std::mt19937_64 (whose sequence
// is fixed by the standard), never through std::*_distribution, so the same
// seed gives the same stream on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  // Sub-stream keyed by (seed, name, a, b), e.g. ("mask", step, view).
  static RngStream derive(std::uint64_t seed, std::string_view name,
                          std::uint64_t a = 0, std::uint64_t b = 0);

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Unbiased integer in [0, n), n >= 1.
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// FNV-1a, also used for config hashing.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull);

}  // namespace spanhash
