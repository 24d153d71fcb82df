#pragma once

#include <cstdint>
#include <string_view>

namespace tiepref {

// All randomness in the library flows through this generator. It is a
// SplitMix64 stream: one 64-bit word of state, fixed output sequence for a
// given seed on every platform. The standard <random> engines would also be
// reproducible, but their distributions are not pinned by the standard, and
// byte-identical artifacts across runs are part of the CLI contract.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased uniform integer in [0, n); n must be nonzero.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = n * (~0ull / n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::uint64_t state_;
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace detail

// Derives the seed of a named substream. Streams with different names or
// indices are independent, so records/prompts can be generated in any order
// (or in parallel) without perturbing each other's draws.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t x = detail::mix64(seed ^ 0xA3C59AC2F0FE42C1ull);
  x = detail::mix64(x ^ detail::fnv1a64(stream));
  x = detail::mix64(x ^ (a + 0x9E3779B97F4A7C15ull));
  x = detail::mix64(x ^ (b + 0xD1B54A32D192ED03ull));
  return x;
}

inline Rng substream(std::uint64_t seed, std::string_view stream,
                     std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(derive_seed(seed, stream, a, b));
}

}  // namespace tiepref
