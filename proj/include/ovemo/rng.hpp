#pragma once

// Platform-stable pseudo-random streams.
//
// Algorithm "splitmix64-v1": every draw is a pure function of a 64-bit key,
// so results never depend on the standard library's distribution code.
//   stream key   = splitmix64(seed ^ splitmix64(position + 0x9E3779B97F4A7C15))
//   draw j       = splitmix64(key + j * 0x9E3779B97F4A7C15)
//   uniform [0,b) = first draw d with d >= (2^64 mod b), reduced mod b
// Changing any constant here invalidates golden tests.

#include <cstdint>
#include <string_view>

namespace ovemo::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a, 64-bit.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t hash = 0xCBF29CE484222325ULL) noexcept {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t position) noexcept {
  return splitmix64(seed ^ splitmix64(position + kGolden));
}

class Stream {
 public:
  constexpr explicit Stream(std::uint64_t key) noexcept : key_(key) {}
  constexpr Stream(std::uint64_t seed, std::uint64_t position) noexcept
      : key_(derive_key(seed, position)) {}

  constexpr std::uint64_t next() noexcept {
    return splitmix64(key_ + (counter_++) * kGolden);
  }

  // Unbiased integer in [0, bound). bound must be >= 1.
  constexpr std::uint64_t uniform_below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t d = next();
      if (d >= threshold) return d % bound;
    }
  }

  constexpr bool coin() noexcept { return (next() >> 63) != 0; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace ovemo::rng
