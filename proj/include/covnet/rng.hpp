#pragma once

#include <cstdint>
#include <random>

namespace covnet {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent stream for (seed, key).
inline Rng derive_rng(std::uint64_t seed, std::uint64_t key) {
  return Rng(splitmix64(seed ^ splitmix64(key + 0x632BE59BD9B4E019ull)));
}

}  // namespace covnet
