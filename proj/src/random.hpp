#pragma once

#include <cstdint>

namespace rlcov::detail {

// SplitMix64 finalizer. Used as a counter-based generator: the value for
// counter c under key k is mix(k ^ mix(c)), so draws are independent of
// evaluation order.
inline std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t counter_bits(std::uint64_t key, std::uint64_t counter) { return mix(key ^ mix(counter)); }

// Uniform in the open interval (0, 1).
inline double counter_uniform(std::uint64_t key, std::uint64_t counter) {
  return (static_cast<double>(counter_bits(key, counter) >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace rlcov::detail
