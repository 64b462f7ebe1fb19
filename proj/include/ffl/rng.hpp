#pragma once

#include <cstdint>
#include <string_view>

namespace ffl {

/// splitmix64 finalizer; used to derive independent rng substreams.
inline std::uint64_t mixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t stream) {
  return mixSeed(mixSeed(seed) ^ mixSeed(stream + 0x51'7c'c1'b7'27'22'0a'95ULL));
}

inline std::uint64_t deriveSeed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (char c : tag) {
    h ^= std::uint8_t(c);
    h *= 1099511628211ULL;
  }
  return deriveSeed(seed, h);
}

}  // namespace ffl
