// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RELIEF_RANDOM_HPP_
#define RELIEF_RANDOM_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace relief {

using Rng = std::mt19937_64;

inline uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t HashTag(std::string_view tag) {
  uint64_t h = 1469598103934665603ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

// Independent stream keyed by (seed, tag, index). Results never depend on
// how work is split across threads because every unit of work derives its
// own stream from its index.
inline Rng SubStream(uint64_t seed, std::string_view tag, uint64_t index = 0) {
  uint64_t s = SplitMix64(seed ^ SplitMix64(HashTag(tag)));
  s = SplitMix64(s ^ SplitMix64(index + 0x51ed27ULL));
  return Rng(s);
}

// Uniform on the open interval (0, 1).
inline double OpenUniform(Rng& rng) {
  // 53 random bits, shifted by half an ulp so 0 is never produced.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double Gumbel(Rng& rng) { return -std::log(-std::log(OpenUniform(rng))); }

inline double StdNormal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

}  // namespace relief

#endif  // RELIEF_RANDOM_HPP_
