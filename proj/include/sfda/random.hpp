#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

// Deterministic draw helpers. The standard distribution objects are not pinned
// across library implementations, so anything that feeds recorded output goes
// through these instead.

namespace sfda {

using Rng = std::mt19937_64;

// Derives an independent stream from a base seed and a stream index.
// SplitMix64 finalizer over the combined words.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform double in [0, 1).
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

// Standard normal via Box-Muller (one value per call; pair partner discarded
// to keep the stream position independent of call parity).
inline double normal01(Rng& rng) {
  double u1 = uniform01(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// Distinct indices from [0, population), partial Fisher-Yates.
inline std::vector<int> sample_without_replacement(Rng& rng, int population, int count) {
  std::vector<int> idx(population);
  std::iota(idx.begin(), idx.end(), 0);
  for (int j = 0; j < count; ++j) {
    const int swap_at = j + static_cast<int>(uniform_index(rng, population - j));
    std::swap(idx[j], idx[swap_at]);
  }
  idx.resize(count);
  return idx;
}

}
