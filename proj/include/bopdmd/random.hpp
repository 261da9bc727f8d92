#pragma once

#include <cstdint>
#include <random>

namespace bopdmd {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; decorrelates nearby integer seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream for sub-task `index` of a run seeded with `base_seed`.
/// The base is mixed first so that runs with nearby seeds share no streams.
inline Rng derived_rng(std::uint64_t base_seed, std::uint64_t index) {
  return Rng(mix_seed(mix_seed(base_seed) ^ index));
}

}  // namespace bopdmd
