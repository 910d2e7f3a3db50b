#pragma once

#include <cstdint>
#include <random>

namespace ataseg {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to derive independent sub-seeds so that no two
// consumers (scene generator, corruption, annotator, sweep cell) share a
// random stream.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Seed domains for mix_seed.
namespace seed_tag {
inline constexpr std::uint64_t kScene = 1;
inline constexpr std::uint64_t kCorruption = 2;
inline constexpr std::uint64_t kAnnotator = 3;
inline constexpr std::uint64_t kInit = 4;
inline constexpr std::uint64_t kShuffle = 5;
inline constexpr std::uint64_t kStream = 6;
inline constexpr std::uint64_t kDataset = 7;
}  // namespace seed_tag

}  // namespace ataseg
