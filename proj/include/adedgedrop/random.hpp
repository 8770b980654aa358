#ifndef ADEDGEDROP_RANDOM_HPP
#define ADEDGEDROP_RANDOM_HPP

#include <cstdint>
#include <random>

namespace adedgedrop {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream). Streams name the consumer
/// (weight init, perturbation of epoch k, ...) so draws never interleave.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

namespace streams {
inline constexpr std::uint64_t kThetaInit = 1;
inline constexpr std::uint64_t kOmegaInit = 2;
inline constexpr std::uint64_t kLineFeatures = 3;
inline constexpr std::uint64_t kAttack = 4;
inline constexpr std::uint64_t kMatchedDrop = 5;
inline constexpr std::uint64_t kSbm = 6;
inline constexpr std::uint64_t kSplit = 7;
/// Per-epoch streams are kPerEpochBase * (epoch + 1) + offset.
inline constexpr std::uint64_t kPerEpochBase = 1000;
inline constexpr std::uint64_t kPerturbation = 1;
inline constexpr std::uint64_t kRandomDrop = 2;
}  // namespace streams

}  // namespace adedgedrop

#endif  // ADEDGEDROP_RANDOM_HPP
