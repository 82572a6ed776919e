#pragma once

// Portable random helpers. std::mt19937_64 output is fixed by the standard;
// the distributions below are too, unlike the std:: ones.

#include <concepts>
#include <cstdint>
#include <limits>
#include <random>

namespace coopmac {

/// splitmix64 finalizer; derives independent stream seeds from (seed, index).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <typename G>
concept Rng64 = std::uniform_random_bit_generator<G> && std::same_as<typename G::result_type, std::uint64_t> &&
                (G::min() == 0) && (G::max() == std::numeric_limits<std::uint64_t>::max());

/// Uniform integer in [0, bound), bit-exact across standard libraries.
template <Rng64 G>
std::uint64_t uniform_below(G& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  for (;;) {
    const std::uint64_t x = rng();
    if (x < limit) return x % bound;
  }
}

/// Uniform double in [0, 1) from the top 53 bits.
template <Rng64 G>
double uniform_unit(G& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <Rng64 G>
bool bernoulli(G& rng, double p) {
  return uniform_unit(rng) < p;
}

}  // namespace coopmac
