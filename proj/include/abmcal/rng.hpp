#pragma once

#include <cstdint>

#include <boost/random/mersenne_twister.hpp>

namespace abmcal {

/// Pseudo-random engine used everywhere in the toolkit.
///
/// Boost's mt19937_64 and its distributions are implemented in headers with
/// fixed algorithms, so a given seed yields the same stream on every
/// platform (std:: distributions are implementation-defined).
using Engine = boost::random::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed of the `index`-th child stream of `seed`.
///
/// child_seed(s, i) = mix64(mix64(s) ^ mix64(i + 0x9E3779B97F4A7C15)).
/// Children of distinct indices are decorrelated and the derivation can be
/// nested (child of a child) to address hierarchical work items.
std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) noexcept;

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

}  // namespace abmcal
