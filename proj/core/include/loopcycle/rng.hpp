#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace loopcycle {

using Rng = std::mt19937_64;

// Independent named streams derived from one seed.
enum class Stream : std::uint64_t {
  kLoops = 1,
  kHolding = 2,
  kStationary = 3,
  kBridges = 4,
  kGffField = 5,
  kGffEdges = 6,
  kReplica = 7,
  kResample = 8,
  kEstimator = 9,
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);
inline std::uint64_t derive_seed(std::uint64_t seed, Stream s, std::uint64_t index = 0) {
  return derive_seed(seed, static_cast<std::uint64_t>(s), index);
}
Rng make_rng(std::uint64_t seed, Stream s, std::uint64_t index = 0);
// Seed of replica r of an experiment with base seed `seed`.
inline std::uint64_t replica_seed(std::uint64_t seed, std::uint64_t r) {
  return derive_seed(seed, Stream::kReplica, r);
}

// Uniform double in [0,1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
// Unit-mean exponential.
inline double exponential1(Rng& rng) { return -std::log1p(-uniform01(rng)); }

}  // namespace loopcycle
