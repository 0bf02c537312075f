#pragma once
// Random number generation.
//
// All randomness flows from boost::random::mt19937_64. Its output sequence is
// fixed by the standard definition of MT19937-64 and boost's distribution
// implementations are portable, so a seed replays identically on every
// platform (std:: distributions do not give that guarantee).

#include <boost/random/mersenne_twister.hpp>
#include <cstdint>

namespace desate {

using Rng = boost::random::mt19937_64;

// Deterministic child seed for stream `stream` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

// Uniform double in [0, 1) built from the top 53 bits of one draw.
double uniform01(Rng& rng);

}  // namespace desate
