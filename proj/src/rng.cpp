#include "desate/rng.hpp"

namespace desate {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    // splitmix64 finalizer over the combined words.
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace desate
