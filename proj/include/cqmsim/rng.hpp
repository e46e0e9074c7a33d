#pragma once

#include <cstdint>
#include <random>

namespace cqmsim {

// SplitMix64 finalizer, used as a stateless mixing function for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed for the RNG stream of one (sweep point, pulse block) pair.  The derivation
// is part of the reproducibility contract: results must not depend on thread
// count, so every block owns a stream determined only by these three integers.
inline std::uint64_t derive_stream_seed(std::uint64_t master_seed,
                                        std::uint64_t point_index,
                                        std::uint64_t block_index) {
    return splitmix64(splitmix64(splitmix64(master_seed) ^ point_index) ^ block_index);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

// Uniform in [0,1), one generator call per draw.  Built from the raw 64-bit
// output instead of std::generate_canonical so the draw sequence is identical
// across standard library implementations.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// p <= 0 and p >= 1 short-circuit without consuming a draw.
inline bool bernoulli(Rng& rng, double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform01(rng) < p;
}

}  // namespace cqmsim
