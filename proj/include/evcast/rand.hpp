#pragma once

#include <cstdint>
#include <random>

namespace evcast {

/// splitmix64 mix step; used to derive independent per-stream seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return std::mt19937_64(mix_seed(seed + mix_seed(stream)));
}

/// Uniform double in [0, 1). Bit-reproducible, unlike the std distributions
/// whose algorithms are implementation-defined.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

} // namespace evcast
