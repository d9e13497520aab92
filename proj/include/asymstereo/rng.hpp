#pragma once

#include <cstdint>
#include <random>

namespace asymstereo {

/// Seeded RNG used everywhere determinism matters. The uniform draws below
/// are hand-mapped from raw 64-bit output so results do not depend on the
/// standard library's distribution implementations.
using Rng = std::mt19937_64;

/// Uniform double in [0,1), 53-bit resolution.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [lo, hi] inclusive.
inline int uniform_int(Rng& rng, int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(rng() % span);
}

}  // namespace asymstereo
