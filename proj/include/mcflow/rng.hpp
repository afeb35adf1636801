// Seeded random draws used by sampling, Monte-Carlo and sweep code.
//
// std::mt19937_64's raw output is fully specified by the standard; the
// distributions are not.  All continuous draws are therefore built by hand
// from the raw 64-bit stream so results are reproducible across platforms.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mcflow {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits of one raw draw.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// One standard normal draw via Box-Muller (uses two uniforms).
inline double normal01(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
}

} // namespace mcflow
