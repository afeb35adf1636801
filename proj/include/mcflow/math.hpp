// Numerically stable logistic primitives.
//
// The loss sweeps evaluate logits whose magnitude routinely exceeds 700,
// so every sigmoid / logistic-loss evaluation below is branch-stabilized:
// exp() is only ever called on non-positive arguments.
#pragma once

#include <cmath>
#include <numbers>

namespace mcflow {

/// Stable 1 / (1 + exp(-z)).
inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double ez = std::exp(z);
    return ez / (1.0 + ez);
}

/// Stable logistic loss log(1 + exp(-z)).
///
/// Computed as log1p(exp(-z)) for z >= 0 and -z + log1p(exp(z)) for z < 0.
inline double logistic_loss(double z) {
    if (z >= 0.0) {
        return std::log1p(std::exp(-z));
    }
    return -z + std::log1p(std::exp(z));
}

/// sign(x) with sign(0) := 0.
inline double sign(double x) {
    if (x > 0.0) return 1.0;
    if (x < 0.0) return -1.0;
    return 0.0;
}

/// asinh(c * exp(t)) without forming exp(t); switches to the exact
/// logarithmic asymptote once the argument dwarfs 1.
inline double asinh_scaled(double c, double t) {
    if (c == 0.0) return 0.0;
    if (t > 300.0) {
        const double mag = std::log(2.0 * std::abs(c)) + t;
        return c > 0.0 ? mag : -mag;
    }
    return std::asinh(c * std::exp(t));
}

inline constexpr double kInvSqrt2 = std::numbers::sqrt2 / 2.0;

} // namespace mcflow
