// Error types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace mcflow {

/// Two disjoint membership tests passed at once; the caller's tolerance is
/// too loose for the kernel at hand.
struct AmbiguousClass : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Kernel sits on (or too close to) the p+q = 1 line where the landscape
/// classification is ill-posed.
struct DegenerateKernel : std::domain_error {
    using std::domain_error::domain_error;
};

/// Radicand of the saddle contour went negative; valid inputs never produce
/// this, so it signals a caller bug.
struct NegativeRadicand : std::domain_error {
    using std::domain_error::domain_error;
};

/// Root bracketing failed; signals a basin/contour inconsistency.
struct NoBracket : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Hessian requested on the stationary manifold where it does not exist.
struct HessianUndefined : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A finite-difference probe returned a non-finite value.
struct NonFinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Energy drift along a trajectory exceeded the caller's threshold; the
/// integrator tolerance is too loose, not the theory.
struct EnergyViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace mcflow
