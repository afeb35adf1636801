// Two-parameter canonical model: exact loss with and without bias, optimal
// bias, analytic gradients, closed-form axis Hessians, critical-point
// classification, the conserved energy function, and basin prediction.
//
// A parameter point is theta = (e, w); with bias it is (e, w, b).  The
// per-symbol logit is affine in the input bit x:
//
//     logit(x) = e^2 (1 + 2 w|w|) x + b - e^2 / 2,
//
// and the loss is the exact four-term expectation of the logistic loss over
// (X, Y) ~ (pi, P).  All expectations are closed-form; nothing here samples.
#pragma once

#include <array>

#include "mcflow/markov.hpp"

namespace mcflow::canonical {

using markov::SwitchKernel;

struct Params2 {
    double e;
    double w;
};

struct BiasedParams {
    double e;
    double w;
    double b;
};

/// Residual terms driving every gradient: at parameters (e, w, b) the
/// per-input residuals are f1 X + f2 with
///   f1 = sigma(z1) + q - 1 - sigma(z0) + p,   f2 = sigma(z0) - p,
/// where z1, z0 are the logits at x = 1, 0.  At the optimal bias
/// pi1 f1 + f2 = 0.
struct F12Terms {
    double f1;
    double f2;
};

struct Grad2 {
    double de;
    double dw;
};

struct Grad3 {
    double de;
    double dw;
    double db;
};

enum class CriticalClass { GlobalMin, LocalMin, LocalMax, Saddle, Station, NotCritical };

enum class BasinClass { ToGlobal, ToLocalMin, ToSaddle, ToLocalMax };

const char* to_string(CriticalClass c);
const char* to_string(BasinClass b);

/// Logit of the canonical model at bit x in {0,1}.
double logit(int x, const BiasedParams& params);

/// Exact population cross-entropy loss at (e, w, b), in nats.
double loss_with_bias(const SwitchKernel& k, const BiasedParams& params);

/// The unique bias minimizing loss_with_bias over b at fixed (e, w).
/// Closed form via the positive root of a quadratic in exp(z1); evaluated
/// in a form that stays finite for |e^2 (1+2w|w|)| up to ~1400.
double optimal_bias(const SwitchKernel& k, const Params2& params);

/// Bias-optimized loss L(theta) = L(theta, b*).
double loss(const SwitchKernel& k, const Params2& params);

/// f1/f2 residual terms at an explicit bias.
F12Terms f12_terms(const SwitchKernel& k, const BiasedParams& params);

/// Analytic gradient of loss_with_bias (d/de, d/dw, d/db).
Grad3 grad_with_bias(const SwitchKernel& k, const BiasedParams& params);

/// Analytic gradient of the bias-optimized loss (d/de, d/dw).
Grad2 grad(const SwitchKernel& k, const Params2& params);

/// Hessian of loss_with_bias at the axis point (b, e, w) = (log(p/q), 0, w),
/// ordering (b, e, w):  pi0 pi1 diag(1, 2(p+q-1)(1+2w|w|), 0).
std::array<std::array<double, 3>, 3>
hessian_with_bias_on_axis(const SwitchKernel& k, double w);

/// Schur-reduced Hessian of the bias-optimized loss at the axis point
/// e = 0: pi0 pi1 diag(2(p+q-1)(1+2w|w|), 0), ordering (e, w).
std::array<std::array<double, 2>, 2>
reduced_hessian_on_axis(const SwitchKernel& k, double w);

/// Set-membership classification of a parameter point against the critical
/// sets.  Throws AmbiguousClass when two disjoint membership tests pass at
/// once, and DegenerateKernel when |p+q-1| is below the degeneracy
/// tolerance.  Station is never returned in 2-D.
CriticalClass classify_critical(const SwitchKernel& k, const Params2& params,
                                double tol = 1e-7);

/// Conserved energy E(e, w) = e^2 - (w^2 + sign(w) log|w|).
/// Throws std::domain_error at w = 0 (the energy barrier).
double energy(const Params2& params);

/// E at the saddle (0, -1/sqrt(2)) = -(1 + log 2)/2.
double saddle_energy();

/// Saddle contour g(w) = sqrt(w^2 - log(-w) + E_sad) for w < 0.
/// Throws std::domain_error for w >= 0 and NegativeRadicand if the radicand
/// is negative (not reachable for w < 0).
double saddle_contour(double w);

/// Predicted convergence destination of the gradient flow started at init.
/// Follows the p+q > 1 and p+q < 1 basin characterizations; membership in
/// the measure-zero saddle contour uses | |e| - g(w) | < boundary_tol.
BasinClass basin(const SwitchKernel& k, const Params2& init,
                 double boundary_tol = 1e-9);

/// Predicted limit point: the intersection of the energy contour through
/// init with the critical set of its basin, found by bracketed 1-D root
/// finding on w.  Both defining residuals of the returned point are below
/// 1e-10.  Requires basin(init) in {ToGlobal, ToLocalMin, ToSaddle}.
Params2 predicted_limit(const SwitchKernel& k, const Params2& init);

} // namespace mcflow::canonical
