// Three-parameter extension with the attention scalar a.
//
// theta = (e, w, a); the per-symbol logit becomes
//
//   logit(x) = e^2 [ (x - 1/2)(1 + a e^2)(1 + 2w|w|) + w|w (1 + a e^2)| ] + b,
//
// which reduces to the canonical model at a = 0.  The optimal bias again has
// a closed form (positive root of a quadratic in exp(z1)) and the
// optimal-bias gradients are sign-free: the non-smooth |1 + a e^2| term is
// input-independent and drops out once the bias gradient vanishes.
#pragma once

#include <array>

#include "mcflow/canonical.hpp"
#include "mcflow/markov.hpp"

namespace mcflow::attention {

using canonical::CriticalClass;
using markov::SwitchKernel;

struct Params3 {
    double e;
    double w;
    double a;
};

/// Intermediate quantities at (e, w, a, b): z1/z2 are the logits at
/// x = 1 / x = 0, phi1/phi0 their sigmoids, and
///   f1 = 1 - p - q - phi1 + phi0,   f2 = p - phi0.
/// z1 - z2 = e^2 (1 + a e^2)(1 + 2w|w|) exactly, and at the optimal bias
/// pi1 f1 + f2 = 0.
struct AttnTerms {
    double z1;
    double z2;
    double phi0;
    double phi1;
    double f1;
    double f2;
};

struct Grad3 {
    double de;
    double dw;
    double da;
};

double attn_logit(int x, double e, double w, double a, double b);

/// Exact loss at (e, w, a) with an explicit bias.
double attn_loss_with_bias(const SwitchKernel& k, double e, double w, double a,
                           double b);

/// Closed-form bias minimizing attn_loss_with_bias over b.
double attn_optimal_bias(const SwitchKernel& k, double e, double w, double a);

/// Bias-optimized loss; equals the canonical loss at a = 0.
double attn_loss(const SwitchKernel& k, double e, double w, double a);

AttnTerms attn_terms(const SwitchKernel& k, double e, double w, double a, double b);

/// Analytic gradient of the bias-optimized loss (d/de, d/dw, d/da).
Grad3 attn_grad(const SwitchKernel& k, double e, double w, double a);

/// Hessian of the loss with explicit bias at the axis point
/// (b, e, w, a) = (log(p/q), 0, w, a), ordering (b, e, w, a):
/// pi0 pi1 diag(1, 2(p+q-1)(1+2w|w|), 0, 0).
std::array<std::array<double, 4>, 4>
attn_hessian_on_axis(const SwitchKernel& k, double w, double a);

/// Hessian at a general critical point (e, w, a) of the bias-optimized
/// loss.  Returns the axis form when |e| < tol; throws HessianUndefined on
/// the stationary manifold {e != 0, 1 + a e^2 = 0, 1 + 2w|w| = 0} where
/// the f1/f2 partials do not exist, and std::invalid_argument elsewhere
/// (no closed form off the critical sets).
std::array<std::array<double, 4>, 4>
attn_hessian_at(const SwitchKernel& k, const Params3& theta, double tol = 1e-9);

/// Classification against the R^3 critical sets; Station is the manifold
/// {e != 0, 1 + a e^2 = 0, 1 + 2w|w| = 0} whose character the theory
/// leaves open.
CriticalClass attn_classify(const SwitchKernel& k, double e, double w, double a,
                            double tol = 1e-7);

/// Classification in R^4 with explicit bias; additionally checks the two
/// global-locus equalities, and b = log(p/q) on the e = 0 and Station
/// branches.  Never returns LocalMax (the theory defines none with bias).
CriticalClass attn_classify_r4(const SwitchKernel& k, double e, double w, double b,
                               double a, double tol = 1e-7);

/// Conserved energy E(e, w, a) = e^2 - (w^2 + sign(w) log|w|) - 2 a^2.
/// Throws std::domain_error at w = 0.
double attn_energy(double e, double w, double a);

} // namespace mcflow::attention
