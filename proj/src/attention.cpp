#include "mcflow/attention.hpp"

#include <cmath>
#include <stdexcept>

#include "mcflow/errors.hpp"
#include "mcflow/math.hpp"

namespace mcflow::attention {

namespace {

double slope(double w) { return 1.0 + 2.0 * w * std::abs(w); }

// x-independent part of the logit, e^2 w |w (1 + a e^2)|.
double offset_term(double e, double w, double a) {
    const double e2 = e * e;
    return e2 * w * std::abs(w * (1.0 + a * e2));
}

// x-coefficient half-width, e^2 (1 + a e^2)(1 + 2w|w|) / 2.
double half_gain(double e, double w, double a) {
    const double e2 = e * e;
    return 0.5 * e2 * (1.0 + a * e2) * slope(w);
}

} // namespace

double attn_logit(int x, double e, double w, double a, double b) {
    return (2.0 * x - 1.0) * half_gain(e, w, a) + offset_term(e, w, a) + b;
}

double attn_loss_with_bias(const SwitchKernel& k, double e, double w, double a,
                           double b) {
    const auto pi = markov::stationary(k);
    const double z0 = attn_logit(0, e, w, a, b);
    const double z1 = attn_logit(1, e, w, a, b);
    const double l0 = (1.0 - k.p) * logistic_loss(-z0) + k.p * logistic_loss(z0);
    const double l1 = k.q * logistic_loss(-z1) + (1.0 - k.q) * logistic_loss(z1);
    return pi.pi0 * l0 + pi.pi1 * l1;
}

double attn_optimal_bias(const SwitchKernel& k, double e, double w, double a) {
    // The a = 0 slice reduces to the canonical model exactly, down to the
    // arithmetic, so files produced from either path agree byte-for-byte.
    if (a == 0.0) return canonical::optimal_bias(k, {e, w});
    // z1 at the optimum solves exp(z1)^2 + (1 - p/q) exp(z1) - (p/q) A = 0
    // with A = exp(z1 - z2) = exp(2 * half_gain); the stable form mirrors
    // canonical::optimal_bias.
    const double s = 2.0 * half_gain(e, w, a);
    const double log_r = std::log(k.p / k.q);
    const double correction =
        asinh_scaled(0.5 * (k.p / k.q - 1.0), -0.5 * (s + log_r));
    const double z1 = 0.5 * (log_r + s) + correction;
    return z1 - half_gain(e, w, a) - offset_term(e, w, a);
}

double attn_loss(const SwitchKernel& k, double e, double w, double a) {
    if (a == 0.0) return canonical::loss(k, {e, w});
    return attn_loss_with_bias(k, e, w, a, attn_optimal_bias(k, e, w, a));
}

AttnTerms attn_terms(const SwitchKernel& k, double e, double w, double a, double b) {
    AttnTerms t;
    t.z1 = attn_logit(1, e, w, a, b);
    t.z2 = attn_logit(0, e, w, a, b);
    t.phi1 = sigmoid(t.z1);
    t.phi0 = sigmoid(t.z2);
    t.f1 = 1.0 - k.p - k.q - t.phi1 + t.phi0;
    t.f2 = k.p - t.phi0;
    return t;
}

Grad3 attn_grad(const SwitchKernel& k, double e, double w, double a) {
    if (a == 0.0) {
        const auto g2 = canonical::grad(k, {e, w});
        // dL/da = E[r_X (X - 1/2)] e^4 (1 + 2w|w|) = (dL/de) e^3 / 2 at a = 0.
        return Grad3{g2.de, g2.dw, 0.5 * g2.de * e * e * e};
    }
    const auto pi = markov::stationary(k);
    const double b = attn_optimal_bias(k, e, w, a);
    const AttnTerms t = attn_terms(k, e, w, a, b);
    // Common scalar -E[(f1 X + f2)(X - 1/2)]; at the optimal bias
    // E[f1 X + f2] = 0, so it equals -pi1 (f1 + f2) ... + (1/2) * 0.
    const double s = -(pi.pi1 * (t.f1 + t.f2) - 0.5 * (pi.pi1 * t.f1 + t.f2));
    const double e2 = e * e;
    const double ae2 = 1.0 + a * e2;
    const double sl = slope(w);
    return Grad3{
        s * (2.0 * e * ae2 * sl + 2.0 * e2 * e * a * sl),
        s * 2.0 * e2 * ae2 * 2.0 * std::abs(w),
        s * e2 * e2 * sl,
    };
}

std::array<std::array<double, 4>, 4>
attn_hessian_on_axis(const SwitchKernel& k, double w, double /*a*/) {
    const auto pi = markov::stationary(k);
    const double c = pi.pi0 * pi.pi1;
    std::array<std::array<double, 4>, 4> h{};
    h[0][0] = c;
    h[1][1] = c * 2.0 * (k.p + k.q - 1.0) * slope(w);
    return h;
}

std::array<std::array<double, 4>, 4>
attn_hessian_at(const SwitchKernel& k, const Params3& theta, double tol) {
    if (std::abs(theta.e) < tol) {
        return attn_hessian_on_axis(k, theta.w, theta.a);
    }
    if (std::abs(1.0 + theta.a * theta.e * theta.e) < tol &&
        std::abs(slope(theta.w)) < tol) {
        throw HessianUndefined(
            "Hessian does not exist on the stationary manifold "
            "{e != 0, 1 + a e^2 = 0, 1 + 2w|w| = 0}");
    }
    throw std::invalid_argument(
        "attn_hessian_at: closed form available only at e = 0 axis points");
}

CriticalClass attn_classify(const SwitchKernel& k, double e, double w, double a,
                            double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("attn_classify: tol must be > 0");
    markov::require_nondegenerate(k);

    const double c = std::log((1.0 - k.p) * (1.0 - k.q) / (k.p * k.q));
    const bool is_global = std::abs(2.0 * half_gain(e, w, a) - c) < tol;

    CriticalClass rest = CriticalClass::NotCritical;
    if (std::abs(e) < tol) {
        const double s = (k.p + k.q - 1.0) * slope(w);
        if (std::abs(w + kInvSqrt2) < tol) {
            rest = CriticalClass::Saddle;
        } else if (s > 0.0) {
            rest = CriticalClass::LocalMin;
        } else if (s < 0.0) {
            rest = CriticalClass::LocalMax;
        }
    } else if (std::abs(1.0 + a * e * e) < tol && std::abs(slope(w)) < tol) {
        rest = CriticalClass::Station;
    }

    if (is_global && rest != CriticalClass::NotCritical) {
        throw AmbiguousClass("point matches the global-minimum locus and another "
                             "critical set; tolerance too loose for this kernel");
    }
    if (is_global) return CriticalClass::GlobalMin;
    return rest;
}

CriticalClass attn_classify_r4(const SwitchKernel& k, double e, double w, double b,
                               double a, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("attn_classify_r4: tol must be > 0");
    markov::require_nondegenerate(k);

    const double c = std::log((1.0 - k.p) * (1.0 - k.q) / (k.p * k.q));
    const double half_log_odds = 0.5 * std::log(k.p * (1.0 - k.q) / (k.q * (1.0 - k.p)));
    const bool is_global = std::abs(2.0 * half_gain(e, w, a) - c) < tol &&
                           std::abs(offset_term(e, w, a) + b - half_log_odds) < tol;

    const bool bias_on_axis = std::abs(b - std::log(k.p / k.q)) < tol;
    CriticalClass rest = CriticalClass::NotCritical;
    if (std::abs(e) < tol && bias_on_axis) {
        // With the bias explicit the whole segment (p+q-1)(1+2w|w|) <= 0 is
        // saddle; no local maxima exist in R^4.
        const double s = (k.p + k.q - 1.0) * slope(w);
        rest = s > 0.0 ? CriticalClass::LocalMin : CriticalClass::Saddle;
    } else if (std::abs(e) >= tol && bias_on_axis &&
               std::abs(1.0 + a * e * e) < tol && std::abs(slope(w)) < tol) {
        rest = CriticalClass::Station;
    }

    if (is_global && rest != CriticalClass::NotCritical) {
        throw AmbiguousClass("point matches the global-minimum locus and another "
                             "critical set; tolerance too loose for this kernel");
    }
    if (is_global) return CriticalClass::GlobalMin;
    return rest;
}

double attn_energy(double e, double w, double a) {
    if (w == 0.0) {
        throw std::domain_error("attn_energy: undefined at w = 0 (energy barrier)");
    }
    return e * e - (w * w + sign(w) * std::log(std::abs(w))) - 2.0 * a * a;
}

} // namespace mcflow::attention
