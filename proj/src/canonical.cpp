#include "mcflow/canonical.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mcflow/errors.hpp"
#include "mcflow/math.hpp"

namespace mcflow::canonical {

namespace {

// Gain of the x-dependent logit term.
double slope(double w) { return 1.0 + 2.0 * w * std::abs(w); }

// Four-term expectation of the logistic loss given the two logits.
double expected_loss(const SwitchKernel& k, double logit0, double logit1) {
    const auto pi = markov::stationary(k);
    const double l0 = (1.0 - k.p) * logistic_loss(-logit0) + k.p * logistic_loss(logit0);
    const double l1 = k.q * logistic_loss(-logit1) + (1.0 - k.q) * logistic_loss(logit1);
    return pi.pi0 * l0 + pi.pi1 * l1;
}

// Energy restricted to the e = 0 axis: f(w) = -(w^2 + sign(w) log|w|).
double axis_energy(double w) {
    return -(w * w + sign(w) * std::log(std::abs(w)));
}

// Bisection on [lo, hi] assuming fn(lo) and fn(hi) have opposite signs.
template <typename Fn>
double bisect(Fn&& fn, double lo, double hi) {
    double flo = fn(lo);
    double fhi = fn(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) {
        throw NoBracket("root bracketing failed on [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = fn(mid);
        if (fmid == 0.0) return mid;
        if ((fmid > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-16 * (1.0 + std::abs(lo) + std::abs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

// Global-minimum locus constant log((1-p)(1-q)/(pq)).
double global_locus_rhs(const SwitchKernel& k) {
    return std::log((1.0 - k.p) * (1.0 - k.q) / (k.p * k.q));
}

} // namespace

const char* to_string(CriticalClass c) {
    switch (c) {
        case CriticalClass::GlobalMin: return "GlobalMin";
        case CriticalClass::LocalMin: return "LocalMin";
        case CriticalClass::LocalMax: return "LocalMax";
        case CriticalClass::Saddle: return "Saddle";
        case CriticalClass::Station: return "Station";
        case CriticalClass::NotCritical: return "NotCritical";
    }
    return "?";
}

const char* to_string(BasinClass b) {
    switch (b) {
        case BasinClass::ToGlobal: return "ToGlobal";
        case BasinClass::ToLocalMin: return "ToLocalMin";
        case BasinClass::ToSaddle: return "ToSaddle";
        case BasinClass::ToLocalMax: return "ToLocalMax";
    }
    return "?";
}

double logit(int x, const BiasedParams& params) {
    const double e2 = params.e * params.e;
    return e2 * slope(params.w) * static_cast<double>(x) + params.b - 0.5 * e2;
}

double loss_with_bias(const SwitchKernel& k, const BiasedParams& params) {
    return expected_loss(k, logit(0, params), logit(1, params));
}

double optimal_bias(const SwitchKernel& k, const Params2& params) {
    // exp(b* - e^2/2) = [r - 1 + sqrt((r-1)^2 + 4 r A)] / (2A) with r = p/q
    // and A = exp(s), s = e^2 (1 + 2w|w|).  Rewritten through asinh so that
    // neither A nor 1/A is ever formed:
    //   b* - e^2/2 = (log r - s)/2 + asinh((r-1)/(2 sqrt(r)) * exp(-s/2)).
    const double e2 = params.e * params.e;
    const double s = e2 * slope(params.w);
    const double log_r = std::log(k.p / k.q);
    const double correction =
        asinh_scaled(0.5 * (k.p / k.q - 1.0), -0.5 * (s + log_r));
    return 0.5 * e2 + 0.5 * (log_r - s) + correction;
}

double loss(const SwitchKernel& k, const Params2& params) {
    return loss_with_bias(k, BiasedParams{params.e, params.w, optimal_bias(k, params)});
}

F12Terms f12_terms(const SwitchKernel& k, const BiasedParams& params) {
    const double phi0 = sigmoid(logit(0, params));
    const double phi1 = sigmoid(logit(1, params));
    return F12Terms{phi1 + k.q - 1.0 - phi0 + k.p, phi0 - k.p};
}

Grad3 grad_with_bias(const SwitchKernel& k, const BiasedParams& params) {
    const auto pi = markov::stationary(k);
    const auto [f1, f2] = f12_terms(k, params);
    const double sl = slope(params.w);
    // E[(f1 X + f2) X] and E[(f1 X + f2) (2X(1+2w|w|) - 1)] over X ~ Bern(pi1).
    const double ex = pi.pi1 * (f1 + f2);
    const double de = (ex * 2.0 * sl - (pi.pi1 * f1 + f2)) * params.e;
    const double dw = ex * 4.0 * params.e * params.e * std::abs(params.w);
    const double db = pi.pi1 * f1 + f2;
    return Grad3{de, dw, db};
}

Grad2 grad(const SwitchKernel& k, const Params2& params) {
    const auto pi = markov::stationary(k);
    const BiasedParams at_opt{params.e, params.w, optimal_bias(k, params)};
    const auto [f1, f2] = f12_terms(k, at_opt);
    const double ex = pi.pi1 * (f1 + f2);
    const double de = ex * 2.0 * slope(params.w) * params.e;
    const double dw = ex * 4.0 * params.e * params.e * std::abs(params.w);
    return Grad2{de, dw};
}

std::array<std::array<double, 3>, 3>
hessian_with_bias_on_axis(const SwitchKernel& k, double w) {
    const auto pi = markov::stationary(k);
    const double c = pi.pi0 * pi.pi1;
    std::array<std::array<double, 3>, 3> h{};
    h[0][0] = c;
    h[1][1] = c * 2.0 * (k.p + k.q - 1.0) * slope(w);
    return h;
}

std::array<std::array<double, 2>, 2>
reduced_hessian_on_axis(const SwitchKernel& k, double w) {
    const auto pi = markov::stationary(k);
    std::array<std::array<double, 2>, 2> h{};
    h[0][0] = pi.pi0 * pi.pi1 * 2.0 * (k.p + k.q - 1.0) * slope(w);
    return h;
}

CriticalClass classify_critical(const SwitchKernel& k, const Params2& params,
                                double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("classify_critical: tol must be > 0");
    markov::require_nondegenerate(k);

    const double e2s = params.e * params.e * slope(params.w);
    const bool is_global = std::abs(e2s - global_locus_rhs(k)) < tol;

    CriticalClass axis_class = CriticalClass::NotCritical;
    if (std::abs(params.e) < tol) {
        // The saddle point is the shared boundary of the min and max
        // segments, so it takes precedence over either sign test; the sign
        // conditions themselves are open and need no tolerance.
        const double s = (k.p + k.q - 1.0) * slope(params.w);
        if (std::abs(params.w + kInvSqrt2) < tol) {
            axis_class = CriticalClass::Saddle;
        } else if (s > 0.0) {
            axis_class = CriticalClass::LocalMin;
        } else if (s < 0.0) {
            axis_class = CriticalClass::LocalMax;
        }
    }

    if (is_global && axis_class != CriticalClass::NotCritical) {
        throw AmbiguousClass("point matches both the global-minimum locus and the "
                             "e = 0 critical axis; tolerance too loose for this kernel");
    }
    if (is_global) return CriticalClass::GlobalMin;
    return axis_class;
}

double energy(const Params2& params) {
    if (params.w == 0.0) {
        throw std::domain_error("energy: undefined at w = 0 (energy barrier)");
    }
    return params.e * params.e + axis_energy(params.w);
}

double saddle_energy() { return -(1.0 + std::log(2.0)) / 2.0; }

double saddle_contour(double w) {
    if (!(w < 0.0)) {
        throw std::domain_error("saddle_contour: defined only for w < 0");
    }
    const double radicand = w * w - std::log(-w) + saddle_energy();
    if (radicand < 0.0) {
        throw NegativeRadicand("saddle_contour: negative radicand at w = " +
                               std::to_string(w));
    }
    return std::sqrt(radicand);
}

BasinClass basin(const SwitchKernel& k, const Params2& init, double boundary_tol) {
    markov::require_nondegenerate(k);
    const double e = init.e;
    const double w = init.w;
    const bool high_switch = k.p + k.q > 1.0;

    if (high_switch) {
        // Exact critical points on the axis stay put.
        if (e == 0.0 && w < -kInvSqrt2) return BasinClass::ToLocalMax;
        if (w >= 0.0) return BasinClass::ToLocalMin;
        // w < 0 from here on.
        const double g = saddle_contour(w);
        if (w >= -kInvSqrt2 && std::abs(std::abs(e) - g) < boundary_tol)
            return BasinClass::ToSaddle;
        if (w > -kInvSqrt2 && std::abs(e) < g) return BasinClass::ToLocalMin;
        return BasinClass::ToGlobal;
    }

    // p + q < 1.  The whole e = 0 axis right of the saddle is critical
    // (local maxima); the w = 0 axis with e != 0 flows to a global minimum.
    if (e == 0.0 && w > -kInvSqrt2) return BasinClass::ToLocalMax;
    if (w == 0.0) return BasinClass::ToGlobal;
    if (w > 0.0) return BasinClass::ToGlobal;
    const double g = saddle_contour(w);
    if (w <= -kInvSqrt2 && std::abs(std::abs(e) - g) < boundary_tol)
        return BasinClass::ToSaddle;
    if (w < -kInvSqrt2 && std::abs(e) < g) return BasinClass::ToLocalMin;
    return BasinClass::ToGlobal;
}

Params2 predicted_limit(const SwitchKernel& k, const Params2& init) {
    const BasinClass dest = basin(k, init);
    if (dest == BasinClass::ToLocalMax) {
        throw std::invalid_argument(
            "predicted_limit: init lies in the local-maximum set; it is its own limit");
    }
    if (dest == BasinClass::ToSaddle) return Params2{0.0, -kInvSqrt2};

    const bool high_switch = k.p + k.q > 1.0;
    const double esign = sign(init.e);

    if (dest == BasinClass::ToLocalMin) {
        if (init.w == 0.0) return Params2{0.0, 0.0};
        const double e0 = energy(init);
        const auto on_contour = [&](double w) { return axis_energy(w) - e0; };
        double w_lim;
        if (init.w > 0.0) {
            // f decreases from +inf to -inf on (0, inf).
            double lo = 1.0, hi = 1.0;
            while (on_contour(lo) < 0.0) lo *= 0.5;
            while (on_contour(hi) > 0.0) hi *= 2.0;
            w_lim = bisect(on_contour, lo, hi);
        } else if (high_switch) {
            // f decreases from E_sad to -inf on [-1/sqrt2, 0).
            double hi = -1e-12;
            while (on_contour(hi) > 0.0) hi *= 0.5;
            w_lim = bisect(on_contour, -kInvSqrt2, hi);
        } else {
            // f increases from -inf to E_sad on (-inf, -1/sqrt2].
            double lo = -2.0;
            while (on_contour(lo) > 0.0) lo *= 2.0;
            w_lim = bisect(on_contour, lo, -kInvSqrt2);
        }
        return Params2{0.0, w_lim};
    }

    // ToGlobal: intersect the energy contour with the global locus
    // e^2 (1 + 2w|w|) = c.
    const double c = global_locus_rhs(k);
    if (init.w == 0.0) {
        // Flow pinned to the w = 0 axis; the locus there is e^2 = c.
        return Params2{esign * std::sqrt(c), 0.0};
    }
    const double e0 = energy(init);
    const auto mismatch = [&](double w) {
        const double e2 = e0 - axis_energy(w); // e^2 along the contour
        return e2 * slope(w) - c;
    };
    double w_lim;
    if (high_switch) {
        // Root left of the saddle; mismatch(-1/sqrt2) = -c > 0, -> -inf at -inf.
        double lo = -2.0 * kInvSqrt2;
        while (mismatch(lo) > 0.0) lo *= 2.0;
        w_lim = bisect(mismatch, lo, -kInvSqrt2);
    } else if (init.w < 0.0) {
        // Root in (-1/sqrt2, 0): mismatch(-1/sqrt2) = -c < 0, -> +inf at 0-.
        double hi = -1e-3;
        while (mismatch(hi) < 0.0) hi *= 0.1;
        w_lim = bisect(mismatch, -kInvSqrt2, hi);
    } else {
        // w0 > 0, p+q < 1: the contour meets the axis at w_min where
        // e^2 = 0; the locus intersection lies right of it.
        const auto on_contour = [&](double w) { return axis_energy(w) - e0; };
        double lo = 1.0, hi = 1.0;
        while (on_contour(lo) < 0.0) lo *= 0.5;
        while (on_contour(hi) > 0.0) hi *= 2.0;
        const double w_min = bisect(on_contour, lo, hi);
        hi = std::max(2.0 * w_min, 1.0);
        while (mismatch(hi) < 0.0) hi *= 2.0;
        w_lim = bisect(mismatch, w_min, hi);
    }
    const double e2 = e0 - axis_energy(w_lim);
    return Params2{esign * std::sqrt(std::max(e2, 0.0)), w_lim};
}

} // namespace mcflow::canonical
