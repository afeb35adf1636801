#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mcflow/canonical.hpp"
#include "mcflow/errors.hpp"
#include "mcflow/markov.hpp"
#include "mcflow/math.hpp"
#include "mcflow/oracle.hpp"
#include "mcflow/rng.hpp"

using namespace mcflow;
using namespace mcflow::canonical;
using markov::SwitchKernel;

namespace {

double global_locus_rhs(const SwitchKernel& k) {
    return std::log((1.0 - k.p) * (1.0 - k.q) / (k.p * k.q));
}

// A point of the global-minimum set: pick w on the admissible side of
// -1/sqrt(2) and solve e^2 (1 + 2w|w|) = log((1-p)(1-q)/(pq)) for e.
Params2 sample_global_point(const SwitchKernel& k, Rng& rng) {
    const double c = global_locus_rhs(k);
    double w;
    if (c > 0.0) {
        w = uniform(rng, -kInvSqrt2 + 0.05, 1.5);
    } else {
        w = uniform(rng, -2.5, -kInvSqrt2 - 0.05);
    }
    const double slope = 1.0 + 2.0 * w * std::abs(w);
    const double e = std::sqrt(c / slope) * (uniform01(rng) < 0.5 ? -1.0 : 1.0);
    return Params2{e, w};
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

double vec_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-3});
}

SwitchKernel random_kernel(Rng& rng, double min_gap = 0.0) {
    for (;;) {
        const double p = uniform(rng, 0.05, 0.95);
        const double q = uniform(rng, 0.05, 0.95);
        if (std::abs(p + q - 1.0) > min_gap) return SwitchKernel::make(p, q);
    }
}

} // namespace

TEST_CASE("logit") {
    CHECK(logit(1, BiasedParams{0.0, 1.3, 0.7}) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(logit(0, BiasedParams{1.2, -0.4, 0.3}) ==
          doctest::Approx(0.3 - 0.72).epsilon(1e-15));
    // 1 + 2w|w| = 0 at w = -1/sqrt(2)
    CHECK(logit(1, BiasedParams{1.0, -kInvSqrt2, 0.0}) ==
          doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("loss with bias hits the entropy landmarks") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto k = random_kernel(rng, 0.02);
        // e = 0 with the axis-optimal bias predicts the marginal.
        const double w = uniform(rng, -2.0, 2.0);
        CHECK(loss_with_bias(k, BiasedParams{0.0, w, std::log(k.p / k.q)}) ==
              doctest::Approx(markov::marginal_entropy(k)).epsilon(1e-12));
        // A global-set point with its bias predicts the kernel.
        const Params2 star = sample_global_point(k, rng);
        const double b = 0.5 * star.e * star.e + std::log(k.p / (1.0 - k.p));
        CHECK(loss_with_bias(k, BiasedParams{star.e, star.w, b}) ==
              doctest::Approx(markov::entropy_rate(k)).epsilon(1e-12));
    }
}

TEST_CASE("loss with bias agrees with a Monte-Carlo estimate") {
    const auto k = SwitchKernel::make(0.2, 0.3);
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const BiasedParams params{uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5),
                                  uniform(rng, -1.0, 1.0)};
        const auto predictor = [&](int x) { return sigmoid(logit(x, params)); };
        const auto mc = oracle::mc_loss(k, predictor, 1000000, 1000 + trial);
        CHECK(std::abs(mc.estimate - loss_with_bias(k, params)) < 3.0 * mc.std_error);
    }
}

TEST_CASE("optimal bias closed form") {
    Rng rng(13);
    SUBCASE("e = 0 gives log(p/q)") {
        for (int trial = 0; trial < 20; ++trial) {
            const auto k = random_kernel(rng);
            const double w = uniform(rng, -2.0, 2.0);
            CHECK(optimal_bias(k, Params2{0.0, w}) ==
                  doctest::Approx(std::log(k.p / k.q)).epsilon(1e-12));
        }
    }
    SUBCASE("on the global locus b* - e^2/2 = log(p/(1-p))") {
        for (int trial = 0; trial < 20; ++trial) {
            const auto k = random_kernel(rng, 0.02);
            const Params2 star = sample_global_point(k, rng);
            CHECK(optimal_bias(k, star) - 0.5 * star.e * star.e ==
                  doctest::Approx(std::log(k.p / (1.0 - k.p))).epsilon(1e-11));
        }
    }
    SUBCASE("symmetric kernel: b* - e^2/2 = -e^2 (1+2w|w|)/2") {
        for (int trial = 0; trial < 20; ++trial) {
            const double pq = uniform(rng, 0.05, 0.95);
            const auto k = SwitchKernel::make(pq, pq);
            const double e = uniform(rng, -2.0, 2.0);
            const double w = uniform(rng, -2.0, 2.0);
            const double s = e * e * (1.0 + 2.0 * w * std::abs(w));
            CHECK(optimal_bias(k, Params2{e, w}) - 0.5 * e * e ==
                  doctest::Approx(-0.5 * s).epsilon(1e-12));
        }
    }
    SUBCASE("stationarity and local optimality in b") {
        for (int trial = 0; trial < 1000; ++trial) {
            const auto k = random_kernel(rng);
            const Params2 params{uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0)};
            const double bstar = optimal_bias(k, params);
            const BiasedParams at{params.e, params.w, bstar};
            CHECK(std::abs(grad_with_bias(k, at).db) < 1e-10);
            const double l0 = loss_with_bias(k, at);
            CHECK(loss_with_bias(k, {params.e, params.w, bstar + 0.01}) >= l0);
            CHECK(loss_with_bias(k, {params.e, params.w, bstar - 0.01}) >= l0);
        }
    }
    SUBCASE("stays finite deep into the overflow regime") {
        const auto k = SwitchKernel::make(0.2, 0.3);
        for (double e : {10.0, 30.0}) {
            for (double w : {-3.0, 3.0}) {
                const Params2 params{e, w};
                const double b = optimal_bias(k, params);
                CHECK(std::isfinite(b));
                CHECK(std::isfinite(loss(k, params)));
            }
        }
    }
}

TEST_CASE("f-identity pi1 f1 + f2 = 0 at the optimal bias") {
    Rng rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto k = random_kernel(rng);
        const Params2 params{uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0)};
        const auto terms =
            f12_terms(k, {params.e, params.w, optimal_bias(k, params)});
        const auto pi = markov::stationary(k);
        CHECK(std::abs(pi.pi1 * terms.f1 + terms.f2) < 1e-10);
    }
}

TEST_CASE("bias-optimized loss ordering") {
    Rng rng(19);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto k = random_kernel(rng, 0.05);
        const Params2 star = sample_global_point(k, rng);
        CHECK(std::abs(loss(k, star) - markov::entropy_rate(k)) < 1e-9);
        const double w = uniform(rng, -2.0, 2.0);
        CHECK(std::abs(loss(k, Params2{0.0, w}) - markov::marginal_entropy(k)) <
              1e-12);
        CHECK(markov::entropy_rate(k) < markov::marginal_entropy(k));
    }
}

TEST_CASE("loss dominates every probed bias") {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const auto k = random_kernel(rng);
        const Params2 params{uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0)};
        const double l = loss(k, params);
        const double b = uniform(rng, -3.0, 3.0);
        CHECK(l <= loss_with_bias(k, {params.e, params.w, b}) + 1e-14);
    }
}

TEST_CASE("grid minimum lies on the global locus") {
    const auto k = SwitchKernel::make(0.2, 0.3);
    const double c = global_locus_rhs(k);
    double best = 1e300;
    Params2 argbest{0, 0};
    const int n = 121;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const Params2 pt{-3.0 + 6.0 * i / (n - 1), -3.0 + 6.0 * j / (n - 1)};
            const double l = loss(k, pt);
            if (l < best) {
                best = l;
                argbest = pt;
            }
        }
    }
    // Distance of the winning cell from the locus is below the grid pitch.
    const double resid =
        argbest.e * argbest.e * (1.0 + 2.0 * argbest.w * std::abs(argbest.w)) - c;
    CHECK(std::abs(resid) < 0.3);
    CHECK(best == doctest::Approx(markov::entropy_rate(k)).epsilon(1e-3));
}

TEST_CASE("grad_with_bias matches central finite differences") {
    Rng rng(29);
    const auto k0 = SwitchKernel::make(0.2, 0.3);
    // Spot check from a fixed random point.
    {
        const BiasedParams params{0.7, 0.4, -0.2};
        const auto g = grad_with_bias(k0, params);
        const auto fd = oracle::fd_gradient(
            [&](const std::vector<double>& x) {
                return loss_with_bias(k0, {x[0], x[1], x[2]});
            },
            {params.e, params.w, params.b});
        CHECK(vec_rel_err({g.de, g.dw, g.db}, fd) < 1e-6);
    }
    int checked = 0;
    while (checked < 1000) {
        const auto k = random_kernel(rng);
        const BiasedParams params{uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0),
                                  uniform(rng, -1.5, 1.5)};
        if (std::abs(params.w) < 1e-3) continue;
        ++checked;
        const auto g = grad_with_bias(k, params);
        const auto fd = oracle::fd_gradient(
            [&](const std::vector<double>& x) {
                return loss_with_bias(k, {x[0], x[1], x[2]});
            },
            {params.e, params.w, params.b});
        CHECK(vec_rel_err({g.de, g.dw, g.db}, fd) < 1e-5);
    }
}

TEST_CASE("grad of the bias-optimized loss matches finite differences") {
    Rng rng(31);
    {
        const auto k = SwitchKernel::make(0.9, 0.9);
        const Params2 params{0.5, -0.3};
        const auto g = grad(k, params);
        const auto fd = oracle::fd_gradient(
            [&](const std::vector<double>& x) { return loss(k, {x[0], x[1]}); },
            {params.e, params.w});
        CHECK(vec_rel_err({g.de, g.dw}, fd) < 1e-5);
    }
    int checked = 0;
    while (checked < 1000) {
        const auto k = random_kernel(rng);
        const Params2 params{uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0)};
        if (std::abs(params.w) < 1e-3) continue;
        ++checked;
        const auto g = grad(k, params);
        const auto fd = oracle::fd_gradient(
            [&](const std::vector<double>& x) { return loss(k, {x[0], x[1]}); },
            {params.e, params.w});
        CHECK(vec_rel_err({g.de, g.dw}, fd) < 1e-5);
    }
}

TEST_CASE("gradients vanish on the critical sets") {
    Rng rng(37);
    for (int trial = 0; trial < 200; ++trial) {
        const auto k = random_kernel(rng, 0.02);
        const Params2 star = sample_global_point(k, rng);
        const double b = 0.5 * star.e * star.e + std::log(k.p / (1.0 - k.p));
        const auto g = grad_with_bias(k, {star.e, star.w, b});
        CHECK(std::abs(g.de) < 1e-12);
        CHECK(std::abs(g.dw) < 1e-12);
        CHECK(std::abs(g.db) < 1e-12);

        const double w = uniform(rng, -2.0, 2.0);
        const auto ga = grad_with_bias(k, {0.0, w, std::log(k.p / k.q)});
        CHECK(std::abs(ga.de) < 1e-12);
        CHECK(std::abs(ga.dw) < 1e-12);
        CHECK(std::abs(ga.db) < 1e-12);
    }
    SUBCASE("trivial zeros") {
        const auto k = SwitchKernel::make(0.3, 0.4);
        const auto g0 = grad(k, Params2{0.0, 0.77});
        CHECK(g0.de == 0.0);
        CHECK(g0.dw == 0.0);
        CHECK(grad(k, Params2{0.9, 0.0}).dw == 0.0);
    }
}

TEST_CASE("gradient proportionality identity") {
    // (dL/dw) (1 + 2w|w|) e = (dL/de) 2 e^2 |w| -- the energy law's source.
    Rng rng(41);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto k = random_kernel(rng);
        Params2 params{uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0)};
        if (std::abs(params.e) < 1e-3 || std::abs(params.w) < 1e-3) continue;
        const auto g = grad(k, params);
        const double lhs = g.dw * (1.0 + 2.0 * params.w * std::abs(params.w)) * params.e;
        const double rhs = g.de * 2.0 * params.e * params.e * std::abs(params.w);
        CHECK(std::abs(lhs - rhs) <=
              1e-12 * std::max({std::abs(lhs), std::abs(rhs), 1e-300}));
    }
}

TEST_CASE("axis Hessians match finite differences") {
    Rng rng(43);
    SUBCASE("quoted values") {
        const auto k = SwitchKernel::make(0.9, 0.9);
        const auto h = hessian_with_bias_on_axis(k, 0.0);
        CHECK(h[0][0] == doctest::Approx(0.25).epsilon(1e-15));
        CHECK(h[1][1] == doctest::Approx(0.4).epsilon(1e-13));
        CHECK(h[2][2] == 0.0);
        // Near-degenerate kernel: middle entry ~ 0.25 * 2 * 2 delta.
        const double delta = 1e-4;
        const auto hd = hessian_with_bias_on_axis(
            SwitchKernel::make(0.5 + delta, 0.5 + delta), 0.0);
        CHECK(hd[0][0] == doctest::Approx(0.25).epsilon(1e-7));
        CHECK(hd[1][1] == doctest::Approx(0.25 * 2.0 * 2.0 * delta).epsilon(1e-3));
        CHECK(hessian_with_bias_on_axis(k, -kInvSqrt2)[1][1] ==
              doctest::Approx(0.0).epsilon(1e-14));
        const auto r = reduced_hessian_on_axis(k, 0.3);
        CHECK(r[0][0] > 0.0);
        CHECK(reduced_hessian_on_axis(k, -1.0)[0][0] < 0.0);
        CHECK(reduced_hessian_on_axis(SwitchKernel::make(0.4, 0.4), -1.0)[0][0] > 0.0);
        const auto z = reduced_hessian_on_axis(k, -kInvSqrt2);
        CHECK(z[0][0] == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(z[1][1] == 0.0);
    }
    SUBCASE("finite-difference agreement at random axis points") {
        for (int trial = 0; trial < 25; ++trial) {
            const auto k = random_kernel(rng, 0.02);
            const double w = uniform(rng, -1.5, 1.5);
            const double b = std::log(k.p / k.q);
            const auto fd = oracle::fd_hessian(
                [&](const std::vector<double>& x) {
                    return loss_with_bias(k, {x[1], x[2], x[0]}); // order (b, e, w)
                },
                {b, 0.0, w});
            const auto h = hessian_with_bias_on_axis(k, w);
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    CHECK(std::abs(fd[i][j] - h[i][j]) < 1e-4);
                }
            }
            const auto fd2 = oracle::fd_hessian(
                [&](const std::vector<double>& x) { return loss(k, {x[0], x[1]}); },
                {0.0, w});
            const auto r = reduced_hessian_on_axis(k, w);
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    CHECK(std::abs(fd2[i][j] - r[i][j]) < 1e-4);
                }
            }
        }
    }
}

TEST_CASE("critical-point classification") {
    const double tol = 1e-7;
    SUBCASE("quoted examples") {
        const auto k = SwitchKernel::make(0.2, 0.3);
        const double c = global_locus_rhs(k); // log(28/3)
        CHECK(c == doctest::Approx(std::log(28.0 / 3.0)).epsilon(1e-14));
        const double w = 0.25;
        const double e = std::sqrt(c / (1.0 + 2.0 * w * w));
        CHECK(classify_critical(k, Params2{e, w}, tol) == CriticalClass::GlobalMin);

        const auto k9 = SwitchKernel::make(0.9, 0.9);
        CHECK(classify_critical(k9, Params2{0.0, 0.5}, tol) == CriticalClass::LocalMin);
        CHECK(classify_critical(k9, Params2{0.0, -kInvSqrt2}, tol) ==
              CriticalClass::Saddle);
        CHECK(classify_critical(k9, Params2{0.0, -1.2}, tol) ==
              CriticalClass::LocalMax);
        const auto k1 = SwitchKernel::make(0.1, 0.1);
        CHECK(classify_critical(k1, Params2{0.0, 0.5}, tol) == CriticalClass::LocalMax);
        CHECK(classify_critical(k1, Params2{0.0, -1.2}, tol) == CriticalClass::LocalMin);
    }
    SUBCASE("classified points have vanishing gradients; random points do not") {
        Rng rng(47);
        for (int trial = 0; trial < 300; ++trial) {
            const auto k = random_kernel(rng, 0.05);
            const Params2 star = sample_global_point(k, rng);
            CHECK(classify_critical(k, star, tol) == CriticalClass::GlobalMin);
            const auto g = grad(k, star);
            CHECK(std::hypot(g.de, g.dw) < 1e-8);

            const Params2 axis{0.0, uniform(rng, -2.0, 2.0)};
            const auto cls = classify_critical(k, axis, tol);
            CHECK(cls != CriticalClass::NotCritical);
            const auto ga = grad(k, axis);
            CHECK(std::hypot(ga.de, ga.dw) < 1e-8);

            const Params2 random_pt{uniform(rng, 0.3, 2.0), uniform(rng, -2.0, 2.0)};
            const double resid =
                random_pt.e * random_pt.e *
                    (1.0 + 2.0 * random_pt.w * std::abs(random_pt.w)) -
                global_locus_rhs(k);
            if (std::abs(resid) > 1e-3) {
                CHECK(classify_critical(k, random_pt, tol) ==
                      CriticalClass::NotCritical);
            }
        }
    }
    SUBCASE("degenerate kernels are rejected") {
        CHECK_THROWS_AS(classify_critical(SwitchKernel::make(0.4, 0.6),
                                          Params2{0.1, 0.1}, tol),
                        DegenerateKernel);
    }
    SUBCASE("oversized tolerance is flagged") {
        const auto k = SwitchKernel::make(0.45, 0.56); // |c| is small
        CHECK_THROWS_AS(classify_critical(k, Params2{0.0, 0.5}, 0.2), AmbiguousClass);
    }
}

TEST_CASE("energy function") {
    CHECK(energy(Params2{0.0, -kInvSqrt2}) ==
          doctest::Approx(-(1.0 + std::log(2.0)) / 2.0).epsilon(1e-15));
    CHECK(saddle_energy() == doctest::Approx(-0.8465735903).epsilon(1e-9));
    Rng rng(53);
    for (int trial = 0; trial < 50; ++trial) {
        const double e = uniform(rng, -2.0, 2.0);
        CHECK(energy(Params2{e, 1.0}) == doctest::Approx(e * e - 1.0).epsilon(1e-14));
    }
    CHECK(energy(Params2{1.5, -0.3}) ==
          doctest::Approx(2.25 - 0.09 + std::log(0.3)).epsilon(1e-14));
    CHECK(energy(Params2{1.5, -0.3}) == doctest::Approx(0.956027).epsilon(1e-6));
    CHECK_THROWS_AS(energy(Params2{1.0, 0.0}), std::domain_error);
}

TEST_CASE("saddle contour") {
    CHECK(saddle_contour(-kInvSqrt2) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(saddle_contour(-0.3) == doctest::Approx(0.668879).epsilon(1e-6));
    CHECK(saddle_contour(-0.1) == doctest::Approx(1.210790).epsilon(1e-6));
    CHECK_THROWS_AS(saddle_contour(0.0), std::domain_error);
    CHECK_THROWS_AS(saddle_contour(0.5), std::domain_error);
    // Contour level is exactly the saddle energy.
    Rng rng(59);
    for (int trial = 0; trial < 100; ++trial) {
        const double w = uniform(rng, -2.0, -1e-3);
        const double g = saddle_contour(w);
        CHECK(energy(Params2{g, w}) == doctest::Approx(saddle_energy()).epsilon(1e-11));
    }
}

TEST_CASE("basin prediction") {
    const auto k9 = SwitchKernel::make(0.9, 0.9);
    const auto k1 = SwitchKernel::make(0.1, 0.1);
    CHECK(basin(k9, Params2{0.01, 0.01}) == BasinClass::ToLocalMin);
    CHECK(basin(k1, Params2{0.01, 0.01}) == BasinClass::ToGlobal);
    // The data-agnostic region: |e| > g(w) on the negative half-plane.
    CHECK(basin(k9, Params2{1.5, -0.3}) == BasinClass::ToGlobal);
    CHECK(basin(k1, Params2{1.5, -0.3}) == BasinClass::ToGlobal);

    CHECK(basin(k9, Params2{0.3, 0.0}) == BasinClass::ToLocalMin);
    CHECK(basin(k1, Params2{0.3, 0.0}) == BasinClass::ToGlobal);
    CHECK(basin(k9, Params2{0.0, -1.2}) == BasinClass::ToLocalMax);
    CHECK(basin(k1, Params2{0.0, 0.7}) == BasinClass::ToLocalMax);
    CHECK(basin(k1, Params2{0.0, -1.2}) == BasinClass::ToLocalMin);
    CHECK(basin(k9, Params2{saddle_contour(-0.5), -0.5}) == BasinClass::ToSaddle);
    CHECK(basin(k1, Params2{saddle_contour(-1.1), -1.1}) == BasinClass::ToSaddle);
    CHECK(basin(k9, Params2{0.2, -0.5}) == BasinClass::ToLocalMin);
    CHECK(basin(k1, Params2{0.2, -1.5}) == BasinClass::ToLocalMin);
    CHECK_THROWS_AS(basin(SwitchKernel::make(0.5, 0.5), Params2{0.1, 0.1}),
                    DegenerateKernel);
}

TEST_CASE("predicted limit points") {
    const auto k9 = SwitchKernel::make(0.9, 0.9);
    SUBCASE("axis flow converges to the origin for p+q > 1") {
        const auto lim = predicted_limit(k9, Params2{0.3, 0.0});
        CHECK(lim.e == 0.0);
        CHECK(lim.w == 0.0);
    }
    SUBCASE("positive-w inits land on the positive axis at equal energy") {
        Rng rng(61);
        for (int trial = 0; trial < 100; ++trial) {
            const Params2 init{uniform(rng, -2.0, 2.0), uniform(rng, 0.05, 2.0)};
            const auto lim = predicted_limit(k9, init);
            CHECK(lim.e == 0.0);
            CHECK(lim.w > 0.0);
            CHECK(std::abs(-lim.w * lim.w - std::log(lim.w) - energy(init)) < 1e-10);
        }
    }
    SUBCASE("global limits satisfy both defining equations") {
        Rng rng(67);
        const auto k1 = SwitchKernel::make(0.1, 0.1);
        const auto check_both = [](const SwitchKernel& k, const Params2& init) {
            const auto lim = predicted_limit(k, init);
            CHECK(std::abs(energy(lim) - energy(init)) < 1e-10);
            const double resid = lim.e * lim.e *
                                     (1.0 + 2.0 * lim.w * std::abs(lim.w)) -
                                 global_locus_rhs(k);
            CHECK(std::abs(resid) < 1e-10);
            CHECK(sign(lim.e) == sign(init.e));
        };
        check_both(k1, Params2{1.0, -1.0});
        check_both(k9, Params2{1.5, -0.3});
        check_both(k1, Params2{1.5, -0.3});
        for (int trial = 0; trial < 100; ++trial) {
            const auto k = random_kernel(rng, 0.05);
            Params2 init{uniform(rng, -2.0, 2.0), uniform(rng, -2.0, -0.01)};
            if (basin(k, init) != BasinClass::ToGlobal) continue;
            check_both(k, init);
        }
        // p+q < 1 sends positive-w inits to the global set as well.
        for (int trial = 0; trial < 100; ++trial) {
            Params2 init{uniform(rng, -2.0, 2.0), uniform(rng, 0.05, 2.0)};
            check_both(k1, init);
        }
        // The pinned w = 0 axis flows to (sign(e) sqrt(c), 0).
        const auto lim = predicted_limit(k1, Params2{-0.4, 0.0});
        CHECK(lim.w == 0.0);
        CHECK(lim.e ==
              doctest::Approx(-std::sqrt(global_locus_rhs(k1))).epsilon(1e-12));
    }
    SUBCASE("saddle-contour inits predict the saddle") {
        const auto lim = predicted_limit(k9, Params2{saddle_contour(-0.5), -0.5});
        CHECK(lim.e == 0.0);
        CHECK(lim.w == doctest::Approx(-kInvSqrt2).epsilon(1e-14));
    }
}

TEST_CASE("everything is symmetric under e -> -e") {
    Rng rng(71);
    for (int trial = 0; trial < 300; ++trial) {
        const auto k = random_kernel(rng, 0.02);
        const Params2 plus{uniform(rng, 0.01, 2.0), uniform(rng, -2.0, 2.0)};
        const Params2 minus{-plus.e, plus.w};
        CHECK(loss(k, plus) == doctest::Approx(loss(k, minus)).epsilon(1e-14));
        const auto gp = grad(k, plus);
        const auto gm = grad(k, minus);
        CHECK(gp.de == doctest::Approx(-gm.de).epsilon(1e-14));
        CHECK(gp.dw == doctest::Approx(gm.dw).epsilon(1e-14));
        if (plus.w != 0.0) {
            CHECK(energy(plus) == doctest::Approx(energy(minus)).epsilon(1e-14));
        }
        CHECK(classify_critical(k, plus) == classify_critical(k, minus));
        CHECK(basin(k, plus) == basin(k, minus));
    }
}
