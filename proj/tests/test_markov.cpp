#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "mcflow/errors.hpp"
#include "mcflow/markov.hpp"
#include "mcflow/rng.hpp"

using namespace mcflow;
using namespace mcflow::markov;

TEST_CASE("kernel construction validates the open unit square") {
    CHECK_NOTHROW(SwitchKernel::make(0.2, 0.3));
    CHECK_THROWS_AS(SwitchKernel::make(0.0, 0.5), std::domain_error);
    CHECK_THROWS_AS(SwitchKernel::make(1.0, 0.5), std::domain_error);
    CHECK_THROWS_AS(SwitchKernel::make(0.5, -0.1), std::domain_error);
    CHECK_THROWS_AS(SwitchKernel::make_nondegenerate(0.4, 0.6), DegenerateKernel);
    CHECK_NOTHROW(SwitchKernel::make_nondegenerate(0.4, 0.6 + 1e-6));
}

TEST_CASE("stationary law") {
    const auto symmetric = stationary(SwitchKernel::make(0.5, 0.5));
    CHECK(symmetric.pi0 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(symmetric.pi1 == doctest::Approx(0.5).epsilon(1e-15));

    const auto skew = stationary(SwitchKernel::make(0.2, 0.3));
    CHECK(skew.pi0 == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(skew.pi1 == doctest::Approx(0.4).epsilon(1e-15));

    const auto fast = stationary(SwitchKernel::make(0.9, 0.9));
    CHECK(fast.pi1 == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("stationary law is a fixed point of the kernel for random kernels") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto k = SwitchKernel::make(uniform(rng, 0.01, 0.99),
                                          uniform(rng, 0.01, 0.99));
        const auto pi = stationary(k);
        CHECK(pi.pi0 + pi.pi1 == doctest::Approx(1.0).epsilon(1e-15));
        // pi P componentwise
        const double lhs0 = pi.pi0 * (1.0 - k.p) + pi.pi1 * k.q;
        const double lhs1 = pi.pi0 * k.p + pi.pi1 * (1.0 - k.q);
        CHECK(std::abs(lhs0 - pi.pi0) < 1e-14);
        CHECK(std::abs(lhs1 - pi.pi1) < 1e-14);
    }
}

TEST_CASE("binary entropy") {
    CHECK(binary_entropy(0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(1.0) == 0.0);
    const double h01 = -0.1 * std::log(0.1) - 0.9 * std::log(0.9);
    CHECK(binary_entropy(0.1) == doctest::Approx(h01).epsilon(1e-15));
    CHECK(binary_entropy(0.1) == doctest::Approx(0.325083).epsilon(1e-6));
    CHECK_THROWS_AS(binary_entropy(-0.01), std::domain_error);
    CHECK_THROWS_AS(binary_entropy(1.01), std::domain_error);
}

TEST_CASE("entropy rate and marginal entropy") {
    CHECK(entropy_rate(SwitchKernel::make(0.5, 0.5)) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(entropy_rate(SwitchKernel::make(0.1, 0.1)) ==
          doctest::Approx(binary_entropy(0.1)).epsilon(1e-15));
    const auto k = SwitchKernel::make(0.2, 0.3);
    const double expected =
        (0.3 * binary_entropy(0.2) + 0.2 * binary_entropy(0.3)) / 0.5;
    CHECK(entropy_rate(k) == doctest::Approx(expected).epsilon(1e-15));

    CHECK(marginal_entropy(SwitchKernel::make(0.7, 0.7)) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(marginal_entropy(k) == doctest::Approx(binary_entropy(0.4)).epsilon(1e-15));
    CHECK(marginal_entropy(k) == doctest::Approx(0.673012).epsilon(1e-6));
    CHECK(marginal_entropy(SwitchKernel::make(0.5, 0.8)) ==
          doctest::Approx(binary_entropy(5.0 / 13.0)).epsilon(1e-15));
}

TEST_CASE("entropy rate <= marginal entropy with equality only at p+q = 1") {
    Rng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto k = SwitchKernel::make(uniform(rng, 0.01, 0.99),
                                          uniform(rng, 0.01, 0.99));
        const double gap = marginal_entropy(k) - entropy_rate(k);
        CHECK(gap >= -1e-14);
        if (std::abs(k.p + k.q - 1.0) > 0.05) CHECK(gap > 1e-5);
    }
    // On the p+q = 1 line the chain is i.i.d. and the gap closes.
    const auto iid = SwitchKernel::make(0.3, 0.7);
    CHECK(marginal_entropy(iid) - entropy_rate(iid) ==
          doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("sampling is deterministic given the seed") {
    const auto k = SwitchKernel::make(0.2, 0.3);
    const auto a = sample_sequence(k, 200, 99);
    const auto b = sample_sequence(k, 200, 99);
    const auto c = sample_sequence(k, 200, 100);
    CHECK(a.bits == b.bits);
    CHECK(a.bits != c.bits);
    CHECK(a.seed == 99);
    for (auto bit : a.bits) CHECK((bit == 0 || bit == 1));
}

TEST_CASE("near-certain switching produces alternating sequences") {
    const auto k = SwitchKernel::make(0.999, 0.999);
    int alternating = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto seq = sample_sequence(k, 10, seed);
        bool ok = true;
        for (std::size_t i = 1; i < seq.bits.size(); ++i) {
            if (seq.bits[i] == seq.bits[i - 1]) ok = false;
        }
        alternating += ok;
    }
    // Per-sequence alternation probability is 0.999^9 > 0.99.
    CHECK(alternating >= 190);
}

TEST_CASE("pair frequencies match the kernel at n = 1e6") {
    SUBCASE("fair i.i.d. bits") {
        const auto k = SwitchKernel::make(0.5, 0.5);
        const auto seq = sample_sequence(k, 1000000, 4242);
        double count[2][2] = {{0, 0}, {0, 0}};
        for (std::size_t i = 1; i < seq.bits.size(); ++i) {
            count[seq.bits[i - 1]][seq.bits[i]] += 1.0;
        }
        const double n = static_cast<double>(seq.bits.size() - 1);
        const double sigma = std::sqrt(0.25 * 0.75 / n);
        for (int x = 0; x < 2; ++x) {
            for (int y = 0; y < 2; ++y) {
                CHECK(std::abs(count[x][y] / n - 0.25) < 3.0 * sigma);
            }
        }
    }
    SUBCASE("chi-square consistency against an asymmetric kernel") {
        const auto k = SwitchKernel::make(0.2, 0.3);
        const auto pi = stationary(k);
        const auto seq = sample_sequence(k, 1000000, 31337);
        double count[2][2] = {{0, 0}, {0, 0}};
        for (std::size_t i = 1; i < seq.bits.size(); ++i) {
            count[seq.bits[i - 1]][seq.bits[i]] += 1.0;
        }
        const double n = static_cast<double>(seq.bits.size() - 1);
        const double expect[2][2] = {
            {pi.pi0 * (1.0 - k.p), pi.pi0 * k.p},
            {pi.pi1 * k.q, pi.pi1 * (1.0 - k.q)},
        };
        double chi2 = 0.0;
        for (int x = 0; x < 2; ++x) {
            for (int y = 0; y < 2; ++y) {
                const double ex = expect[x][y] * n;
                chi2 += (count[x][y] - ex) * (count[x][y] - ex) / ex;
            }
        }
        // 3 effective degrees of freedom; 16.3 is the 0.999 quantile.
        CHECK(chi2 < 16.3);
    }
}

TEST_CASE("single-bit marginal matches pi over a million seeds") {
    const auto k = SwitchKernel::make(0.2, 0.3);
    const auto pi = stationary(k);
    const int trials = 1000000;
    double ones = 0.0;
    for (int seed = 0; seed < trials; ++seed) {
        ones += sample_sequence(k, 1, static_cast<std::uint64_t>(seed)).bits[0];
    }
    const double sigma = std::sqrt(pi.pi0 * pi.pi1 / trials);
    CHECK(std::abs(ones / trials - pi.pi1) < 3.0 * sigma);
}

TEST_CASE("rng algorithm identifier is stable") {
    CHECK(std::string(rng_algorithm()) == "mt19937_64/u53");
}
