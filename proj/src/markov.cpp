#include "mcflow/markov.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mcflow/errors.hpp"
#include "mcflow/rng.hpp"

namespace mcflow::markov {

SwitchKernel SwitchKernel::make(double p, double q) {
    if (!(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0)) {
        throw std::domain_error("SwitchKernel: (p, q) must lie in (0,1)^2, got p=" +
                                std::to_string(p) + " q=" + std::to_string(q));
    }
    return SwitchKernel{p, q};
}

SwitchKernel SwitchKernel::make_nondegenerate(double p, double q, double tol) {
    SwitchKernel k = make(p, q);
    require_nondegenerate(k, tol);
    return k;
}

void require_nondegenerate(const SwitchKernel& k, double tol) {
    if (std::abs(k.p + k.q - 1.0) < tol) {
        throw DegenerateKernel("kernel has p+q = " + std::to_string(k.p + k.q) +
                               ", too close to the degenerate line p+q = 1");
    }
}

StationaryLaw stationary(const SwitchKernel& k) {
    const double s = k.p + k.q;
    return StationaryLaw{k.q / s, k.p / s};
}

double binary_entropy(double x) {
    if (!(x >= 0.0 && x <= 1.0)) {
        throw std::domain_error("binary_entropy: argument outside [0,1]");
    }
    // 0 log 0 := 0 by continuity.
    double h = 0.0;
    if (x > 0.0) h -= x * std::log(x);
    if (x < 1.0) h -= (1.0 - x) * std::log(1.0 - x);
    return h;
}

double entropy_rate(const SwitchKernel& k) {
    return (k.q * binary_entropy(k.p) + k.p * binary_entropy(k.q)) / (k.p + k.q);
}

double marginal_entropy(const SwitchKernel& k) {
    return binary_entropy(stationary(k).pi1);
}

BitSequence sample_sequence(const SwitchKernel& k, std::size_t n,
                            std::uint64_t seed) {
    if (n < 1) {
        throw std::invalid_argument("sample_sequence: n must be >= 1");
    }
    Rng rng(seed);
    BitSequence seq;
    seq.seed = seed;
    seq.bits.reserve(n);

    const StationaryLaw pi = stationary(k);
    std::uint8_t state = uniform01(rng) < pi.pi1 ? 1 : 0;
    seq.bits.push_back(state);
    for (std::size_t i = 1; i < n; ++i) {
        const double flip = state == 0 ? k.p : k.q;
        if (uniform01(rng) < flip) state ^= 1;
        seq.bits.push_back(state);
    }
    return seq;
}

const char* rng_algorithm() { return "mt19937_64/u53"; }

} // namespace mcflow::markov
