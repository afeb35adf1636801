// Binary first-order Markov chain: switching kernel, stationary law,
// entropy quantities, and sequence sampling.
//
// The chain has kernel P = [1-p, p; q, 1-q] where p is the 0->1 switching
// probability and q the 1->0 one.  The process is assumed mixed: every
// symbol is marginally distributed according to the stationary law
// pi = (q, p) / (p+q).
#pragma once

#include <cstdint>
#include <vector>

namespace mcflow::markov {

/// Switching kernel (p, q) with 0 < p < 1 and 0 < q < 1.
struct SwitchKernel {
    double p; ///< P(x_{n+1} = 1 | x_n = 0)
    double q; ///< P(x_{n+1} = 0 | x_n = 1)

    /// Validating factory; throws std::domain_error outside (0,1)^2.
    static SwitchKernel make(double p, double q);

    /// As make(), but additionally rejects kernels with |p+q-1| < tol,
    /// for callers that assume the switching factor is away from 1.
    static SwitchKernel make_nondegenerate(double p, double q,
                                           double tol = kDegeneracyTol);

    double switching_factor() const { return p + q; }

    /// Default tolerance for rejecting the p+q = 1 line.
    static constexpr double kDegeneracyTol = 1e-9;
};

/// Throws DegenerateKernel when |p+q-1| < tol.
void require_nondegenerate(const SwitchKernel& k,
                           double tol = SwitchKernel::kDegeneracyTol);

struct StationaryLaw {
    double pi0;
    double pi1;
};

/// Stationary distribution (q, p) / (p+q); satisfies pi = pi P.
StationaryLaw stationary(const SwitchKernel& k);

/// Binary entropy h(x) = -x log x - (1-x) log(1-x) in nats, extended by
/// continuity to h(0) = h(1) = 0.  Throws std::domain_error outside [0,1].
double binary_entropy(double x);

/// Entropy rate H(x_{n+1} | x_n) = (q h(p) + p h(q)) / (p+q) in nats.
/// Equals the global-minimum loss of the canonical model.
double entropy_rate(const SwitchKernel& k);

/// Marginal entropy H(x_n) = h(pi1) in nats.  Equals the loss at every
/// local minimum / maximum / saddle of the canonical model.
double marginal_entropy(const SwitchKernel& k);

struct BitSequence {
    std::vector<std::uint8_t> bits; ///< symbols in {0,1}
    std::uint64_t seed = 0;         ///< RNG seed used to draw them
};

/// Draws n symbols: x_1 ~ pi, each subsequent bit from row x_i of P.
/// Deterministic given the seed (see rng_algorithm()).
BitSequence sample_sequence(const SwitchKernel& k, std::size_t n,
                            std::uint64_t seed);

/// Identifier of the generator behind all sampling in this library,
/// recorded in output metadata.  Uniform doubles are built from the raw
/// 64-bit output (top 53 bits), so sequences are reproducible bit-exactly
/// across standard-conforming implementations.
const char* rng_algorithm();

} // namespace mcflow::markov
