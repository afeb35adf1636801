// Independent ground-truth machinery: the explicit d-dimensional rank-one
// transformer whose forward pass must collapse to the scalar formulas,
// central finite-difference oracles, and Monte-Carlo loss estimation.
//
// Nothing in this module reuses the closed-form gradient/loss paths it is
// meant to check.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mcflow/markov.hpp"

namespace mcflow::oracle {

using markov::BitSequence;
using markov::SwitchKernel;

/// Explicit rank-one single-layer transformer in d dimensions.
///
/// All weights are built from one shared direction alpha in {+-1}^d/sqrt(d):
/// token embedding e*alpha, positional embedding -(e/2)*alpha at every
/// position, W1 = (|w|/sqrt(d)) 1 alpha^T (4d x d), W2 = (w/sqrt(d)) alpha 1^T,
/// value matrix W_V = alpha v^T with v = (4a / (q_attn^2 d^{5/2})) alpha so
/// that <v, alpha> q_attn^2 d^{5/2} / 4 = a exactly, and a weight-tied
/// linear head equal to the token embedding.
///
/// The scalar formulas are even in e while the ReLU path is not, so a
/// negative embedding scalar is realized by flipping alpha jointly with e;
/// this leaves every weight product (and thus the represented point)
/// unchanged.
struct FullModelSpec {
    int d = 0;                 ///< embedding dimension (positive even)
    std::vector<double> alpha; ///< shared direction, entries +-1/sqrt(d)
    double e = 0.0;            ///< embedding scalar (stored non-negative)
    double w = 0.0;
    double b = 0.0;
    double a = 0.0;
    double q_attn = 1.0;       ///< query scaling; fixed at 1
    std::vector<double> v;     ///< value direction, scalar multiple of alpha

    /// Builds the model for scalar parameters (e, w, b, a); alpha signs are
    /// drawn from alpha_seed.
    static FullModelSpec make(int d, std::uint64_t alpha_seed, double e, double w,
                              double b, double a);
};

/// Runs Embedding -> linear attention -> ReLU feed-forward -> tied linear
/// head entirely in d dimensions and returns the logit at position n
/// (1-based).  Attention weights are linear in the scaled dot product:
/// att_{n,i} = q_attn^2 d^{5/2} e^2 (x_n - 1/2)(x_i - 1/2) / n.
/// Throws DimensionMismatch on inconsistent shapes or n out of range.
double full_forward(const FullModelSpec& spec, const BitSequence& bits,
                    std::size_t n);

using ScalarField = std::function<double(const std::vector<double>&)>;

/// Central-difference gradient, O(h^2) truncation.  Throws NonFinite if any
/// probe is non-finite.
std::vector<double> fd_gradient(const ScalarField& f, std::vector<double> point,
                                double h = 1e-5);

/// Symmetrized second-difference Hessian.
std::vector<std::vector<double>> fd_hessian(const ScalarField& f,
                                            std::vector<double> point,
                                            double h = 1e-4);

struct McEstimate {
    double estimate;  ///< mean cross-entropy in nats
    double std_error; ///< sample standard error
};

/// Monte-Carlo cross-entropy of a predictor P(Y=1 | X=x) against pairs
/// (X, Y) ~ (pi, P), n_samples >= 10^4.
McEstimate mc_loss(const SwitchKernel& k,
                   const std::function<double(int)>& predictor,
                   std::size_t n_samples, std::uint64_t seed);

} // namespace mcflow::oracle
