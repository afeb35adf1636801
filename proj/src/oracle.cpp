#include "mcflow/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mcflow/errors.hpp"
#include "mcflow/rng.hpp"

namespace mcflow::oracle {

FullModelSpec FullModelSpec::make(int d, std::uint64_t alpha_seed, double e,
                                  double w, double b, double a) {
    if (d <= 0 || d % 2 != 0) {
        throw DimensionMismatch("FullModelSpec: d must be a positive even integer");
    }
    FullModelSpec spec;
    spec.d = d;
    spec.q_attn = 1.0;
    spec.w = w;
    spec.b = b;
    spec.a = a;

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    Rng rng(alpha_seed);
    spec.alpha.resize(d);
    for (int i = 0; i < d; ++i) {
        spec.alpha[i] = (rng() & 1u ? 1.0 : -1.0) * inv_sqrt_d;
    }
    // Negative e: flip the shared direction together with e.  Every weight
    // product stays the same, and the ReLU path sees a non-negative scalar.
    if (e < 0.0) {
        e = -e;
        for (double& ai : spec.alpha) ai = -ai;
    }
    spec.e = e;

    // v = (4a / (q^2 d^{5/2})) alpha hits <v, alpha> q^2 d^{5/2} / 4 = a
    // exactly (||alpha||^2 = 1).
    const double d52 = std::pow(static_cast<double>(d), 2.5);
    const double vscale = 4.0 * a / (spec.q_attn * spec.q_attn * d52);
    spec.v.resize(d);
    for (int i = 0; i < d; ++i) spec.v[i] = vscale * spec.alpha[i];
    return spec;
}

double full_forward(const FullModelSpec& spec, const BitSequence& bits,
                    std::size_t n) {
    const int d = spec.d;
    if (d <= 0 || static_cast<int>(spec.alpha.size()) != d ||
        static_cast<int>(spec.v.size()) != d) {
        throw DimensionMismatch("full_forward: inconsistent model dimensions");
    }
    if (n < 1 || n > bits.bits.size()) {
        throw DimensionMismatch("full_forward: position n out of range");
    }
    const int r = 4 * d; // feed-forward width, beta = r = 4d

    // Embedding: x_i = bits[i] * (e alpha) + p_i with p_i = -(e/2) alpha.
    auto embed = [&](std::size_t i) {
        std::vector<double> x(d);
        const double scale = static_cast<double>(bits.bits[i - 1]) * spec.e - 0.5 * spec.e;
        for (int j = 0; j < d; ++j) x[j] = scale * spec.alpha[j];
        return x;
    };

    const std::vector<double> xn = embed(n);

    // Linear attention: y_n = x_n + sum_i att_{n,i} W_V x_i with
    // W_V = alpha v^T and att_{n,i} = q^2 d^{5/2} e^2 (x_n-1/2)(x_i-1/2)/n.
    const double d52 = std::pow(static_cast<double>(d), 2.5);
    const double att_gain = spec.q_attn * spec.q_attn * d52 * spec.e * spec.e /
                            static_cast<double>(n);
    std::vector<double> y = xn;
    const double cn = static_cast<double>(bits.bits[n - 1]) - 0.5;
    for (std::size_t i = 1; i <= n; ++i) {
        const std::vector<double> xi = embed(i);
        const double att = att_gain * cn * (static_cast<double>(bits.bits[i - 1]) - 0.5);
        for (int j = 0; j < d; ++j) {
            double wv_xi_j = 0.0; // (W_V x_i)_j, W_V[j][l] = alpha[j] v[l]
            for (int l = 0; l < d; ++l) wv_xi_j += spec.alpha[j] * spec.v[l] * xi[l];
            y[j] += att * wv_xi_j;
        }
    }

    // Feed-forward: z = y + W2 ReLU(W1 y),
    // W1 = (|w|/sqrt(d)) 1 alpha^T, W2 = (w/sqrt(d)) alpha 1^T.
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> hidden(r);
    for (int m = 0; m < r; ++m) {
        double acc = 0.0; // W1[m][j] = (|w|/sqrt(d)) alpha[j]
        for (int j = 0; j < d; ++j) acc += std::abs(spec.w) * inv_sqrt_d * spec.alpha[j] * y[j];
        hidden[m] = acc > 0.0 ? acc : 0.0;
    }
    std::vector<double> z = y;
    for (int j = 0; j < d; ++j) {
        double acc = 0.0; // W2[j][m] = (w/sqrt(d)) alpha[j]
        for (int m = 0; m < r; ++m) acc += spec.w * inv_sqrt_d * spec.alpha[j] * hidden[m];
        z[j] += acc;
    }

    // Weight-tied linear head: logit = <e alpha, z> + b.
    double logit = spec.b;
    for (int j = 0; j < d; ++j) logit += spec.e * spec.alpha[j] * z[j];
    return logit;
}

namespace {

double probe(const ScalarField& f, const std::vector<double>& x) {
    const double value = f(x);
    if (!std::isfinite(value)) {
        throw NonFinite("finite-difference probe returned a non-finite value");
    }
    return value;
}

} // namespace

std::vector<double> fd_gradient(const ScalarField& f, std::vector<double> point,
                                double h) {
    if (!(h > 0.0)) throw std::invalid_argument("fd_gradient: h must be > 0");
    const std::size_t dim = point.size();
    std::vector<double> grad(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const double xi = point[i];
        point[i] = xi + h;
        const double fp = probe(f, point);
        point[i] = xi - h;
        const double fm = probe(f, point);
        point[i] = xi;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

std::vector<std::vector<double>> fd_hessian(const ScalarField& f,
                                            std::vector<double> point,
                                            double h) {
    if (!(h > 0.0)) throw std::invalid_argument("fd_hessian: h must be > 0");
    const std::size_t dim = point.size();
    std::vector<std::vector<double>> hess(dim, std::vector<double>(dim, 0.0));
    const double f0 = probe(f, point);
    for (std::size_t i = 0; i < dim; ++i) {
        const double xi = point[i];
        point[i] = xi + h;
        const double fp = probe(f, point);
        point[i] = xi - h;
        const double fm = probe(f, point);
        point[i] = xi;
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
        for (std::size_t j = i + 1; j < dim; ++j) {
            const double xj = point[j];
            point[i] = xi + h; point[j] = xj + h;
            const double fpp = probe(f, point);
            point[j] = xj - h;
            const double fpm = probe(f, point);
            point[i] = xi - h; point[j] = xj + h;
            const double fmp = probe(f, point);
            point[j] = xj - h;
            const double fmm = probe(f, point);
            point[i] = xi; point[j] = xj;
            const double mixed = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[i][j] = mixed;
            hess[j][i] = mixed;
        }
    }
    return hess;
}

McEstimate mc_loss(const SwitchKernel& k,
                   const std::function<double(int)>& predictor,
                   std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < 10000) {
        throw std::invalid_argument("mc_loss: n_samples must be >= 1e4");
    }
    Rng rng(seed);
    const auto pi = markov::stationary(k);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const int x = uniform01(rng) < pi.pi1 ? 1 : 0;
        const double p_next = x == 0 ? k.p : 1.0 - k.q;
        const int y = uniform01(rng) < p_next ? 1 : 0;
        const double fx = predictor(x);
        const double nll = y == 1 ? -std::log(fx) : -std::log1p(-fx);
        sum += nll;
        sum_sq += nll * nll;
    }
    const double n = static_cast<double>(n_samples);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return McEstimate{mean, std::sqrt(var / n)};
}

} // namespace mcflow::oracle
