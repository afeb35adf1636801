#include "mcflow/flow.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "mcflow/errors.hpp"
#include "mcflow/math.hpp"

namespace mcflow::flow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// Difference between the 5th- and embedded 4th-order weights.
constexpr double e1 = b1 - 5179.0 / 57600, e3 = b3 - 7571.0 / 16695,
                 e4 = b4 - 393.0 / 640, e5 = b5 - -92097.0 / 339200,
                 e6 = b6 - 187.0 / 2100, e7 = -1.0 / 40;

template <int N>
using Vec = std::array<double, N>;

template <int N>
double norm(const Vec<N>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// One integration run.  Field writes dy/dt = -grad L into its second
// argument; eval_loss and eval_energy are used for recorded samples only.
void validate(const FlowConfig& cfg) {
    if (!(cfg.initial_step > 0.0 && cfg.rel_tol > 0.0 && cfg.abs_tol > 0.0 &&
          cfg.grad_stop > 0.0 && cfg.t_max > 0.0 && cfg.max_steps > 0 &&
          cfg.max_samples > 0)) {
        throw std::invalid_argument("FlowConfig: all fields must be positive");
    }
}

template <int N, typename Field, typename Loss, typename Energy>
Trajectory run(const Field& field, const Loss& eval_loss, const Energy& eval_energy,
               Vec<N> y, const FlowConfig& cfg, bool pin_w, int w_index) {
    validate(cfg);
    Trajectory traj;
    traj.dim = N;
    traj.config = cfg;

    double t = 0.0;
    double h = cfg.initial_step;
    Vec<N> k1, k2, k3, k4, k5, k6, k7, ytmp, ynew;
    field(y, k1);

    std::size_t keep_every = 1;
    std::size_t accepted = 0;
    const auto record = [&](const Vec<N>& state, double time, double gnorm) {
        std::array<double, 3> s3{0.0, 0.0, 0.0};
        for (int i = 0; i < N; ++i) s3[i] = state[i];
        traj.times.push_back(time);
        traj.states.push_back(s3);
        traj.losses.push_back(eval_loss(state));
        traj.energies.push_back(eval_energy(state));
        traj.grad_norms.push_back(gnorm);
    };
    const auto thin = [&] {
        if (traj.times.size() <= cfg.max_samples) return;
        // Drop every other stored sample and halve the recording rate.
        std::size_t out = 0;
        for (std::size_t i = 0; i < traj.times.size(); i += 2, ++out) {
            traj.times[out] = traj.times[i];
            traj.states[out] = traj.states[i];
            traj.losses[out] = traj.losses[i];
            traj.energies[out] = traj.energies[i];
            traj.grad_norms[out] = traj.grad_norms[i];
        }
        traj.times.resize(out);
        traj.states.resize(out);
        traj.losses.resize(out);
        traj.energies.resize(out);
        traj.grad_norms.resize(out);
        keep_every *= 2;
    };

    record(y, t, norm<N>(k1));
    if (norm<N>(k1) < cfg.grad_stop) {
        traj.terminated_by = Termination::GradStop;
        return traj;
    }

    traj.terminated_by = Termination::StepLimit;
    for (std::size_t step = 0; step < cfg.max_steps; ++step) {
        traj.steps_taken = step + 1;
        if (t >= cfg.t_max) {
            traj.terminated_by = Termination::TMax;
            break;
        }
        h = std::min(h, cfg.t_max - t);

        for (int i = 0; i < N; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        field(ytmp, k2);
        for (int i = 0; i < N; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        field(ytmp, k3);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        field(ytmp, k4);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        field(ytmp, k5);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                                  a64 * k4[i] + a65 * k5[i]);
        field(ytmp, k6);
        for (int i = 0; i < N; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                                  b6 * k6[i]);
        if (pin_w) ynew[w_index] = 0.0;
        field(ynew, k7); // FSAL

        double err = 0.0;
        for (int i = 0; i < N; ++i) {
            const double diff = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                                     e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double scale =
                cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err += (diff / scale) * (diff / scale);
        }
        err = std::sqrt(err / N);

        if (err <= 1.0) {
            t += h;
            y = ynew;
            k1 = k7;
            ++accepted;
            const double gnorm = norm<N>(k1);
            if (accepted % keep_every == 0) {
                record(y, t, gnorm);
                thin();
            }
            if (gnorm < cfg.grad_stop) {
                traj.terminated_by = Termination::GradStop;
                break;
            }
            if (t >= cfg.t_max) {
                traj.terminated_by = Termination::TMax;
                break;
            }
        }
        const double factor =
            err <= 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h *= factor;
    }

    // Always keep the final point.
    if (traj.times.empty() || traj.times.back() != t) {
        record(y, t, norm<N>(k1));
    }
    return traj;
}

bool excluded_cell(double e, double w, double band) {
    if (std::abs(e) < band) return true;
    if (std::abs(w) < band) return true;
    if (std::abs(w + kInvSqrt2) < band) return true;
    if (w < 0.0) {
        const double g = canonical::saddle_contour(w);
        if (std::abs(std::abs(e) - g) < band) return true;
    }
    return false;
}

CriticalClass expected_class(BasinClass b) {
    switch (b) {
        case BasinClass::ToGlobal: return CriticalClass::GlobalMin;
        case BasinClass::ToLocalMin: return CriticalClass::LocalMin;
        case BasinClass::ToSaddle: return CriticalClass::Saddle;
        case BasinClass::ToLocalMax: return CriticalClass::LocalMax;
    }
    return CriticalClass::NotCritical;
}

} // namespace

const char* to_string(Termination t) {
    switch (t) {
        case Termination::GradStop: return "GradStop";
        case Termination::TMax: return "TMax";
        case Termination::StepLimit: return "StepLimit";
    }
    return "?";
}

Trajectory integrate2d(const SwitchKernel& k, const Params2& init,
                       const FlowConfig& config) {
    const bool pin = init.w == 0.0;
    const auto field = [&k](const Vec<2>& y, Vec<2>& dy) {
        const auto g = canonical::grad(k, Params2{y[0], y[1]});
        dy[0] = -g.de;
        dy[1] = -g.dw;
    };
    const auto eval_loss = [&k](const Vec<2>& y) {
        return canonical::loss(k, Params2{y[0], y[1]});
    };
    const auto eval_energy = [](const Vec<2>& y) {
        return y[1] == 0.0 ? kNaN : canonical::energy(Params2{y[0], y[1]});
    };
    return run<2>(field, eval_loss, eval_energy, Vec<2>{init.e, init.w}, config,
                  pin, 1);
}

Trajectory integrate3d(const SwitchKernel& k, const Params3& init,
                       const FlowConfig& config) {
    const bool pin = init.w == 0.0;
    const auto field = [&k](const Vec<3>& y, Vec<3>& dy) {
        const auto g = attention::attn_grad(k, y[0], y[1], y[2]);
        dy[0] = -g.de;
        dy[1] = -g.dw;
        dy[2] = -g.da;
    };
    const auto eval_loss = [&k](const Vec<3>& y) {
        return attention::attn_loss(k, y[0], y[1], y[2]);
    };
    const auto eval_energy = [](const Vec<3>& y) {
        return y[1] == 0.0 ? kNaN : attention::attn_energy(y[0], y[1], y[2]);
    };
    return run<3>(field, eval_loss, eval_energy, Vec<3>{init.e, init.w, init.a},
                  config, pin, 1);
}

LimitReport verify_trajectory(const Trajectory& traj, const SwitchKernel& k,
                              double energy_tol, double classify_tol) {
    if (traj.times.empty()) {
        throw std::invalid_argument("verify_trajectory: empty trajectory");
    }
    const double grad_final = traj.grad_norms.back();
    const bool converged = traj.terminated_by == Termination::GradStop;
    const bool near_stall =
        traj.terminated_by == Termination::TMax && grad_final < 1e-6;
    if (!converged && !near_stall) {
        throw std::invalid_argument(
            "verify_trajectory: trajectory did not reach the gradient threshold");
    }

    LimitReport report;
    report.dim = traj.dim;
    report.theta_lim = traj.states.back();
    report.grad_norm_final = grad_final;
    report.loss_final = traj.losses.back();
    report.saddle_suspect = near_stall;

    // Energy drift over recorded samples; skipped on the w = 0 plane.
    if (std::isnan(traj.energies.front())) {
        report.energy_drift = kNaN;
    } else {
        double drift = 0.0;
        for (double en : traj.energies) {
            drift = std::max(drift, std::abs(en - traj.energies.front()));
        }
        report.energy_drift = drift;
        if (drift > energy_tol) {
            throw EnergyViolation("energy drift " + std::to_string(drift) +
                                  " exceeds threshold " + std::to_string(energy_tol) +
                                  "; integrator tolerance too loose");
        }
    }

    const double tol = near_stall ? std::max(classify_tol, 1e-3) : classify_tol;
    const auto& s = report.theta_lim;
    if (traj.dim == 2) {
        report.critical_class =
            canonical::classify_critical(k, Params2{s[0], s[1]}, tol);
    } else {
        report.critical_class = attention::attn_classify(k, s[0], s[1], s[2], tol);
    }
    return report;
}

SweepResult basin_sweep(const SwitchKernel& k, const GridSpec& grid,
                        const FlowConfig& config, double classify_tol) {
    if (grid.ne < 1 || grid.nw < 1 || grid.na < 1) {
        throw std::invalid_argument("basin_sweep: grid resolution must be >= 1");
    }
    if (grid.dim != 2 && grid.dim != 3) {
        throw std::invalid_argument("basin_sweep: dim must be 2 or 3");
    }
    markov::require_nondegenerate(k);

    const auto coord = [](double lo, double hi, int n, int i) {
        return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    };

    SweepResult result;
    const int na = grid.dim == 3 ? grid.na : 1;
    result.cells.resize(static_cast<std::size_t>(grid.ne) * grid.nw * na);
    for (int ie = 0; ie < grid.ne; ++ie) {
        for (int iw = 0; iw < grid.nw; ++iw) {
            for (int ia = 0; ia < na; ++ia) {
                const std::size_t idx =
                    (static_cast<std::size_t>(ie) * grid.nw + iw) * na + ia;
                SweepCell& cell = result.cells[idx];
                cell.init = {coord(grid.e_min, grid.e_max, grid.ne, ie),
                             coord(grid.w_min, grid.w_max, grid.nw, iw),
                             grid.dim == 3 ? coord(grid.a_min, grid.a_max, na, ia)
                                           : 0.0};
                cell.excluded =
                    excluded_cell(cell.init[0], cell.init[1], grid.boundary_band);
            }
        }
    }

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= result.cells.size()) return;
            SweepCell& cell = result.cells[idx];
            if (cell.excluded) continue;
            try {
                Trajectory traj;
                if (grid.dim == 2) {
                    cell.has_prediction = true;
                    cell.predicted =
                        canonical::basin(k, Params2{cell.init[0], cell.init[1]});
                    traj = integrate2d(k, Params2{cell.init[0], cell.init[1]}, config);
                } else {
                    traj = integrate3d(
                        k, Params3{cell.init[0], cell.init[1], cell.init[2]}, config);
                }
                const LimitReport report = verify_trajectory(
                    traj, k, std::numeric_limits<double>::infinity(), classify_tol);
                cell.integrated = report.critical_class;
            } catch (const std::exception&) {
                // Non-converged or unclassifiable cells count as disagreements.
                cell.integrated = CriticalClass::NotCritical;
            }
            cell.agree = cell.has_prediction &&
                         cell.integrated == expected_class(cell.predicted);
        }
    };
    const unsigned n_threads =
        std::max(1u, std::min(std::thread::hardware_concurrency(), 16u));
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    for (const SweepCell& cell : result.cells) {
        if (cell.excluded || !cell.has_prediction) continue;
        ++result.compared;
        if (cell.agree) ++result.agreed;
    }
    result.agreement_rate =
        result.compared == 0
            ? kNaN
            : static_cast<double>(result.agreed) / static_cast<double>(result.compared);
    return result;
}

} // namespace mcflow::flow
