// Continuous-time gradient-flow integration in R^2 and R^3 with convergence
// detection, energy-drift monitoring, limit-point verification, and basin
// sweeps.
//
// The flow d theta / dt = -grad L(theta) is integrated with an embedded
// Dormand-Prince 5(4) pair under mixed absolute/relative error control.
// Energy drift along trajectories is the primary integration diagnostic,
// hence the tight default tolerances.
#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "mcflow/attention.hpp"
#include "mcflow/canonical.hpp"
#include "mcflow/markov.hpp"

namespace mcflow::flow {

using attention::Params3;
using canonical::BasinClass;
using canonical::CriticalClass;
using canonical::Params2;
using markov::SwitchKernel;

struct FlowConfig {
    double initial_step = 1e-3;
    double rel_tol = 1e-10;
    double abs_tol = 1e-10;
    double grad_stop = 1e-9; ///< terminate when ||grad L|| drops below this
    double t_max = 1e4;
    std::size_t max_steps = 5'000'000;
    std::size_t max_samples = 10'000; ///< stored samples after thinning
};

enum class Termination { GradStop, TMax, StepLimit };

const char* to_string(Termination t);

struct Trajectory {
    int dim = 2; ///< 2 or 3; 2-D states leave the third slot at zero
    std::vector<double> times;
    std::vector<std::array<double, 3>> states;
    std::vector<double> losses;
    std::vector<double> energies; ///< NaN on the w = 0 plane
    std::vector<double> grad_norms;
    Termination terminated_by = Termination::GradStop;
    std::size_t steps_taken = 0;
    FlowConfig config;

    std::array<double, 3> final_state() const { return states.back(); }
};

struct LimitReport {
    std::array<double, 3> theta_lim{};
    int dim = 2;
    CriticalClass critical_class = CriticalClass::NotCritical;
    double energy_drift = 0.0; ///< NaN when the trajectory lives on w = 0
    double grad_norm_final = 0.0;
    double loss_final = 0.0;
    /// TMax termination with a small (< 1e-6) but not converged gradient,
    /// classified against a widened tolerance; typical of saddle approaches.
    bool saddle_suspect = false;
};

/// Integrates the 2-D flow from init.  A w = 0 start stays pinned to the
/// axis (the flow field vanishes in w there).
Trajectory integrate2d(const SwitchKernel& k, const Params2& init,
                       const FlowConfig& config = {});

/// Integrates the 3-D flow; a w = 0 start stays pinned to the (e, a) plane.
Trajectory integrate3d(const SwitchKernel& k, const Params3& init,
                       const FlowConfig& config = {});

/// Summarizes a finished trajectory: maximum energy drift, limit-point
/// classification, and final gradient norm / loss.
///
/// Accepts GradStop trajectories, and TMax trajectories whose final
/// gradient norm is below 1e-6 (flagged saddle_suspect).  Throws
/// EnergyViolation when the drift exceeds energy_tol; pass +inf to skip
/// that check.
LimitReport verify_trajectory(const Trajectory& traj, const SwitchKernel& k,
                              double energy_tol, double classify_tol = 1e-6);

struct GridSpec {
    double e_min = -2.0, e_max = 2.0;
    double w_min = -2.0, w_max = 2.0;
    int ne = 41, nw = 41;
    double a_min = 0.0, a_max = 0.0;
    int na = 1;
    int dim = 2;
    /// Cells within this distance of a predicted-boundary curve are skipped.
    double boundary_band = 1e-3;
};

struct SweepCell {
    std::array<double, 3> init{};
    bool excluded = false;
    bool has_prediction = false; ///< false in 3-D (no closed-form basins)
    BasinClass predicted = BasinClass::ToGlobal;
    CriticalClass integrated = CriticalClass::NotCritical;
    bool agree = false;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::size_t compared = 0;
    std::size_t agreed = 0;
    /// agreed / compared; NaN when nothing was compared (3-D sweeps).
    double agreement_rate = 0.0;
};

/// Integrates every non-excluded grid cell and compares the landing class
/// with the predicted basin (2-D only).  Cells are processed in parallel
/// and merged by grid index, so results are deterministic.
SweepResult basin_sweep(const SwitchKernel& k, const GridSpec& grid,
                        const FlowConfig& config = {},
                        double classify_tol = 1e-6);

} // namespace mcflow::flow
