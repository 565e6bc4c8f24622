#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "mobilectl/control.hpp"
#include "mobilectl/grid.hpp"
#include "mobilectl/law.hpp"
#include "mobilectl/state.hpp"

namespace mobilectl {

struct SolverConfig {
    /// Time step; 0 selects min(h, 1e-3 * span) per solve.
    double dt = 0.0;
    /// Residual tolerance relative to (|y_old|_inf / dt + |v|_inf).
    double newton_tol = 1e-10;
    int newton_max_iter = 25;
    int max_damping_halvings = 10;
    bool picard_fallback = true;
    int picard_max_iter = 200;
};

void validate(const SolverConfig& cfg);

/// Default step for a solve over `span` on `grid`.
double default_dt(const SpatialGrid& grid, double span, const SolverConfig& cfg);

struct StepDiagnostics {
    int newton_iterations = 0;
    bool used_picard = false;
    /// Smallest Thomas pivot of the frozen-coefficient system matrix at the
    /// new level; positive means the matrix is an M-matrix.
    double min_pivot = 0.0;
    double residual = 0.0;
};

/// End times of the steps solve_forward takes over one stage [t0, t1] with
/// nominal step dt and constant damping m, assuming no M-matrix restart.
std::vector<double> stage_step_times(double t0, double t1, double dt, double m = 0.0);

/// One backward-Euler step with conservative midpoint fluxes:
///   (y_new - y)/dt = [F(i+1/2) - F(i-1/2)]/h + u y_new + v,
///   F(i+1/2) = k(i+1/2) (y_new(i+1) - y_new(i)) / h,
/// with k = a(mean of neighbours) or b(x(i+1/2), t_new). The nonlinear system
/// is solved by damped Newton on the tridiagonal Jacobian, with an optional
/// frozen-coefficient fallback. `left`/`right` are Dirichlet values at the
/// new time level. Throws invalid-argument if the step matrix is not an
/// M-matrix and NonconvergenceError if both solvers fail.
State step_implicit(const State& state, double dt, const DiffusionLaw& law, const ControlSlice& control,
                    const SpatialGrid& grid, const SolverConfig& cfg = {}, double left = 0.0,
                    double right = 0.0, StepDiagnostics* diag = nullptr);

/// Integrates from y0 (at t_start) to t_end under `schedule`, stage by stage.
/// An empty schedule means no control. Within a stage the steps are uniform;
/// constant damping m shrinks the step by max(1, m dt), and a step whose
/// matrix fails the M-matrix test restarts the stage with half the step.
Trajectory solve_forward(const State& y0, double t_end, const DiffusionLaw& law,
                         const ControlSchedule& schedule, const SpatialGrid& grid,
                         const SolverConfig& cfg = {});

/// Constant-coefficient closed form: sum_k c_k exp(-(k^2 pi^2 b / L^2 + m) t) sin(k pi (x-a)/L),
/// with c_k the discrete sine coefficients of y0 on the grid's interval.
State eigen_oracle(const State& y0, const SpatialGrid& grid, double b_const, double m, double t);

/// Nodes of `grid` restricted to (a, b). If a and b fall on global nodes the
/// sub-grid nodes coincide with global ones.
struct Subinterval {
    SpatialGrid sub;
    std::vector<double> restrict_values(const SpatialGrid& global, std::span<const double> y) const;
};

Subinterval make_subinterval(const SpatialGrid& grid, double a, double b);

/// Piecewise-linear value of nodal data at x, zero boundary data included.
double interpolate_at(const SpatialGrid& grid, std::span<const double> y, double x);

using TraceFn = std::function<double(double t)>;

/// Uncontrolled problem on (a, b) with Dirichlet traces; y0.values lives on
/// build_interval_grid(a, b, y0.values.size()).
Trajectory subdomain_solve(const State& y0, double a, double b, const DiffusionLaw& law, const TraceFn& left,
                           const TraceFn& right, double t_end, const SolverConfig& cfg = {});

}  // namespace mobilectl
