#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "mobilectl/certificates.hpp"
#include "mobilectl/control.hpp"
#include "mobilectl/error.hpp"
#include "mobilectl/grid.hpp"
#include "mobilectl/law.hpp"
#include "mobilectl/solver.hpp"
#include "mobilectl/state.hpp"

namespace mobilectl {

/// Synthesis failure carrying whatever was built before it (partial plan,
/// best residual, iterate history).
class SynthesisError : public Error {
public:
    SynthesisError(ErrorKind kind, const std::string& what, nlohmann::json details = {})
        : Error(kind, what), details_(std::move(details)) {}
    const nlohmann::json& details() const noexcept { return details_; }

private:
    nlohmann::json details_;
};

/// Basis resolution for the nonnegative least-squares fits: hat functions
/// centred every `stride` nodes, `time_pieces` piecewise-constant pieces
/// graded geometrically toward the end of the active interval.
struct BasisLevel {
    int stride = 1;
    int time_pieces = 10;
};

struct SynthesisConfig {
    SolverConfig solver;
    /// m ladder {1, 2, 4, ..., 2^ladder_max_exponent}.
    int ladder_max_exponent = 20;
    /// Minimum number of lattice points scanned per stage.
    int scan_min_steps = 64;
    double delta_first_fraction = 0.25;  // delta_1 = fraction * phase span
    double delta_ratio = 2.5;            // delta_j = delta_{j-1} / ratio
    int steps_per_delta = 256;           // phase-2 dt <= delta_M / steps_per_delta
    std::vector<BasisLevel> basis_levels{{4, 6}, {2, 8}, {1, 10}};
    int nnls_max_iter = 20000;
    /// Stop a fit once its residual is below this fraction of the budget.
    double nnls_early_fraction = 0.5;
    double lift_floor_rel = 1e-6;  // floor = lift_floor_rel * max(y0)
    double lift_u_max = 1e6;
    /// Largest admissible share of |v|_{L2(Q)} dropped below the floor.
    double lift_drop_tol = 1e-3;
    double phase_split = 0.5;  // T_M <= t0 + phase_split * (T - t0)
    int margin_cells_min = 2;
};

void validate(const SynthesisConfig& cfg);

/// Solves stage by stage, stage k with its own step stage_dt[k] (damped
/// stages are never refined further because the steps recorded by the
/// synthesis already respect 1/m).
Trajectory replay_schedule(const State& y0, const DiffusionLaw& law, const ControlSchedule& schedule,
                           const std::vector<double>& stage_dt, const SpatialGrid& grid,
                           const SolverConfig& cfg = {});

// ---------------------------------------------------------------- sweep

struct SweepStageRecord {
    int j = 0;
    Window window;
    double m = 0.0;
    double t_start = 0.0;
    double T = 0.0;
    double dt = 0.0;  // realised step
    double window_norm_sq = 0.0;
    double threshold = 0.0;
    double cumulative = 0.0;        // h sum_{x_i <= min(jl,1)} y(T_j)^2
    double cumulative_bound = 0.0;  // (2j-1) threshold
    double gap_limit = 0.0;         // j >= 2 only
    double C1 = 0.0;                // j >= 2 only
    double boundary_term = 0.0;     // 2 int b y_x y at the window's left end
    int candidates_tried = 0;
};

struct SweepPlan {
    int M = 0;
    double l = 0.0;
    double eps = 0.0;
    double T_budget = 0.0;
    double t0 = 0.0;
    std::vector<SweepStageRecord> stages;
    double final_norm = 0.0;

    ControlSchedule schedule() const;
};

struct SweepStageResult {
    SweepStageRecord record;
    State y_out;
    Trajectory traj;  // [t_start, T_j]
};

/// Window-norm threshold eps^2 / (4 (2M - 1)).
double sweep_threshold(double eps, int M);

SweepStageResult sweep_stage(const State& y_in, const Window& window, int j, int M, double eps, const FrozenLaw& law,
                             double T_budget, const SpatialGrid& grid, const SynthesisConfig& cfg = {});

struct SweepResult {
    SweepPlan plan;
    State y_at_TM;
    Trajectory traj;
    ControlSchedule schedule;
};

SweepResult run_sweep(const State& y0, double eps, double l, const FrozenLaw& law, double T_budget,
                      const SpatialGrid& grid, const SynthesisConfig& cfg = {});

nlohmann::json to_json(const SweepPlan& plan);

// ---------------------------------------------------------------- targets

struct TargetDecomposition {
    State y_d;
    double l = 0.0;
    int M = 0;
    double eps = 0.0;
    std::vector<Window> windows;       // control windows (sweep sequence)
    std::vector<double> piece_lo, piece_hi;  // restriction intervals
    std::vector<State> pieces;
    std::vector<State> mollified;
    std::vector<double> piece_errors;
    double decomposition_error = 0.0;
    int margin_cells = 0;
};

/// Smooth step: 0 for s <= 0, 1 for s >= 1, C-infinity in between.
double smooth_step(double s);

TargetDecomposition decompose_target(const State& y_d, double l, double eps, const SpatialGrid& grid,
                                     int margin_cells_min = 2);

// ---------------------------------------------------------------- additive

struct AdditiveFit {
    Field v;
    double residual = 0.0;
    double target_norm = 0.0;
    int stride = 0;
    int time_pieces = 0;
    int basis_size = 0;
    int iterations = 0;
    int level = -1;
};

/// Nonnegative v on `window` x (t0, t1) steering zero data towards `target`
/// (full-grid values supported inside the window) on the window subproblem
/// with zero traces. Throws control-infeasible when no basis level reaches
/// `budget`.
AdditiveFit nonneg_additive_control(const Window& window, const State& target, double t0, double t1,
                                    const FrozenLaw& law, const SpatialGrid& grid, double budget,
                                    const SynthesisConfig& cfg = {});

struct AdditivePiece {
    int j = 0;
    Window window;
    double t_on = 0.0;
    double t_off = 0.0;
    double target_norm = 0.0;
    double residual = 0.0;
    int stride = 0;
    int time_pieces = 0;
    int basis_size = 0;
    int iterations = 0;
    bool zero = true;
};

struct AdditivePlan {
    std::vector<double> delta;
    std::vector<AdditivePiece> pieces;
    std::vector<double> achieved_errors;
    double budget = 0.0;  // per piece, eps / (2M)
    double dt = 0.0;
    double t0 = 0.0;
    double T = 0.0;
    /// |y~(T) - sum mollified| re-measured by one solve of the full schedule.
    double remeasured_error = 0.0;
};

struct AdditiveResult {
    AdditivePlan plan;
    ControlSchedule schedule;
};

/// Phase-2 step: min(h, 1e-3 span, delta_M / steps_per_delta) unless the
/// solver config fixes dt.
double additive_phase_dt(const SpatialGrid& grid, double span, int M, const SynthesisConfig& cfg);

AdditiveResult additive_sequence(const TargetDecomposition& decomp, double t0, double T, double eps,
                                 const FrozenLaw& law, const SpatialGrid& grid, const SynthesisConfig& cfg = {});

nlohmann::json to_json(const AdditivePlan& plan);

// ---------------------------------------------------------------- lifting

struct LiftResult {
    ControlSchedule schedule;
    double dropped_fraction = 0.0;
    double u_max_used = 0.0;
    int clamped = 0;
};

/// u = v / y on the trajectory's lattice where y >= floor, clamped to [0, u_max].
LiftResult additive_to_multiplicative(const Trajectory& traj, const ControlSchedule& v_schedule, double floor,
                                      double u_max, double drop_tol = 1e-3);

// ---------------------------------------------------------------- pipeline

struct PipelineResult {
    ControlSchedule schedule;
    Trajectory traj;
    bool early_return = false;
    double T_M = 0.0;
    SweepPlan sweep;
    TargetDecomposition decomposition;
    AdditivePlan additive;
    double sweep_final_norm = 0.0;  // |y_M(T_M)|
    double free_decay_norm = 0.0;   // |y^_1(T)|
    double phase2_error = 0.0;      // |y(T) - (y_d + y^_1(T))|
    double additive_error = 0.0;    // same for the additive run before lifting
    double lift_defect = 0.0;       // |y_lift(T) - y_add(T)| / |y_add(T)|
    double dropped_fraction = 0.0;
    double terminal_error = 0.0;    // |y(T) - y_d|
    /// Step of every schedule stage, for replay_schedule.
    std::vector<double> stage_dt;
};

PipelineResult synthesize_pipeline(const State& y0, const State& y_d, double eps, double T, double l,
                                   const FrozenLaw& law, const SpatialGrid& grid, const SynthesisConfig& cfg = {});

nlohmann::json to_json(const PipelineResult& r);

// ---------------------------------------------------------------- picard

struct PicardConfig {
    double R = 1.0;
    double gamma = 1.0;
    int max_iters = 5;
    double fix_tol = 1e-4;
    double theta = 1.0;
};

void validate(const PicardConfig& p);

struct PicardIterate {
    int k = 0;
    double distance = 0.0;
    double theta = 1.0;
    double sup_u = 0.0;
    double sup_z = 0.0;
    double terminal_error = 0.0;
};

struct PicardResult {
    ControlSchedule schedule;
    Trajectory traj;  // true quasilinear dynamics under `schedule`
    std::vector<PicardIterate> history;
    PipelineResult last;
    double terminal_error = 0.0;
};

/// b(x,t) = a(z(x,t)), bilinear in the trajectory's nodes (with the zero
/// boundary values) and times.
FrozenLaw freeze_law(const QuasilinearLaw& a, const Trajectory& z);

PicardResult picard_quasilinear(const State& y0, const State& y_d, double eps, double T, double l,
                                const QuasilinearLaw& law, const PicardConfig& pcfg, const SpatialGrid& grid,
                                const SynthesisConfig& cfg = {});

nlohmann::json to_json(const PicardResult& r);

}  // namespace mobilectl
