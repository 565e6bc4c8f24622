#include "mobilectl/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mobilectl/nnls.hpp"
#include "mobilectl/norms.hpp"

namespace mobilectl {

using nlohmann::json;

namespace {

double tiny(double t) { return 1e-12 * std::max(1.0, std::abs(t)); }

void require_nonneg(const State& s, const SpatialGrid& grid, const char* what) {
    if (s.values.size() != static_cast<std::size_t>(grid.n())) {
        throw_invalid(std::string(what) + " does not match the grid");
    }
    for (double v : s.values) {
        if (!std::isfinite(v) || v < 0.0) throw_invalid(std::string(what) + " must be finite and nonnegative");
    }
}

json window_json(const Window& w) { return json{{"r", w.r}, {"l", w.l}}; }

SolverConfig with_dt(const SolverConfig& base, double dt) {
    SolverConfig c = base;
    c.dt = dt;
    return c;
}

// h * sum of y^2 over nodes x <= hi.
double cumulative_sq(std::span<const double> y, const SpatialGrid& grid, double hi) {
    double s = 0.0;
    for (int i = 0; i < grid.n(); ++i) {
        if (grid.node(i) <= hi + 1e-12) s += y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
    }
    return grid.h() * s;
}

// 2 int b(x0,t) y_x(x0,t) y(x0,t) dt by trapezoid over the stored states.
double boundary_flux_term(const Trajectory& traj, const FrozenLaw& law, double x0) {
    const SpatialGrid& g = traj.grid;
    const double s = (x0 - g.left()) / g.h();
    const int lo = std::clamp(static_cast<int>(std::floor(s + 1e-9)), 0, g.n());
    auto integrand = [&](const State& st) {
        auto val = [&](int idx) {
            if (idx <= 0 || idx >= g.n() + 1) return 0.0;
            return st.values[static_cast<std::size_t>(idx - 1)];
        };
        const double slope = (val(lo + 1) - val(lo)) / g.h();
        return 2.0 * law(x0, st.time) * slope * interpolate_at(g, st.values, x0);
    };
    double total = 0.0;
    double prev = integrand(traj.states.front());
    for (std::size_t k = 1; k < traj.states.size(); ++k) {
        const double cur = integrand(traj.states[k]);
        total += 0.5 * (prev + cur) * (traj.states[k].time - traj.states[k - 1].time);
        prev = cur;
    }
    return total;
}

// ---------------------------------------------------------------- fitting

// Zero-started responses to many sources at once. Linear frozen law, no
// damping, the solver's midpoint fluxes and the given step end times.
// Y is node-major: Y[i * cols + c].
class BatchPropagator {
public:
    BatchPropagator(const SpatialGrid& grid, const FrozenLaw& law, std::size_t cols)
        : g_(grid), law_(law), cols_(cols), n_(static_cast<std::size_t>(grid.n())), Y_(n_ * cols, 0.0),
          k_(n_ + 1), cp_(n_), den_(n_), d_(n_ * cols) {}

    // One step to t_new; src(i, c) adds the source at the new level.
    template <class Src>
    void step(double t_prev, double t_new, const Src& src) {
        const double dt = t_new - t_prev;
        const double h = g_.h();
        const double ih2 = 1.0 / (h * h);
        for (std::size_t k = 0; k <= n_; ++k) {
            k_[k] = law_(g_.left() + (static_cast<double>(k) + 0.5) * h, t_new);
        }
        for (std::size_t i = 0; i < n_; ++i) {
            const double a = -k_[i] * ih2;
            const double b = 1.0 / dt + (k_[i] + k_[i + 1]) * ih2;
            const double c = -k_[i + 1] * ih2;
            den_[i] = (i == 0) ? b : b - a * cp_[i - 1];
            cp_[i] = c / den_[i];
            double* drow = &d_[i * cols_];
            const double* yrow = &Y_[i * cols_];
            if (i == 0) {
                for (std::size_t j = 0; j < cols_; ++j) drow[j] = (yrow[j] / dt + src(i, j)) / den_[i];
            } else {
                const double* dprev = &d_[(i - 1) * cols_];
                for (std::size_t j = 0; j < cols_; ++j) drow[j] = (yrow[j] / dt + src(i, j) - a * dprev[j]) / den_[i];
            }
        }
        for (std::size_t jj = n_; jj-- > 0;) {
            double* yrow = &Y_[jj * cols_];
            const double* drow = &d_[jj * cols_];
            if (jj + 1 == n_) {
                for (std::size_t j = 0; j < cols_; ++j) yrow[j] = drow[j];
            } else {
                const double* ynext = &Y_[(jj + 1) * cols_];
                for (std::size_t j = 0; j < cols_; ++j) yrow[j] = drow[j] - cp_[jj] * ynext[j];
            }
        }
    }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(n_);
        for (std::size_t i = 0; i < n_; ++i) out[i] = Y_[i * cols_ + c];
        return out;
    }

private:
    const SpatialGrid& g_;
    const FrozenLaw& law_;
    std::size_t cols_;
    std::size_t n_;
    std::vector<double> Y_;
    std::vector<double> k_, cp_, den_, d_;
};

struct FitProblem {
    const SpatialGrid* grid = nullptr;
    const FrozenLaw* law = nullptr;
    Window window;
    double t_on = 0.0;
    double t_off = 0.0;
    std::vector<double> lattice;  // step end times from t_on to the horizon
    std::size_t active_steps = 0; // leading entries inside (t_on, t_off]
    std::vector<double> target;
    double budget = 0.0;
};

struct FitOutcome {
    SampledField table;
    double residual = std::numeric_limits<double>::infinity();
    double target_norm = 0.0;
    int stride = 0;
    int time_pieces = 0;
    int basis = 0;
    int iterations = 0;
    int level = -1;
    bool ok = false;
};

// Breaks t_on + len (1 - 2^-k): pieces shrink toward t_off.
int time_piece_of(double t, double t_on, double len, int pieces) {
    int q = 0;
    for (int k = 1; k < pieces; ++k) {
        if (t > t_on + len * (1.0 - std::ldexp(1.0, -k))) q = k;
    }
    return q;
}

FitOutcome fit_nonneg(const FitProblem& p, const SynthesisConfig& cfg) {
    const SpatialGrid& g = *p.grid;
    const auto n = static_cast<std::size_t>(g.n());
    FitOutcome best;
    best.target_norm = l2_norm(p.target, g.h());
    if (best.target_norm == 0.0) {
        best.residual = 0.0;
        best.ok = true;
        return best;
    }
    const double len = p.t_off - p.t_on;
    for (std::size_t lv = 0; lv < cfg.basis_levels.size(); ++lv) {
        const int s = cfg.basis_levels[lv].stride;
        const int K = cfg.basis_levels[lv].time_pieces;
        const double hw = s * g.h();
        std::vector<int> eligible;
        for (int i = 0; i < g.n(); ++i) {
            const double x = g.node(i);
            if (x - hw >= p.window.lo() - 1e-9 * g.h() && x + hw <= p.window.hi() + 1e-9 * g.h()) {
                eligible.push_back(i);
            }
        }
        std::vector<int> centers;
        for (std::size_t q = 0; q < eligible.size(); q += static_cast<std::size_t>(s)) centers.push_back(eligible[q]);
        if (centers.empty()) continue;

        // Time pieces actually hit by the lattice, compacted.
        std::vector<int> raw(p.active_steps);
        std::vector<int> remap(static_cast<std::size_t>(K), -1);
        int used = 0;
        for (std::size_t k = 0; k < p.active_steps; ++k) {
            raw[k] = time_piece_of(p.lattice[k], p.t_on, len, K);
            if (remap[static_cast<std::size_t>(raw[k])] < 0) remap[static_cast<std::size_t>(raw[k])] = used++;
        }
        std::vector<int> piece_of_step(p.active_steps);
        for (std::size_t k = 0; k < p.active_steps; ++k) piece_of_step[k] = remap[static_cast<std::size_t>(raw[k])];

        const std::size_t nc = centers.size();
        const std::size_t cols = nc * static_cast<std::size_t>(used);
        // hat values, node-major
        std::vector<double> hat(n * nc, 0.0);
        for (std::size_t c = 0; c < nc; ++c) {
            const double xc = g.node(centers[c]);
            for (std::size_t i = 0; i < n; ++i) {
                hat[i * nc + c] = std::max(0.0, 1.0 - std::abs(g.node(static_cast<int>(i)) - xc) / hw);
            }
        }

        BatchPropagator prop(g, *p.law, cols);
        double t_prev = p.t_on;
        for (std::size_t k = 0; k < p.lattice.size(); ++k) {
            const int piece = (k < p.active_steps) ? piece_of_step[k] : -1;
            const std::size_t off = piece >= 0 ? static_cast<std::size_t>(piece) * nc : 0;
            prop.step(t_prev, p.lattice[k], [&](std::size_t i, std::size_t j) {
                if (piece < 0 || j < off || j >= off + nc) return 0.0;
                return hat[i * nc + (j - off)];
            });
            t_prev = p.lattice[k];
        }
        std::vector<std::vector<double>> columns(cols);
        for (std::size_t j = 0; j < cols; ++j) columns[j] = prop.column(j);

        NnlsOptions opts;
        opts.max_iter = cfg.nnls_max_iter;
        opts.target_residual = cfg.nnls_early_fraction * p.budget;
        const NnlsResult r = nnls_projected_gradient(columns, p.target, g.h(), opts);

        if (r.residual < best.residual) {
            SampledField t;
            t.nodes.assign(g.nodes().begin(), g.nodes().end());
            t.times.reserve(p.active_steps + 1);
            t.times.push_back(p.t_on);
            t.values.reserve(p.active_steps + 1);
            for (std::size_t k = 0; k < p.active_steps; ++k) {
                std::vector<double> row(n, 0.0);
                const std::size_t off = static_cast<std::size_t>(piece_of_step[k]) * nc;
                for (std::size_t c = 0; c < nc; ++c) {
                    const double w = r.x[off + c];
                    if (w <= 0.0) continue;
                    for (std::size_t i = 0; i < n; ++i) row[i] += w * hat[i * nc + c];
                }
                if (k == 0) t.values.push_back(row);
                t.times.push_back(p.lattice[k]);
                t.values.push_back(std::move(row));
            }
            best.table = std::move(t);
            best.residual = r.residual;
            best.stride = s;
            best.time_pieces = used;
            best.basis = static_cast<int>(cols);
            best.iterations = r.iterations;
            best.level = static_cast<int>(lv);
        }
        if (best.residual <= p.budget) {
            best.ok = true;
            break;
        }
    }
    return best;
}

// Step end times of consecutive stages, as solve_forward lays them out.
std::vector<double> lattice_of(const std::vector<ControlStage>& stages, std::size_t from, double dt,
                               std::size_t* first_stage_steps) {
    std::vector<double> out;
    for (std::size_t s = from; s < stages.size(); ++s) {
        const auto part = stage_step_times(stages[s].t_start, stages[s].t_end, dt);
        if (s == from && first_stage_steps) *first_stage_steps = part.size();
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

}  // namespace

void validate(const SynthesisConfig& cfg) {
    validate(cfg.solver);
    if (cfg.ladder_max_exponent < 0 || cfg.ladder_max_exponent > 40) throw_invalid("ladder_max_exponent must lie in [0, 40]");
    if (cfg.scan_min_steps < 1) throw_invalid("scan_min_steps must be at least 1");
    if (!(cfg.delta_first_fraction > 0.0 && cfg.delta_first_fraction <= 0.5)) {
        throw_invalid("delta_first_fraction must lie in (0, 0.5]");
    }
    if (!(cfg.delta_ratio > 2.0)) throw_invalid("delta_ratio must exceed 2");
    if (cfg.steps_per_delta < 1) throw_invalid("steps_per_delta must be at least 1");
    if (cfg.basis_levels.empty()) throw_invalid("at least one basis level is needed");
    for (const auto& b : cfg.basis_levels) {
        if (b.stride < 1 || b.time_pieces < 1) throw_invalid("basis levels need stride >= 1 and time_pieces >= 1");
    }
    if (cfg.nnls_max_iter < 1) throw_invalid("nnls_max_iter must be at least 1");
    if (!(cfg.nnls_early_fraction >= 0.0 && cfg.nnls_early_fraction <= 1.0)) {
        throw_invalid("nnls_early_fraction must lie in [0, 1]");
    }
    if (!(cfg.lift_floor_rel > 0.0)) throw_invalid("lift_floor_rel must be positive");
    if (!(cfg.lift_u_max > 0.0)) throw_invalid("lift_u_max must be positive");
    if (!(cfg.lift_drop_tol >= 0.0)) throw_invalid("lift_drop_tol must be nonnegative");
    if (!(cfg.phase_split > 0.0 && cfg.phase_split < 1.0)) throw_invalid("phase_split must lie in (0, 1)");
    if (cfg.margin_cells_min < 1) throw_invalid("margin_cells_min must be at least 1");
}

Trajectory replay_schedule(const State& y0, const DiffusionLaw& law, const ControlSchedule& schedule,
                           const std::vector<double>& stage_dt, const SpatialGrid& grid, const SolverConfig& cfg) {
    if (schedule.empty()) throw_invalid("replay needs a schedule");
    if (stage_dt.size() != schedule.stages().size()) throw_invalid("replay needs one step per stage");
    if (std::abs(y0.time - schedule.t_start()) > tiny(y0.time)) throw_invalid("replay must start at the schedule start");
    Trajectory out;
    out.grid = grid;
    out.law = law;
    out.schedule_id = schedule.id();
    out.states.push_back(y0);
    for (std::size_t k = 0; k < stage_dt.size(); ++k) {
        const ControlStage& s = schedule.stages()[k];
        if (!(stage_dt[k] > 0.0)) throw_invalid("replay steps must be positive");
        if (k == 0) out.dt = stage_dt[k];
        ControlStage one = s;
        one.t_start = out.final().time;
        const Trajectory part =
            solve_forward(out.final(), s.t_end, law, ControlSchedule({one}, schedule.id()), grid, with_dt(cfg, stage_dt[k]));
        out.append(part);
    }
    return out;
}

// ---------------------------------------------------------------- sweep

double sweep_threshold(double eps, int M) {
    if (!(eps > 0.0) || M < 1) throw_invalid("sweep threshold needs eps > 0 and M >= 1");
    return eps * eps / (4.0 * (2.0 * M - 1.0));
}

ControlSchedule SweepPlan::schedule() const {
    std::vector<ControlStage> st;
    for (const auto& r : stages) st.push_back(ControlStage{r.t_start, r.T, r.window, ConstMultiplicative{r.m}});
    return ControlSchedule(std::move(st), "sweep");
}

SweepStageResult sweep_stage(const State& y_in, const Window& window, int j, int M, double eps, const FrozenLaw& law,
                             double T_budget, const SpatialGrid& grid, const SynthesisConfig& cfg) {
    validate(cfg);
    if (M < 1 || j < 1 || j > M) throw_invalid("stage index must satisfy 1 <= j <= M");
    if (!(eps > 0.0)) throw_invalid("eps must be positive");
    require_nonneg(y_in, grid, "stage input");
    const double t0 = y_in.time;
    if (!(T_budget > t0)) throw_invalid("stage starts at or after the time budget");

    SweepStageRecord rec;
    rec.j = j;
    rec.window = window;
    rec.t_start = t0;
    rec.threshold = sweep_threshold(eps, M);
    rec.cumulative_bound = (2.0 * j - 1.0) * rec.threshold;
    const double cum_hi = (j == M) ? 1.0 : std::min(1.0, j * window.l);
    const double span = T_budget - t0;
    const double d0 = default_dt(grid, span, cfg.solver);

    auto finish = [&](Trajectory traj) {
        SweepStageResult out;
        const State& y = traj.final();
        rec.T = y.time;
        rec.window_norm_sq = window_norm_sq(y.values, grid, window.lo(), window.hi());
        rec.cumulative = cumulative_sq(y.values, grid, cum_hi);
        rec.boundary_term = boundary_flux_term(traj, law, window.lo());
        out.record = rec;
        out.y_out = y;
        out.traj = std::move(traj);
        return out;
    };

    if (sup_norm(y_in.values) == 0.0) {
        // Nothing to damp: one step with m = 0.
        const double T = t0 + std::min(d0, 0.5 * span);
        rec.m = 0.0;
        rec.dt = T - t0;
        ControlSchedule s({ControlStage{t0, T, window, ConstMultiplicative{0.0}}}, "sweep");
        return finish(solve_forward(y_in, T, law, s, grid, with_dt(cfg.solver, T - t0)));
    }

    double best = std::numeric_limits<double>::infinity();
    for (int e = 0; e <= cfg.ladder_max_exponent; ++e) {
        const double m = std::ldexp(1.0, e);
        ++rec.candidates_tried;
        double gap = span;
        if (j >= 2) {
            const EnergyConstants c = compute_energy_constants(y_in, grid, law, m, 0.0, span);
            rec.C1 = c.C1;
            if (c.C1 > 0.0) gap = std::min(span, eps * eps / (8.0 * (2.0 * M - 1.0) * c.C1));
            rec.gap_limit = gap;
        }
        const double t_end = t0 + gap;
        const double dt = std::min(d0, gap / cfg.scan_min_steps);
        ControlSchedule s({ControlStage{t0, t_end, window, ConstMultiplicative{m}}}, "sweep");
        Trajectory traj = solve_forward(y_in, t_end, law, s, grid, with_dt(cfg.solver, dt));
        for (std::size_t k = 1; k < traj.states.size(); ++k) {
            const State& y = traj.states[k];
            if (y.time >= T_budget - tiny(T_budget)) break;
            const double wn = window_norm_sq(y.values, grid, window.lo(), window.hi());
            best = std::min(best, wn);
            if (wn > rec.threshold) continue;
            if (cumulative_sq(y.values, grid, cum_hi) > rec.cumulative_bound) continue;
            rec.m = m;
            rec.dt = traj.states[1].time - t0;
            return finish(traj.slice(t0, y.time));
        }
    }
    std::ostringstream os;
    os << "sweep stage " << j << " of " << M << ": no damping up to m = 2^" << cfg.ladder_max_exponent
       << " brings the window norm^2 below " << rec.threshold << " (best " << best << ")";
    throw SynthesisError(ErrorKind::StageInfeasible, os.str(),
                         json{{"stage", j}, {"best_window_norm_sq", best}, {"threshold", rec.threshold}});
}

SweepResult run_sweep(const State& y0, double eps, double l, const FrozenLaw& law, double T_budget,
                      const SpatialGrid& grid, const SynthesisConfig& cfg) {
    validate(cfg);
    require_nonneg(y0, grid, "initial state");
    const int M = window_count(l);
    const auto windows = sweep_window_sequence(l, M);
    SweepResult out;
    out.plan.M = M;
    out.plan.l = l;
    out.plan.eps = eps;
    out.plan.T_budget = T_budget;
    out.plan.t0 = y0.time;
    out.traj.grid = grid;
    out.traj.law = law;
    out.traj.states.push_back(y0);
    State y = y0;
    for (int j = 1; j <= M; ++j) {
        SweepStageResult st;
        try {
            st = sweep_stage(y, windows[static_cast<std::size_t>(j - 1)], j, M, eps, law, T_budget, grid, cfg);
        } catch (const SynthesisError& e) {
            json d = e.details();
            d["partial_plan"] = to_json(out.plan);
            throw SynthesisError(e.kind(), e.what(), d);
        }
        if (j == 1) out.traj.dt = st.record.dt;
        out.traj.append(st.traj);
        out.plan.stages.push_back(st.record);
        y = st.y_out;
    }
    out.plan.final_norm = l2_norm(y.values, grid.h());
    const double tol = kRoundoffTol * std::max(eps, l2_norm(y0.values, grid.h()));
    if (out.plan.final_norm > 0.5 * eps + tol) {
        std::ostringstream os;
        os << "sweep ends with |y| = " << out.plan.final_norm << " > eps/2 = " << 0.5 * eps;
        throw SynthesisError(ErrorKind::StageInfeasible, os.str(), json{{"partial_plan", to_json(out.plan)}});
    }
    out.schedule = out.plan.schedule();
    out.traj.schedule_id = out.schedule.id();
    out.y_at_TM = y;
    return out;
}

json to_json(const SweepPlan& plan) {
    json st = json::array();
    for (const auto& r : plan.stages) {
        st.push_back(json{{"j", r.j},
                          {"window", window_json(r.window)},
                          {"m", r.m},
                          {"t_start", r.t_start},
                          {"T", r.T},
                          {"dt", r.dt},
                          {"window_norm_sq", r.window_norm_sq},
                          {"threshold", r.threshold},
                          {"cumulative", r.cumulative},
                          {"cumulative_bound", r.cumulative_bound},
                          {"gap_limit", r.gap_limit},
                          {"C1", r.C1},
                          {"boundary_term", r.boundary_term},
                          {"candidates_tried", r.candidates_tried}});
    }
    return json{{"M", plan.M},         {"l", plan.l},   {"eps", plan.eps},
                {"T_budget", plan.T_budget}, {"t0", plan.t0}, {"final_norm", plan.final_norm},
                {"stages", st}};
}

// ---------------------------------------------------------------- targets

double smooth_step(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / s);
    const double b = std::exp(-1.0 / (1.0 - s));
    return a / (a + b);
}

TargetDecomposition decompose_target(const State& y_d, double l, double eps, const SpatialGrid& grid,
                                     int margin_cells_min) {
    require_nonneg(y_d, grid, "target");
    if (!(eps > 0.0)) throw_invalid("eps must be positive");
    if (margin_cells_min < 1) throw_invalid("margin_cells_min must be at least 1");
    TargetDecomposition d;
    d.y_d = y_d;
    d.l = l;
    d.M = window_count(l);
    d.eps = eps;
    d.windows = sweep_window_sequence(l, d.M);
    const int M = d.M;
    const auto n = static_cast<std::size_t>(grid.n());
    for (int j = 1; j <= M; ++j) {
        d.piece_lo.push_back((j - 1) * l);
        d.piece_hi.push_back(j == M ? 1.0 : j * l);
        State piece{std::vector<double>(n, 0.0), y_d.time};
        for (std::size_t i = 0; i < n; ++i) {
            const double x = grid.node(static_cast<int>(i));
            const bool in = x >= d.piece_lo.back() - 1e-12 && (j == M || x < d.piece_hi.back() - 1e-12);
            if (in) piece.values[i] = y_d.values[i];
        }
        d.pieces.push_back(std::move(piece));
    }

    // The error grows with the margin, so the smallest admissible one decides.
    const int k = margin_cells_min;
    const double kh = k * grid.h();
    double total = 0.0;
    for (int j = 0; j < M; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        State mol{std::vector<double>(n, 0.0), y_d.time};
        for (std::size_t i = 0; i < n; ++i) {
            if (d.pieces[jj].values[i] == 0.0) continue;
            const double x = grid.node(static_cast<int>(i));
            const double dist = std::min(x - d.piece_lo[jj], d.piece_hi[jj] - x);
            mol.values[i] = d.pieces[jj].values[i] * smooth_step((dist - kh) / kh);
        }
        d.piece_errors.push_back(l2_distance(mol.values, d.pieces[jj].values, grid.h()));
        total += d.piece_errors.back();
        d.mollified.push_back(std::move(mol));
    }
    d.decomposition_error = total;
    d.margin_cells = k;
    if (total > 0.5 * eps) {
        const auto worst = std::max_element(d.piece_errors.begin(), d.piece_errors.end()) - d.piece_errors.begin();
        std::ostringstream os;
        os << "cut-off error " << total << " exceeds eps/2 = " << 0.5 * eps << " with " << k
           << " margin cells; worst piece " << worst + 1 << " on [" << d.piece_lo[static_cast<std::size_t>(worst)]
           << ", " << d.piece_hi[static_cast<std::size_t>(worst)] << ")";
        throw SynthesisError(ErrorKind::InfeasibleDecomposition, os.str(),
                             json{{"worst_piece", worst + 1}, {"piece_errors", d.piece_errors}, {"total", total}});
    }
    return d;
}

// ---------------------------------------------------------------- additive

double additive_phase_dt(const SpatialGrid& grid, double span, int M, const SynthesisConfig& cfg) {
    if (cfg.solver.dt > 0.0) return cfg.solver.dt;
    if (!(span > 0.0) || M < 1) throw_invalid("phase step needs a positive span and M >= 1");
    const double delta_M = cfg.delta_first_fraction * span / std::pow(cfg.delta_ratio, M - 1);
    return std::min({grid.h(), 1e-3 * span, delta_M / cfg.steps_per_delta});
}

AdditiveFit nonneg_additive_control(const Window& window, const State& target, double t0, double t1,
                                    const FrozenLaw& law, const SpatialGrid& grid, double budget,
                                    const SynthesisConfig& cfg) {
    validate(cfg);
    require_nonneg(target, grid, "target");
    if (!(t1 > t0)) throw_invalid("control horizon must satisfy t0 < t1");
    if (!(budget > 0.0)) throw_invalid("budget must be positive");
    for (int i = 0; i < grid.n(); ++i) {
        if (!window.contains(grid.node(i)) && target.values[static_cast<std::size_t>(i)] != 0.0) {
            throw_invalid("target must vanish outside the window");
        }
    }
    const Subinterval sub = make_subinterval(grid, window.lo(), window.hi());
    FitProblem p;
    p.grid = &sub.sub;
    p.law = &law;
    p.window = window;
    p.t_on = t0;
    p.t_off = t1;
    const double dt = cfg.solver.dt > 0.0 ? cfg.solver.dt
                                          : std::min(grid.h(), (t1 - t0) / cfg.steps_per_delta);
    p.lattice = stage_step_times(t0, t1, dt);
    p.active_steps = p.lattice.size();
    p.target = sub.restrict_values(grid, target.values);
    p.budget = budget;
    FitOutcome f = fit_nonneg(p, cfg);
    if (!f.ok) {
        std::ostringstream os;
        os << "nonnegative control reaches residual " << f.residual << " > budget " << budget;
        throw SynthesisError(ErrorKind::ControlInfeasible, os.str(),
                             json{{"best_residual", f.residual}, {"budget", budget}});
    }
    AdditiveFit out;
    if (!f.table.nodes.empty()) out.v = Field(std::move(f.table));
    out.residual = f.residual;
    out.target_norm = f.target_norm;
    out.stride = f.stride;
    out.time_pieces = f.time_pieces;
    out.basis_size = f.basis;
    out.iterations = f.iterations;
    out.level = f.level;
    return out;
}

AdditiveResult additive_sequence(const TargetDecomposition& decomp, double t0, double T, double eps,
                                 const FrozenLaw& law, const SpatialGrid& grid, const SynthesisConfig& cfg) {
    validate(cfg);
    if (!(T > t0)) throw_invalid("additive phase needs T > t0");
    if (!(eps > 0.0)) throw_invalid("eps must be positive");
    const int M = decomp.M;
    if (M < 1 || decomp.windows.size() != static_cast<std::size_t>(M)) throw_invalid("malformed decomposition");
    const double span = T - t0;

    AdditiveResult out;
    AdditivePlan& plan = out.plan;
    plan.t0 = t0;
    plan.T = T;
    plan.budget = eps / (2.0 * M);
    plan.dt = additive_phase_dt(grid, span, M, cfg);
    plan.delta.push_back(cfg.delta_first_fraction * span);
    for (int j = 1; j < M; ++j) plan.delta.push_back(plan.delta.back() / cfg.delta_ratio);

    // Skeleton: idle on w_j until the active slot, active slot, next window.
    std::vector<ControlStage> stages;
    std::vector<std::size_t> active_index;
    double cur = t0;
    for (int j = 1; j <= M; ++j) {
        const auto jj = static_cast<std::size_t>(j - 1);
        const double on = (j < M) ? T - 2.0 * plan.delta[jj] : T - plan.delta[jj];
        const double off = (j < M) ? T - plan.delta[jj] : T;
        const Window& w = decomp.windows[jj];
        if (on > cur + tiny(cur)) stages.push_back(ControlStage{cur, on, w, Idle{}});
        active_index.push_back(stages.size());
        stages.push_back(ControlStage{on, off, w, Idle{}});
        cur = off;
    }

    for (int j = 1; j <= M; ++j) {
        const auto jj = static_cast<std::size_t>(j - 1);
        const std::size_t a = active_index[jj];
        AdditivePiece piece;
        piece.j = j;
        piece.window = decomp.windows[jj];
        piece.t_on = stages[a].t_start;
        piece.t_off = stages[a].t_end;
        const State& target = decomp.mollified[jj];
        piece.target_norm = l2_norm(target.values, grid.h());
        if (piece.target_norm > 0.0) {
            FitProblem p;
            p.grid = &grid;
            p.law = &law;
            p.window = piece.window;
            p.t_on = piece.t_on;
            p.t_off = piece.t_off;
            p.lattice = lattice_of(stages, a, plan.dt, &p.active_steps);
            p.target = target.values;
            p.budget = plan.budget;
            FitOutcome f = fit_nonneg(p, cfg);
            piece.residual = f.residual;
            piece.stride = f.stride;
            piece.time_pieces = f.time_pieces;
            piece.basis_size = f.basis;
            piece.iterations = f.iterations;
            piece.zero = false;
            if (!f.ok) {
                plan.pieces.push_back(piece);
                std::ostringstream os;
                os << "piece " << j << ": nonnegative control reaches residual " << f.residual << " > budget "
                   << plan.budget;
                throw SynthesisError(ErrorKind::ControlInfeasible, os.str(),
                                     json{{"piece", j}, {"best_residual", f.residual}, {"budget", plan.budget},
                                          {"partial_plan", to_json(plan)}});
            }
            stages[a].payload = FieldAdditive{Field(std::move(f.table))};
        }
        plan.achieved_errors.push_back(piece.residual);
        plan.pieces.push_back(piece);
    }

    std::vector<ControlStage> merged;
    for (auto& s : stages) {
        if (!merged.empty() && std::holds_alternative<Idle>(s.payload) &&
            std::holds_alternative<Idle>(merged.back().payload) && merged.back().window == s.window) {
            merged.back().t_end = s.t_end;
        } else {
            merged.push_back(std::move(s));
        }
    }
    out.schedule = ControlSchedule(std::move(merged), "additive");

    std::vector<double> sum(static_cast<std::size_t>(grid.n()), 0.0);
    for (const auto& m : decomp.mollified)
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += m.values[i];
    const State zero{std::vector<double>(sum.size(), 0.0), t0};
    const Trajectory run = solve_forward(zero, T, law, out.schedule, grid, with_dt(cfg.solver, plan.dt));
    plan.remeasured_error = l2_distance(run.final().values, sum, grid.h());
    return out;
}

json to_json(const AdditivePlan& plan) {
    json pieces = json::array();
    for (const auto& p : plan.pieces) {
        pieces.push_back(json{{"j", p.j},
                              {"window", window_json(p.window)},
                              {"t_on", p.t_on},
                              {"t_off", p.t_off},
                              {"target_norm", p.target_norm},
                              {"residual", p.residual},
                              {"stride", p.stride},
                              {"time_pieces", p.time_pieces},
                              {"basis_size", p.basis_size},
                              {"iterations", p.iterations},
                              {"zero", p.zero}});
    }
    return json{{"delta", plan.delta}, {"pieces", pieces}, {"achieved_errors", plan.achieved_errors},
                {"budget", plan.budget}, {"dt", plan.dt}, {"t0", plan.t0}, {"T", plan.T},
                {"remeasured_error", plan.remeasured_error}};
}

// ---------------------------------------------------------------- lifting

LiftResult additive_to_multiplicative(const Trajectory& traj, const ControlSchedule& v_schedule, double floor,
                                      double u_max, double drop_tol) {
    if (traj.empty()) throw_invalid("lifting needs a trajectory");
    if (!(floor > 0.0) || !(u_max > 0.0) || !(drop_tol >= 0.0)) {
        throw_invalid("lifting needs floor > 0, u_max > 0 and drop_tol >= 0");
    }
    const SpatialGrid& g = traj.grid;
    const auto n = static_cast<std::size_t>(g.n());
    LiftResult out;
    double total = 0.0;
    double dropped = 0.0;
    double x_lo = 1.0, x_hi = 0.0, t_lo = std::numeric_limits<double>::infinity(), t_hi = -t_lo;
    std::vector<ControlStage> stages;
    for (const auto& s : v_schedule.stages()) {
        const auto* fa = std::get_if<FieldAdditive>(&s.payload);
        if (!fa) {
            stages.push_back(s);
            continue;
        }
        std::vector<std::size_t> idx;
        for (std::size_t k = 0; k < traj.states.size(); ++k) {
            const double t = traj.states[k].time;
            if (t >= s.t_start - tiny(s.t_start) && t <= s.t_end + tiny(s.t_end)) idx.push_back(k);
        }
        if (idx.size() < 2) throw_invalid("trajectory does not resolve an additive stage");
        SampledField tab;
        tab.nodes.assign(g.nodes().begin(), g.nodes().end());
        for (std::size_t q = 0; q < idx.size(); ++q) {
            const State& st = traj.states[idx[q]];
            const double w = q == 0 ? 0.0 : st.time - traj.states[idx[q - 1]].time;
            std::vector<double> row(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double x = g.node(static_cast<int>(i));
                if (!s.window.contains(x)) continue;
                const double v = fa->v(x, st.time);
                if (v <= 0.0) continue;
                const double contrib = v * v * w * g.h();
                total += contrib;
                const double y = st.values[i];
                if (y >= floor) {
                    double u = v / y;
                    if (u > u_max) {
                        u = u_max;
                        ++out.clamped;
                    }
                    row[i] = u;
                    out.u_max_used = std::max(out.u_max_used, u);
                } else if (contrib > 0.0) {
                    dropped += contrib;
                    x_lo = std::min(x_lo, x);
                    x_hi = std::max(x_hi, x);
                    t_lo = std::min(t_lo, st.time);
                    t_hi = std::max(t_hi, st.time);
                }
            }
            tab.times.push_back(st.time);
            tab.values.push_back(std::move(row));
        }
        // The first row only matters for evaluation between lattice points.
        if (tab.values.size() > 1) tab.values[0] = tab.values[1];
        stages.push_back(ControlStage{s.t_start, s.t_end, s.window, FieldMultiplicative{Field(std::move(tab))}});
    }
    out.dropped_fraction = total > 0.0 ? std::sqrt(dropped / total) : 0.0;
    if (out.dropped_fraction > drop_tol) {
        std::ostringstream os;
        os << "lifting drops " << out.dropped_fraction << " of |v| where y < " << floor << ", in x in [" << x_lo
           << ", " << x_hi << "], t in [" << t_lo << ", " << t_hi << "]";
        throw SynthesisError(ErrorKind::LiftingInfeasible, os.str(),
                             json{{"dropped_fraction", out.dropped_fraction},
                                  {"region", {{"x_lo", x_lo}, {"x_hi", x_hi}, {"t_lo", t_lo}, {"t_hi", t_hi}}}});
    }
    out.schedule = ControlSchedule(std::move(stages), "lifted");
    return out;
}

// ---------------------------------------------------------------- pipeline

PipelineResult synthesize_pipeline(const State& y0, const State& y_d, double eps, double T, double l,
                                   const FrozenLaw& law, const SpatialGrid& grid, const SynthesisConfig& cfg) {
    validate(cfg);
    require_nonneg(y0, grid, "initial state");
    require_nonneg(y_d, grid, "target");
    if (!(eps > 0.0)) throw_invalid("eps must be positive");
    if (!(l > 0.0 && l <= 1.0)) throw_invalid("window length must lie in (0, 1]");
    const double t0 = y0.time;
    if (!(T > t0)) throw_invalid("horizon must satisfy T > t0");
    const double h = grid.h();
    PipelineResult r;

    const double n0 = l2_norm(y0.values, h);
    const double nd = l2_norm(y_d.values, h);
    if (eps > n0 + nd) {
        r.early_return = true;
        r.schedule = ControlSchedule({ControlStage{t0, T, Window(0.0, l), Idle{}}}, "idle");
        r.stage_dt = {default_dt(grid, T - t0, cfg.solver)};
        r.traj = solve_forward(y0, T, law, r.schedule, grid, with_dt(cfg.solver, r.stage_dt[0]));
        r.T_M = t0;
        r.terminal_error = l2_distance(r.traj.final().values, y_d.values, h);
        r.phase2_error = r.terminal_error;
        return r;
    }

    const double T_budget = t0 + cfg.phase_split * (T - t0);
    SweepResult sw = run_sweep(y0, eps, l, law, T_budget, grid, cfg);
    r.sweep = sw.plan;
    r.T_M = sw.y_at_TM.time;
    r.sweep_final_norm = sw.plan.final_norm;
    const int M = sw.plan.M;

    const double dt = additive_phase_dt(grid, T - r.T_M, M, cfg);
    const SolverConfig phase = with_dt(cfg.solver, dt);
    const Trajectory free = solve_forward(sw.y_at_TM, T, law, {}, grid, phase);
    r.free_decay_norm = l2_norm(free.final().values, h);
    std::vector<double> goal = y_d.values;
    for (std::size_t i = 0; i < goal.size(); ++i) goal[i] += free.final().values[i];

    const double eps2 = 0.5 * eps;
    r.decomposition = decompose_target(y_d, l, eps2, grid, cfg.margin_cells_min);
    AdditiveResult add = additive_sequence(r.decomposition, r.T_M, T, eps2, law, grid, cfg);
    r.additive = add.plan;

    const Trajectory add_traj = solve_forward(sw.y_at_TM, T, law, add.schedule, grid, phase);
    r.additive_error = l2_distance(add_traj.final().values, goal, h);

    double y0_max = 0.0;
    for (double v : y0.values) y0_max = std::max(y0_max, v);
    const LiftResult lift =
        additive_to_multiplicative(add_traj, add.schedule, cfg.lift_floor_rel * y0_max, cfg.lift_u_max, cfg.lift_drop_tol);
    r.dropped_fraction = lift.dropped_fraction;
    const Trajectory lifted = solve_forward(sw.y_at_TM, T, law, lift.schedule, grid, phase);
    const double add_norm = l2_norm(add_traj.final().values, h);
    r.lift_defect = add_norm > 0.0 ? l2_distance(lifted.final().values, add_traj.final().values, h) / add_norm : 0.0;
    r.phase2_error = l2_distance(lifted.final().values, goal, h);
    r.terminal_error = l2_distance(lifted.final().values, y_d.values, h);

    r.schedule = compose_schedules(sw.schedule, lift.schedule);
    r.schedule.set_id("pipeline");
    for (const auto& st : sw.plan.stages) r.stage_dt.push_back(st.dt);
    r.stage_dt.resize(r.schedule.stages().size(), dt);
    r.traj = sw.traj;
    r.traj.append(lifted);
    r.traj.schedule_id = r.schedule.id();

    if (!(r.phase2_error < eps2) || !(r.terminal_error < eps)) {
        std::ostringstream os;
        os << "synthesised control misses: phase-2 error " << r.phase2_error << " (needs < " << eps2
           << "), terminal error " << r.terminal_error << " (needs < " << eps << ")";
        throw SynthesisError(ErrorKind::ControlInfeasible, os.str(), to_json(r));
    }
    return r;
}

json to_json(const PipelineResult& r) {
    json j{{"early_return", r.early_return},
           {"T_M", r.T_M},
           {"sweep_final_norm", r.sweep_final_norm},
           {"free_decay_norm", r.free_decay_norm},
           {"phase2_error", r.phase2_error},
           {"additive_error", r.additive_error},
           {"lift_defect", r.lift_defect},
           {"dropped_fraction", r.dropped_fraction},
           {"terminal_error", r.terminal_error},
           {"stage_dt", r.stage_dt}};
    if (!r.early_return) {
        j["sweep"] = to_json(r.sweep);
        j["additive"] = to_json(r.additive);
        j["decomposition"] = json{{"M", r.decomposition.M},
                                  {"margin_cells", r.decomposition.margin_cells},
                                  {"piece_errors", r.decomposition.piece_errors},
                                  {"error", r.decomposition.decomposition_error}};
    }
    return j;
}

// ---------------------------------------------------------------- picard

void validate(const PicardConfig& p) {
    if (!(p.R > 0.0)) throw_invalid("ball radius R must be positive");
    if (!(p.gamma > 0.0)) throw_invalid("gamma must be positive");
    if (p.max_iters < 1) throw_invalid("max_iters must be at least 1");
    if (!(p.fix_tol > 0.0)) throw_invalid("fix_tol must be positive");
    if (!(p.theta > 0.0 && p.theta <= 1.0)) throw_invalid("theta must lie in (0, 1]");
}

FrozenLaw freeze_law(const QuasilinearLaw& a, const Trajectory& z) {
    if (z.empty() || !a.a) throw_invalid("freezing needs a law and a nonempty trajectory");
    const SpatialGrid& g = z.grid;
    const auto n = static_cast<std::size_t>(g.n());
    auto times = std::make_shared<std::vector<double>>();
    auto table = std::make_shared<std::vector<std::vector<double>>>();
    for (const auto& st : z.states) {
        std::vector<double> row(n + 2);
        row[0] = a.a(0.0);
        row[n + 1] = a.a(0.0);
        for (std::size_t i = 0; i < n; ++i) row[i + 1] = a.a(st.values[i]);
        times->push_back(st.time);
        table->push_back(std::move(row));
    }
    const double left = g.left(), h = g.h();
    auto b = [times, table, left, h, n](double x, double t) {
        const auto& ts = *times;
        std::size_t k = 0;
        double wt = 0.0;
        if (ts.size() > 1 && t > ts.front()) {
            if (t >= ts.back()) {
                k = ts.size() - 1;
            } else {
                k = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin()) - 1;
                wt = (t - ts[k]) / (ts[k + 1] - ts[k]);
            }
        }
        const double s = std::clamp((x - left) / h, 0.0, static_cast<double>(n + 1));
        const auto i = std::min(static_cast<std::size_t>(s), n);
        const double wx = s - static_cast<double>(i);
        auto at = [&](std::size_t kk) {
            const auto& row = (*table)[kk];
            return (1.0 - wx) * row[i] + wx * row[std::min(i + 1, n + 1)];
        };
        return wt == 0.0 ? at(k) : (1.0 - wt) * at(k) + wt * at(k + 1);
    };
    const int samples_t = static_cast<int>(std::min<std::size_t>(4 * (z.states.size() - 1), 2000));
    return make_frozen(b, z.t_start(), z.t_end(), 4 * (g.n() + 1), std::max(samples_t, 1));
}

PicardResult picard_quasilinear(const State& y0, const State& y_d, double eps, double T, double l,
                                const QuasilinearLaw& law, const PicardConfig& pcfg, const SpatialGrid& grid,
                                const SynthesisConfig& cfg) {
    validate(pcfg);
    validate(cfg);
    require_nonneg(y0, grid, "initial state");
    State ys = y0;
    for (double& v : ys.values) v *= pcfg.gamma;
    const double t0 = ys.time;
    if (!(T > t0)) throw_invalid("horizon must satisfy T > t0");
    const SolverConfig scfg = with_dt(cfg.solver, default_dt(grid, T - t0, cfg.solver));

    PicardResult out;
    auto history_json = [&] {
        json h = json::array();
        for (const auto& it : out.history) {
            h.push_back(json{{"k", it.k}, {"distance", it.distance}, {"theta", it.theta}, {"sup_u", it.sup_u},
                             {"sup_z", it.sup_z}, {"terminal_error", it.terminal_error}});
        }
        return h;
    };
    auto ball = [&](const Trajectory& y, int k) {
        const double s = y.sup_abs();
        if (s > pcfg.R) {
            std::ostringstream os;
            os << "iterate " << k << " leaves the ball: sup|y| = " << s << " > R = " << pcfg.R;
            throw SynthesisError(ErrorKind::BallViolation, os.str(),
                                 json{{"iterate", k}, {"sup", s}, {"R", pcfg.R}, {"history", history_json()}});
        }
        return s;
    };

    if (const double s0 = sup_norm(ys.values); s0 > pcfg.R) {
        std::ostringstream os;
        os << "scaled data leaves the ball: sup|gamma y0| = " << s0 << " > R = " << pcfg.R;
        throw SynthesisError(ErrorKind::BallViolation, os.str(), json{{"iterate", 0}, {"sup", s0}, {"R", pcfg.R}});
    }
    Trajectory z = solve_forward(ys, T, law, {}, grid, scfg);
    ball(z, 0);
    double theta = pcfg.theta;
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= pcfg.max_iters; ++k) {
        const FrozenLaw frozen = freeze_law(law, z);
        PipelineResult pipe = synthesize_pipeline(ys, y_d, eps, T, l, frozen, grid, cfg);
        Trajectory y = replay_schedule(ys, law, pipe.schedule, pipe.stage_dt, grid, cfg.solver);
        PicardIterate it;
        it.k = k;
        it.distance = y.l2qt_distance(z);
        if (it.distance > prev) theta *= 0.5;
        prev = it.distance;
        it.theta = theta;
        it.sup_z = ball(y, k);
        it.terminal_error = l2_distance(y.final().values, y_d.values, grid.h());
        std::vector<double> times;
        for (const auto& st : y.states) times.push_back(st.time);
        it.sup_u = summarize_controls(pipe.schedule, grid, times).u_sup;
        out.history.push_back(it);
        if (it.distance <= pcfg.fix_tol && it.terminal_error < eps) {
            out.schedule = pipe.schedule;
            out.traj = std::move(y);
            out.last = std::move(pipe);
            out.terminal_error = it.terminal_error;
            return out;
        }
        // z <- z + theta (y - z) on y's lattice
        for (auto& st : y.states) {
            const auto zt = z.at(st.time);
            for (std::size_t i = 0; i < st.values.size(); ++i) st.values[i] = zt[i] + theta * (st.values[i] - zt[i]);
        }
        z = std::move(y);
    }
    std::ostringstream os;
    os << "fixed point not reached in " << pcfg.max_iters << " iterations (last distance " << prev << ")";
    throw SynthesisError(ErrorKind::Nonconvergence, os.str(), json{{"history", history_json()}});
}

json to_json(const PicardResult& r) {
    json h = json::array();
    for (const auto& it : r.history) {
        h.push_back(json{{"k", it.k}, {"distance", it.distance}, {"theta", it.theta}, {"sup_u", it.sup_u},
                         {"sup_z", it.sup_z}, {"terminal_error", it.terminal_error}});
    }
    return json{{"history", h}, {"terminal_error", r.terminal_error}, {"pipeline", to_json(r.last)}};
}

}  // namespace mobilectl
