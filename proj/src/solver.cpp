#include "mobilectl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mobilectl/error.hpp"
#include "mobilectl/norms.hpp"
#include "mobilectl/tridiag.hpp"

namespace mobilectl {

namespace {

// Full nodal vector with Dirichlet ends: Y[0] = left, Y[n+1] = right.
std::vector<double> with_ends(std::span<const double> y, double left, double right) {
    std::vector<double> full(y.size() + 2);
    full.front() = left;
    full.back() = right;
    std::copy(y.begin(), y.end(), full.begin() + 1);
    return full;
}

class StepProblem {
public:
    StepProblem(const State& state, double dt, const DiffusionLaw& law, const ControlSlice& control,
                const SpatialGrid& grid, double left, double right)
        : old_(state.values), dt_(dt), law_(law), c_(control), grid_(grid), left_(left), right_(right),
          t_new_(state.time + dt), n_(static_cast<std::size_t>(grid.n())) {
        if (const auto* fz = std::get_if<FrozenLaw>(&law_)) {
            frozen_coef_.resize(n_ + 1);
            for (std::size_t k = 0; k <= n_; ++k) {
                const double xm = grid_.left() + (static_cast<double>(k) + 0.5) * grid_.h();
                frozen_coef_[k] = (*fz)(xm, t_new_);
            }
        }
    }

    bool linear() const { return !frozen_coef_.empty(); }
    double time() const { return t_new_; }

    double scale() const {
        double s = std::max({sup_norm(old_), std::abs(left_), std::abs(right_)}) / dt_;
        return s + sup_norm(c_.v);
    }

    // Midpoint coefficients for the nodal vector Y (size n+2).
    std::vector<double> coefficients(const std::vector<double>& Y) const {
        if (linear()) return frozen_coef_;
        const auto& ql = std::get<QuasilinearLaw>(law_);
        std::vector<double> k(n_ + 1);
        for (std::size_t j = 0; j <= n_; ++j) k[j] = ql.a(0.5 * (Y[j] + Y[j + 1]));
        return k;
    }

    // Frozen-coefficient matrix A(k) and right side so that A y = rhs.
    void assemble(const std::vector<double>& k, Tridiagonal& A, std::vector<double>& rhs) const {
        const double ih2 = 1.0 / (grid_.h() * grid_.h());
        for (std::size_t i = 0; i < n_; ++i) {
            A.diag[i] = 1.0 / dt_ - c_.u[i] + (k[i] + k[i + 1]) * ih2;
            A.lower[i] = -k[i] * ih2;
            A.upper[i] = -k[i + 1] * ih2;
            rhs[i] = old_[i] / dt_ + c_.v[i];
        }
        rhs[0] += k[0] * ih2 * left_;
        rhs[n_ - 1] += k[n_] * ih2 * right_;
    }

    std::vector<double> residual(const std::vector<double>& y) const {
        const auto Y = with_ends(y, left_, right_);
        const auto k = coefficients(Y);
        const double h = grid_.h();
        std::vector<double> R(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const double flux_r = k[i + 1] * (Y[i + 2] - Y[i + 1]) / h;
            const double flux_l = k[i] * (Y[i + 1] - Y[i]) / h;
            R[i] = (y[i] - old_[i]) / dt_ - (flux_r - flux_l) / h - c_.u[i] * y[i] - c_.v[i];
        }
        return R;
    }

    Tridiagonal jacobian(const std::vector<double>& y) const {
        const auto Y = with_ends(y, left_, right_);
        const auto& ql = std::get<QuasilinearLaw>(law_);
        const double h = grid_.h();
        // dF_k/dY_k and dF_k/dY_{k+1} for each midpoint k.
        std::vector<double> dl(n_ + 1), dr(n_ + 1);
        for (std::size_t j = 0; j <= n_; ++j) {
            const double m = 0.5 * (Y[j] + Y[j + 1]);
            const double a = ql.a(m);
            const double ap = ql.derivative(m);
            const double grad = (Y[j + 1] - Y[j]) / h;
            dl[j] = 0.5 * ap * grad - a / h;
            dr[j] = 0.5 * ap * grad + a / h;
        }
        Tridiagonal J(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            // Unknown i is Y[i+1]; its right flux is midpoint i+1, left flux midpoint i.
            J.diag[i] = 1.0 / dt_ - c_.u[i] - (dl[i + 1] - dr[i]) / h;
            J.upper[i] = -dr[i + 1] / h;
            J.lower[i] = dl[i] / h;
        }
        return J;
    }

    double min_pivot_at(const std::vector<double>& y) const {
        Tridiagonal A(n_);
        std::vector<double> rhs(n_);
        assemble(coefficients(with_ends(y, left_, right_)), A, rhs);
        return thomas_min_pivot(A);
    }

    // One frozen-coefficient update y <- A(y)^{-1} rhs(y).
    std::vector<double> picard_update(const std::vector<double>& y) const {
        Tridiagonal A(n_);
        std::vector<double> rhs(n_);
        assemble(coefficients(with_ends(y, left_, right_)), A, rhs);
        thomas_solve(A, rhs);
        return rhs;
    }

    const std::vector<double>& old() const { return old_; }

private:
    const std::vector<double>& old_;
    double dt_;
    const DiffusionLaw& law_;
    const ControlSlice& c_;
    const SpatialGrid& grid_;
    double left_;
    double right_;
    double t_new_;
    std::size_t n_;
    std::vector<double> frozen_coef_;
};

std::vector<double> solve_step(const StepProblem& p, const SolverConfig& cfg, StepDiagnostics& d) {
    const double scale = p.scale();
    const double target = cfg.newton_tol * scale;
    std::vector<double> y = p.old();
    if (scale == 0.0) {
        std::fill(y.begin(), y.end(), 0.0);
        d.residual = 0.0;
        return y;
    }
    if (p.linear()) {
        y = p.picard_update(y);
        d.newton_iterations = 1;
        d.residual = sup_norm(p.residual(y));
        return y;
    }

    auto R = p.residual(y);
    double res = sup_norm(R);
    for (int it = 0; it < cfg.newton_max_iter && res > target; ++it) {
        auto J = p.jacobian(y);
        std::vector<double> delta(R.size());
        for (std::size_t i = 0; i < R.size(); ++i) delta[i] = -R[i];
        if (!thomas_solve(J, delta).ok) break;
        double step = 1.0;
        bool improved = false;
        for (int halving = 0; halving <= cfg.max_damping_halvings; ++halving) {
            std::vector<double> trial(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) trial[i] = y[i] + step * delta[i];
            auto Rt = p.residual(trial);
            const double rt = sup_norm(Rt);
            if (std::isfinite(rt) && rt < res) {
                y = std::move(trial);
                R = std::move(Rt);
                res = rt;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        d.newton_iterations = it + 1;
        if (!improved) break;
    }
    d.residual = res;
    if (res <= target) return y;

    if (cfg.picard_fallback) {
        d.used_picard = true;
        std::vector<double> z = p.old();
        double rz = sup_norm(p.residual(z));
        for (int it = 0; it < cfg.picard_max_iter && rz > target; ++it) {
            z = p.picard_update(z);
            rz = sup_norm(p.residual(z));
        }
        d.residual = rz;
        if (rz <= target) return z;
    }
    std::ostringstream os;
    os << "implicit step to t = " << p.time() << " did not converge (residual " << d.residual
       << ", target " << target << ")";
    throw NonconvergenceError(os.str(), d.residual, p.time());
}

struct PivotFailure {
    double time;
    double pivot;
};

// Advances over one uniform segment; returns false (and fills failure) if a
// step matrix is not an M-matrix.
template <typename ControlAt, typename TraceAt>
bool integrate_segment(std::vector<State>& out, State current, double t1, int steps,
                       const DiffusionLaw& law, const SpatialGrid& grid, const SolverConfig& cfg,
                       const ControlAt& control_at, const TraceAt& traces_at, PivotFailure& failure) {
    const double t0 = current.time;
    const double dt = (t1 - t0) / steps;
    for (int k = 1; k <= steps; ++k) {
        const double t_new = (k == steps) ? t1 : t0 + k * dt;
        const double step = t_new - current.time;
        const ControlSlice slice = control_at(t_new);
        const auto [left, right] = traces_at(t_new);
        StepProblem prob(current, step, law, slice, grid, left, right);
        StepDiagnostics diag;
        State next;
        next.values = solve_step(prob, cfg, diag);
        next.time = t_new;
        const double pivot = prob.min_pivot_at(next.values);
        if (!(pivot > 0.0)) {
            failure = {t_new, pivot};
            return false;
        }
        out.push_back(next);
        current = std::move(next);
    }
    return true;
}

int step_count(double len, double dt) {
    return std::max(1, static_cast<int>(std::ceil(len / dt - 1e-9)));
}

}  // namespace

std::vector<double> stage_step_times(double t0, double t1, double dt, double m) {
    if (!(t1 > t0) || !(dt > 0.0)) throw_invalid("stage lattice needs t1 > t0 and dt > 0");
    dt /= std::max(1.0, m * dt);
    const int steps = step_count(t1 - t0, dt);
    const double d = (t1 - t0) / steps;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int k = 1; k <= steps; ++k) out.push_back(k == steps ? t1 : t0 + k * d);
    return out;
}

void validate(const SolverConfig& cfg) {
    if (cfg.dt < 0.0 || !std::isfinite(cfg.dt)) throw_invalid("solver dt must be >= 0 (0 = automatic)");
    if (!(cfg.newton_tol > 0.0)) throw_invalid("newton_tol must be positive");
    if (cfg.newton_max_iter < 1) throw_invalid("newton_max_iter must be at least 1");
}

double default_dt(const SpatialGrid& grid, double span, const SolverConfig& cfg) {
    if (cfg.dt > 0.0) return cfg.dt;
    return std::min(grid.h(), 1e-3 * span);
}

State step_implicit(const State& state, double dt, const DiffusionLaw& law, const ControlSlice& control,
                    const SpatialGrid& grid, const SolverConfig& cfg, double left, double right,
                    StepDiagnostics* diag) {
    validate(cfg);
    if (!(dt > 0.0)) throw_invalid("step size must be positive");
    const auto n = static_cast<std::size_t>(grid.n());
    if (state.values.size() != n || control.u.size() != n || control.v.size() != n) {
        throw_invalid("state/control size does not match the grid");
    }
    StepProblem prob(state, dt, law, control, grid, left, right);
    StepDiagnostics local;
    State next;
    next.values = solve_step(prob, cfg, local);
    next.time = state.time + dt;
    local.min_pivot = prob.min_pivot_at(next.values);
    if (diag) *diag = local;
    if (!(local.min_pivot > 0.0)) {
        std::ostringstream os;
        os << "step matrix is not an M-matrix at t = " << next.time << " (min pivot " << local.min_pivot
           << "); reduce dt";
        throw_invalid(os.str());
    }
    return next;
}

Trajectory solve_forward(const State& y0, double t_end, const DiffusionLaw& law,
                         const ControlSchedule& schedule, const SpatialGrid& grid, const SolverConfig& cfg) {
    validate(cfg);
    const double t_start = y0.time;
    if (y0.values.size() != static_cast<std::size_t>(grid.n())) throw_invalid("initial state size mismatch");
    if (!(t_end >= t_start)) throw_invalid("solve span must satisfy t_start <= t_end");
    if (!schedule.empty() && !schedule.covers(t_start, t_end)) {
        std::ostringstream os;
        os << "schedule [" << schedule.t_start() << ", " << schedule.t_end() << "] does not cover ["
           << t_start << ", " << t_end << "]";
        throw_invalid(os.str());
    }
    for (double v : y0.values) {
        if (!std::isfinite(v)) throw_invalid("initial state has non-finite entries");
    }

    Trajectory traj;
    traj.grid = grid;
    traj.law = law;
    traj.schedule_id = schedule.id();
    traj.dt = default_dt(grid, t_end - t_start, cfg);
    traj.states.push_back(y0);
    if (t_end == t_start) return traj;

    std::vector<ControlStage> segments;
    if (schedule.empty()) {
        segments.push_back(ControlStage{t_start, t_end, Window{}, Idle{}});
    } else {
        for (const auto& s : schedule.stages()) {
            const double a = std::max(s.t_start, t_start);
            const double b = std::min(s.t_end, t_end);
            if (b - a > 1e-14 * std::max(1.0, std::abs(b))) {
                ControlStage seg = s;
                seg.t_start = a;
                seg.t_end = b;
                segments.push_back(std::move(seg));
            }
        }
        if (!segments.empty()) segments.back().t_end = t_end;
    }

    auto no_traces = [](double) { return std::pair<double, double>{0.0, 0.0}; };
    for (auto& seg : segments) {
        seg.t_start = traj.states.back().time;
        const double len = seg.t_end - seg.t_start;
        if (len <= 0.0) continue;
        double dt = traj.dt;
        if (const auto* cm = std::get_if<ConstMultiplicative>(&seg.payload)) dt /= std::max(1.0, cm->m * dt);
        int steps = step_count(len, dt);
        auto control_at = [&](double t) { return evaluate_stage(seg, grid, t); };
        for (int attempt = 0;; ++attempt) {
            std::vector<State> out;
            PivotFailure failure{};
            if (integrate_segment(out, traj.states.back(), seg.t_end, steps, law, grid, cfg, control_at, no_traces,
                                  failure)) {
                traj.states.insert(traj.states.end(), out.begin(), out.end());
                break;
            }
            if (attempt >= 30) {
                std::ostringstream os;
                os << "could not restore the M-matrix property at t = " << failure.time << " (pivot "
                   << failure.pivot << ")";
                throw_invalid(os.str());
            }
            steps *= 2;
        }
    }
    return traj;
}

State eigen_oracle(const State& y0, const SpatialGrid& grid, double b_const, double m, double t) {
    if (!(b_const > 0.0)) throw_invalid("eigen oracle needs b > 0");
    if (!(m >= 0.0) || !(t >= 0.0)) throw_invalid("eigen oracle needs m >= 0 and t >= 0");
    const int n = grid.n();
    const double L = grid.length();
    const double pi = std::numbers::pi;
    State out;
    out.time = y0.time + t;
    out.values.assign(static_cast<std::size_t>(n), 0.0);
    for (int k = 1; k <= n; ++k) {
        double c = 0.0;
        for (int i = 1; i <= n; ++i) {
            c += y0.values[static_cast<std::size_t>(i - 1)] * std::sin(k * pi * i / (n + 1));
        }
        c *= 2.0 / (n + 1);
        const double decay = std::exp(-(k * k * pi * pi * b_const / (L * L) + m) * t);
        if (decay == 0.0 || c == 0.0) continue;
        for (int i = 1; i <= n; ++i) {
            out.values[static_cast<std::size_t>(i - 1)] += c * decay * std::sin(k * pi * i / (n + 1));
        }
    }
    return out;
}

double interpolate_at(const SpatialGrid& grid, std::span<const double> y, double x) {
    const double s = (x - grid.left()) / grid.h();  // node i sits at s = i + 1
    if (s <= 0.0 || s >= grid.n() + 1) return 0.0;
    const int lo = static_cast<int>(std::floor(s));
    const double w = s - lo;
    auto val = [&](int idx) {
        if (idx <= 0 || idx >= grid.n() + 1) return 0.0;
        return y[static_cast<std::size_t>(idx - 1)];
    };
    if (w < 1e-12) return val(lo);
    if (w > 1.0 - 1e-12) return val(lo + 1);
    return (1.0 - w) * val(lo) + w * val(lo + 1);
}

Subinterval make_subinterval(const SpatialGrid& grid, double a, double b) {
    if (!(a >= grid.left() && b <= grid.right() && a < b)) throw_invalid("subinterval must lie inside the grid");
    const int n_sub = static_cast<int>(std::lround((b - a) / grid.h())) - 1;
    return Subinterval{build_interval_grid(a, b, std::max(n_sub, 2))};
}

std::vector<double> Subinterval::restrict_values(const SpatialGrid& global, std::span<const double> y) const {
    std::vector<double> out(static_cast<std::size_t>(sub.n()));
    for (int i = 0; i < sub.n(); ++i) out[static_cast<std::size_t>(i)] = interpolate_at(global, y, sub.node(i));
    return out;
}

Trajectory subdomain_solve(const State& y0, double a, double b, const DiffusionLaw& law, const TraceFn& left,
                           const TraceFn& right, double t_end, const SolverConfig& cfg) {
    validate(cfg);
    if (!(a >= 0.0 && b <= 1.0 && a < b)) throw_invalid("subdomain must satisfy 0 <= a < b <= 1");
    const SpatialGrid sub = build_interval_grid(a, b, static_cast<int>(y0.values.size()));
    const double t_start = y0.time;
    if (!(t_end >= t_start)) throw_invalid("solve span must satisfy t_start <= t_end");

    Trajectory traj;
    traj.grid = sub;
    traj.law = law;
    traj.schedule_id = "subdomain";
    traj.dt = default_dt(sub, t_end - t_start, cfg);
    traj.states.push_back(y0);
    if (t_end == t_start) return traj;

    auto traces = [&](double t) {
        const double g0 = left ? left(t) : 0.0;
        const double g1 = right ? right(t) : 0.0;
        if (!std::isfinite(g0) || !std::isfinite(g1)) throw_invalid("boundary traces must be finite");
        return std::pair<double, double>{g0, g1};
    };
    const ControlSlice zero = ControlSlice::zeros(sub.n());
    auto control_at = [&](double) { return zero; };
    int steps = step_count(t_end - t_start, traj.dt);
    for (int attempt = 0;; ++attempt) {
        std::vector<State> out;
        PivotFailure failure{};
        if (integrate_segment(out, y0, t_end, steps, law, sub, cfg, control_at, traces, failure)) {
            traj.states.insert(traj.states.end(), out.begin(), out.end());
            break;
        }
        if (attempt >= 30) throw_invalid("could not restore the M-matrix property on the subdomain");
        steps *= 2;
    }
    return traj;
}

}  // namespace mobilectl
