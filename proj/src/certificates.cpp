#include "mobilectl/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "mobilectl/error.hpp"
#include "mobilectl/norms.hpp"

namespace mobilectl {

double discretization_tolerance(double h, double dt, double scale) {
    return kToleranceFactor * (kSpaceErrorConst * h * h + kTimeErrorConst * dt) * std::abs(scale);
}

// ---------------------------------------------------------------- digest

void Digest::bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
        h_ ^= c[i];
        h_ *= 1099511628211ull;
    }
}

Digest& Digest::add(double v) {
    if (v == 0.0) v = 0.0;  // fold -0
    bytes(&v, sizeof v);
    return *this;
}

Digest& Digest::add(std::int64_t v) {
    bytes(&v, sizeof v);
    return *this;
}

Digest& Digest::add(std::span<const double> v) {
    add(static_cast<std::int64_t>(v.size()));
    for (double x : v) add(x);
    return *this;
}

Digest& Digest::add(const std::string& s) {
    add(static_cast<std::int64_t>(s.size()));
    bytes(s.data(), s.size());
    return *this;
}

Digest& Digest::add(const Trajectory& traj) {
    add(traj.grid.left()).add(traj.grid.right()).add(static_cast<std::int64_t>(traj.grid.n()));
    add(traj.schedule_id);
    for (const auto& s : traj.states) add(s.time).add(s.values);
    return *this;
}

std::string Digest::hex() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h_;
    return os.str();
}

// ---------------------------------------------------------------- reports

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::Inapplicable: return "inapplicable";
    }
    return "?";
}

bool Measurement::holds() const {
    if (!std::isfinite(value)) return false;
    return strict ? value < bound + tolerance : value <= bound + tolerance;
}

void CertificateReport::finalize() {
    bool ok = true;
    for (const auto& m : measured) ok = ok && m.holds();
    verdict = ok ? Verdict::Pass : Verdict::Fail;
}

void CertificateReport::inapplicable(std::string why) {
    verdict = Verdict::Inapplicable;
    note = std::move(why);
}

double CertificateReport::margin() const {
    if (measured.empty()) return 0.0;
    double m = std::numeric_limits<double>::infinity();
    for (const auto& x : measured) m = std::min(m, x.margin());
    return m;
}

namespace {
const Measurement* tightest(const std::vector<Measurement>& ms) {
    const Measurement* best = nullptr;
    for (const auto& m : ms)
        if (!best || m.margin() < best->margin()) best = &m;
    return best;
}
}  // namespace

double CertificateReport::bound() const {
    const auto* m = tightest(measured);
    return m ? m->bound : 0.0;
}

double CertificateReport::tolerance() const {
    const auto* m = tightest(measured);
    return m ? m->tolerance : 0.0;
}

std::optional<double> CertificateReport::diagnostic(const std::string& key) const {
    for (const auto& [k, v] : diagnostics)
        if (k == key) return v;
    return std::nullopt;
}

nlohmann::json report_to_json(const CertificateReport& r) {
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& m : r.measured) {
        ms.push_back({{"quantity", m.quantity},
                      {"value", m.value},
                      {"bound", m.bound},
                      {"tolerance", m.tolerance},
                      {"strict", m.strict},
                      {"margin", m.margin()},
                      {"holds", m.holds()}});
    }
    nlohmann::json diag = nlohmann::json::object();
    for (const auto& [k, v] : r.diagnostics) diag[k] = v;
    return {{"schema", kReportSchema},   {"name", r.name},         {"inputs_digest", r.inputs_digest},
            {"verdict", to_string(r.verdict)}, {"margin", r.margin()}, {"bound", r.bound()},
            {"tolerance", r.tolerance()}, {"measured", std::move(ms)}, {"diagnostics", std::move(diag)},
            {"note", r.note}};
}

std::string report_csv_header() { return "name,margin,bound,verdict"; }

std::string report_csv_row(const CertificateReport& r) {
    std::ostringstream os;
    os << std::setprecision(17) << r.name << ',' << r.margin() << ',' << r.bound() << ',' << to_string(r.verdict);
    return os.str();
}

// ---------------------------------------------------------------- controls

namespace {

// u and v at the nodes without the sign checks of evaluate_stage.
void raw_payload(const ControlStage& s, const SpatialGrid& grid, double t, std::vector<double>& u,
                 std::vector<double>& v) {
    const auto n = static_cast<std::size_t>(grid.n());
    u.assign(n, 0.0);
    v.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = grid.node(static_cast<int>(i));
        if (!s.window.contains(x)) continue;
        if (const auto* cm = std::get_if<ConstMultiplicative>(&s.payload)) {
            u[i] = -cm->m;
        } else if (const auto* fm = std::get_if<FieldMultiplicative>(&s.payload)) {
            u[i] = fm->u(x, t);
        } else if (const auto* fa = std::get_if<FieldAdditive>(&s.payload)) {
            v[i] = fa->v(x, t);
        }
    }
}

}  // namespace

ControlSummary summarize_controls(const ControlSchedule& schedule, const SpatialGrid& grid,
                                  std::span<const double> times) {
    ControlSummary out;
    if (schedule.empty() || times.empty()) return out;
    std::vector<double> samples;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        for (int q = 0; q < kSamplingRefinement; ++q) {
            samples.push_back(times[k] + (times[k + 1] - times[k]) * q / kSamplingRefinement);
        }
    }
    samples.push_back(times.back());

    out.u_max = -std::numeric_limits<double>::infinity();
    out.u_min = std::numeric_limits<double>::infinity();
    out.v_min = std::numeric_limits<double>::infinity();
    out.v_max = -std::numeric_limits<double>::infinity();
    std::vector<double> u, v, u_first, u_prev;
    const ControlStage* prev_stage = nullptr;
    double t_prev = 0.0;
    for (double t : samples) {
        if (t < schedule.t_start() - 1e-12 || t > schedule.t_end() + 1e-12) continue;
        const double tc = std::clamp(t, schedule.t_start(), schedule.t_end());
        const auto& stage = schedule.active(tc);
        raw_payload(stage, grid, tc, u, v);
        ++out.samples;
        for (std::size_t i = 0; i < u.size(); ++i) {
            out.u_max = std::max(out.u_max, u[i]);
            out.u_min = std::min(out.u_min, u[i]);
            out.v_min = std::min(out.v_min, v[i]);
            out.v_max = std::max(out.v_max, v[i]);
        }
        if (u_first.empty()) {
            u_first = u;
        } else if (u != u_first) {
            out.u_time_independent = false;
        }
        if (prev_stage == &stage && tc > t_prev) {
            for (std::size_t i = 0; i < u.size(); ++i) {
                out.ut_sup = std::max(out.ut_sup, std::abs(u[i] - u_prev[i]) / (tc - t_prev));
            }
        }
        prev_stage = &stage;
        u_prev = u;
        t_prev = tc;
    }
    if (out.samples == 0) return ControlSummary{};
    out.u_sup = std::max(std::abs(out.u_max), std::abs(out.u_min));
    return out;
}

// ---------------------------------------------------------------- constants

std::vector<double> discrete_flux_divergence(std::span<const double> y, const SpatialGrid& grid,
                                             const FrozenLaw& law, double t) {
    const int n = grid.n();
    const double h = grid.h();
    std::vector<double> flux(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) {
        const double yl = k == 0 ? 0.0 : y[static_cast<std::size_t>(k - 1)];
        const double yr = k == n ? 0.0 : y[static_cast<std::size_t>(k)];
        const double xm = grid.left() + (k + 0.5) * h;
        flux[static_cast<std::size_t>(k)] = law(xm, t) * (yr - yl) / h;
    }
    std::vector<double> out(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (flux[i + 1] - flux[i]) / h;
    return out;
}

double boundary_slope(std::span<const double> y, double h) {
    if (y.empty()) return 0.0;
    if (y.size() == 1) return y[0] / h;
    return (4.0 * y[0] - y[1]) / (2.0 * h);
}

EnergyConstants compute_energy_constants(const State& y0, const SpatialGrid& grid, const FrozenLaw& law,
                                         double u_sup, double ut_sup, double T) {
    if (!(law.rho > 0.0)) throw_invalid("energy constants need rho > 0");
    if (!(T >= 0.0)) throw_invalid("energy constants need a nonnegative horizon");
    const double rho = law.rho;
    const double h = grid.h();
    const double t0 = y0.time;
    const auto& y = y0.values;
    const int n = grid.n();

    EnergyConstants c;
    c.horizon = T;
    c.y0_sup = sup_norm(y);
    const double y0_sq = l2_norm_sq(y, h);
    c.K1 = law.bt_sup / rho;
    c.K2 = u_sup * u_sup * y0_sq;

    double grad_b = 0.0;
    double pmax = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= n; ++k) {
        const double yl = k == 0 ? 0.0 : y[static_cast<std::size_t>(k - 1)];
        const double yr = k == n ? 0.0 : y[static_cast<std::size_t>(k)];
        const double s = (yr - yl) / h;
        grad_b += h * law(grid.left() + (k + 0.5) * h, t0) * s * s;
        pmax = std::max(pmax, s >= 0.0 ? s * std::exp(std::max(yl, yr)) : s * std::exp(std::min(yl, yr)));
    }
    c.K3 = (c.K2 + grad_b) / rho;
    c.K4 = (law.bt_sup * law.bt_sup + ut_sup * ut_sup) / rho;
    c.beta = law.bx_sup / rho;
    c.y0p_exp_max = pmax;
    c.bernstein = std::exp(1.0 + c.beta) * pmax;
    c.bernstein_M = pmax * rho / (rho + law.bx_sup) * std::exp(c.beta);
    c.bernstein_proof = c.bernstein_M * std::numbers::e * (1.0 + c.beta);

    const auto div = discrete_flux_divergence(y, grid, law, t0);
    c.time_derivative = std::sqrt(2.0 * (l2_norm_sq(div, h) + c.K2) + c.K4 * c.K3 * T * std::exp(c.K1 * T));
    c.C2 = law.b0_sup * c.bernstein + c.time_derivative;
    c.C1 = c.y0_sup * c.C2;
    return c;
}

EnergyConstants compute_energy_constants(const State& y0, const SpatialGrid& grid, const FrozenLaw& law,
                                         const Field& u, double T) {
    const int samples = kSamplingRefinement * 64;
    double u_sup = 0.0, ut_sup = 0.0;
    std::vector<double> prev(static_cast<std::size_t>(grid.n()));
    for (int k = 0; k <= samples; ++k) {
        const double t = y0.time + T * k / samples;
        for (int i = 0; i < grid.n(); ++i) {
            const double val = u(grid.node(i), t);
            u_sup = std::max(u_sup, std::abs(val));
            if (k > 0 && T > 0.0) {
                ut_sup = std::max(ut_sup, std::abs(val - prev[static_cast<std::size_t>(i)]) / (T / samples));
            }
            prev[static_cast<std::size_t>(i)] = val;
        }
    }
    return compute_energy_constants(y0, grid, law, u_sup, ut_sup, T);
}

// ---------------------------------------------------------------- checks

namespace {

std::vector<double> state_times(const Trajectory& traj) {
    std::vector<double> t;
    t.reserve(traj.size());
    for (const auto& s : traj.states) t.push_back(s.time);
    return t;
}

double max_step(const Trajectory& traj) {
    double m = 0.0;
    for (std::size_t k = 1; k < traj.size(); ++k) m = std::max(m, traj.states[k].time - traj.states[k - 1].time);
    return m;
}

double min_of(std::span<const double> y) {
    double m = std::numeric_limits<double>::infinity();
    for (double v : y) m = std::min(m, v);
    return y.empty() ? 0.0 : m;
}

std::string digest_of(const std::string& name, const Trajectory& traj, std::initializer_list<double> extra = {}) {
    Digest d;
    d.add(name).add(traj);
    for (double x : extra) d.add(x);
    return d.hex();
}

void add_sampling(CertificateReport& r, const ControlSummary& cs) {
    r.diagnostics.emplace_back("sampling_refinement", kSamplingRefinement);
    r.diagnostics.emplace_back("control_samples", cs.samples);
}

}  // namespace

CertificateReport check_nonnegativity(const Trajectory& traj, const ControlSchedule& schedule) {
    CertificateReport r;
    r.name = "nonnegativity";
    if (traj.empty()) {
        r.inapplicable("empty trajectory");
        return r;
    }
    r.inputs_digest = digest_of(r.name, traj);
    if (min_of(traj.initial().values) < 0.0) {
        r.inapplicable("initial data has negative values");
        return r;
    }
    const auto times = state_times(traj);
    const auto cs = summarize_controls(schedule, traj.grid, times);
    add_sampling(r, cs);
    if (cs.samples > 0 && cs.v_min < 0.0) {
        r.inapplicable("additive control takes negative values");
        return r;
    }
    const double scale = traj.sup_abs();
    const double mn = traj.min_value();
    r.measured.push_back({"-min y", -mn, 0.0, kRoundoffTol * scale});
    r.diagnostics.emplace_back("min", mn);
    r.diagnostics.emplace_back("scale", scale);
    r.finalize();
    return r;
}

CertificateReport check_sup_bound(const Trajectory& traj, const ControlSchedule& schedule) {
    CertificateReport r;
    r.name = "sup_bound";
    if (traj.empty()) {
        r.inapplicable("empty trajectory");
        return r;
    }
    r.inputs_digest = digest_of(r.name, traj);
    const auto cs = summarize_controls(schedule, traj.grid, state_times(traj));
    add_sampling(r, cs);
    if (cs.samples > 0 && (cs.v_max > 0.0 || cs.v_min < 0.0)) {
        r.inapplicable("additive control present");
        return r;
    }
    if (cs.samples > 0 && cs.u_max > 0.0) {
        r.inapplicable("u > 0 somewhere");
        return r;
    }
    const double sup0 = sup_norm(traj.initial().values);
    const double sup = traj.sup_abs();
    r.measured.push_back({"sup |y|", sup, sup0, kRoundoffTol * std::max(sup0, sup)});
    r.finalize();
    return r;
}

CertificateReport check_strict_positivity(const Trajectory& traj, double t_probe, const ControlSchedule& schedule) {
    CertificateReport r;
    r.name = "strict_positivity";
    if (traj.empty()) {
        r.inapplicable("empty trajectory");
        return r;
    }
    r.inputs_digest = digest_of(r.name, traj, {t_probe});
    const auto& y0 = traj.initial().values;
    if (min_of(y0) < 0.0) {
        r.inapplicable("initial data has negative values");
        return r;
    }
    if (sup_norm(y0) == 0.0) {
        r.inapplicable("initial data vanishes identically");
        return r;
    }
    if (!(t_probe > traj.t_start()) || t_probe > traj.t_end() + 1e-12) {
        r.inapplicable("probe time outside (t_start, t_end]");
        return r;
    }
    const auto cs = summarize_controls(schedule, traj.grid, state_times(traj));
    add_sampling(r, cs);
    if (cs.samples > 0) {
        if (cs.v_min < 0.0) {
            r.inapplicable("additive control takes negative values");
            return r;
        }
        if (cs.u_max > 0.0) {
            r.inapplicable("u > 0 somewhere");
            return r;
        }
        if (!cs.u_time_independent) {
            r.inapplicable("u depends on time");
            return r;
        }
    }
    const auto y = traj.at(t_probe);
    const double mn = min_of(y);
    const double thr = kPositivityThreshold * traj.sup_abs();
    r.measured.push_back({"threshold - min y(t_probe)", thr - mn, 0.0, 0.0, true});
    r.diagnostics.emplace_back("min", mn);
    r.diagnostics.emplace_back("threshold", thr);
    r.diagnostics.emplace_back("t_probe", t_probe);
    r.finalize();
    return r;
}

CertificateReport check_comparison(const Trajectory& lower, const Trajectory& upper) {
    CertificateReport r;
    r.name = "comparison";
    if (lower.empty() || upper.empty()) {
        r.inapplicable("empty trajectory");
        return r;
    }
    Digest d;
    d.add(r.name).add(lower).add(upper);
    r.inputs_digest = d.hex();
    if (lower.size() != upper.size() || lower.grid.n() != upper.grid.n()) {
        r.inapplicable("trajectories live on different lattices");
        return r;
    }
    for (std::size_t k = 0; k < lower.size(); ++k) {
        if (lower.states[k].time != upper.states[k].time) {
            r.inapplicable("trajectories live on different time lattices");
            return r;
        }
    }
    if (lower.schedule_id != upper.schedule_id) {
        r.inapplicable("trajectories use different controls");
        return r;
    }
    const auto& a = lower.initial().values;
    const auto& b = upper.initial().values;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) {
            r.inapplicable("initial data are not ordered");
            return r;
        }
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < lower.size(); ++k) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            worst = std::max(worst, lower.states[k].values[i] - upper.states[k].values[i]);
        }
    }
    const double scale = std::max(lower.sup_abs(), upper.sup_abs());
    r.measured.push_back({"max (y1 - y2)", worst, 0.0, kRoundoffTol * scale});
    r.finalize();
    return r;
}

CertificateReport check_decay(const State& y0, const SpatialGrid& grid, const FrozenLaw& law, double T,
                              const SolverConfig& cfg) {
    CertificateReport r;
    r.name = "decay";
    if (!(T > 0.0)) throw_invalid("decay check needs T > 0");
    const auto traj = solve_forward(y0, y0.time + T, law, ControlSchedule{}, grid, cfg);
    r.inputs_digest = digest_of(r.name, traj, {T, law.b_sup});
    const double h = grid.h();
    const double lhs = l2_distance(traj.final().values, y0.values, h);
    const double grad = gradient_norm(y0.values, h);
    const double rhs = std::sqrt(law.b_sup * T) * grad;
    const double scale = std::max(l2_norm(y0.values, h), grad);
    r.measured.push_back({"|y(T) - y0|", lhs, rhs, discretization_tolerance(h, max_step(traj), scale)});
    r.diagnostics.emplace_back("lhs", lhs);
    r.diagnostics.emplace_back("rhs", rhs);
    r.diagnostics.emplace_back("gradient_norm", grad);
    r.diagnostics.emplace_back("b_sup", law.b_sup);
    r.finalize();
    return r;
}

CertificateReport check_time_derivative_bound(const Trajectory& traj, const EnergyConstants& constants,
                                              const ControlSchedule& schedule) {
    CertificateReport r;
    r.name = "time_derivative_bound";
    if (traj.size() < 2) {
        r.inapplicable("trajectory has no steps");
        return r;
    }
    r.inputs_digest = digest_of(r.name, traj, {constants.time_derivative});
    const auto cs = summarize_controls(schedule, traj.grid, state_times(traj));
    add_sampling(r, cs);
    if (cs.samples > 0 && cs.u_max > 0.0) {
        r.inapplicable("u > 0 somewhere");
        return r;
    }
    if (cs.samples > 0 && (cs.v_max > 0.0 || cs.v_min < 0.0)) {
        r.inapplicable("additive control present");
        return r;
    }
    const double h = traj.grid.h();
    double worst = 0.0;
    double worst_t = traj.t_start();
    std::vector<double> d(static_cast<std::size_t>(traj.grid.n()));
    for (std::size_t k = 1; k < traj.size(); ++k) {
        const auto& a = traj.states[k - 1];
        const auto& b = traj.states[k];
        const double dt = b.time - a.time;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = (b.values[i] - a.values[i]) / dt;
        const double nrm = l2_norm(d, h);
        if (nrm > worst) {
            worst = nrm;
            worst_t = b.time;
        }
    }
    const double bound = constants.time_derivative;
    r.measured.push_back({"max_t |y_t|", worst, bound, discretization_tolerance(h, max_step(traj), bound)});
    r.diagnostics.emplace_back("argmax_t", worst_t);
    r.diagnostics.emplace_back("K1", constants.K1);
    r.diagnostics.emplace_back("K2", constants.K2);
    r.diagnostics.emplace_back("K3", constants.K3);
    r.diagnostics.emplace_back("K4", constants.K4);
    r.finalize();
    return r;
}

CertificateReport check_bernstein_boundary(const Trajectory& traj, const FrozenLaw& law,
                                           const ControlSchedule& schedule) {
    CertificateReport r;
    r.name = "bernstein_boundary";
    if (traj.empty()) {
        r.inapplicable("empty trajectory");
        return r;
    }
    r.inputs_digest = digest_of(r.name, traj, {law.bx_sup, law.rho});
    const auto& y0 = traj.initial().values;
    if (min_of(y0) < 0.0) {
        r.inapplicable("initial data has negative values");
        return r;
    }
    const auto cs = summarize_controls(schedule, traj.grid, state_times(traj));
    add_sampling(r, cs);
    if (cs.samples > 0 && cs.u_max > 0.0) {
        r.inapplicable("u > 0 somewhere");
        return r;
    }
    if (cs.samples > 0 && (cs.v_max > 0.0 || cs.v_min < 0.0)) {
        r.inapplicable("additive control present");
        return r;
    }
    const auto& grid = traj.grid;
    const double h = grid.h();
    const auto c = compute_energy_constants(traj.initial(), grid, law, 0.0, 0.0, traj.t_end() - traj.t_start());
    const double bound = std::max(0.0, c.bernstein);

    double smax = -std::numeric_limits<double>::infinity();
    double smin = std::numeric_limits<double>::infinity();
    double w_interior = -std::numeric_limits<double>::infinity();
    const double w_boundary = c.bernstein_M * std::numbers::e;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const auto& y = traj.states[k].values;
        const double s = boundary_slope(y, h);
        smax = std::max(smax, s);
        smin = std::min(smin, s);
        if (k == 0) continue;
        for (int i = 0; i < grid.n(); ++i) {
            const double x = grid.node(i);
            const double w = std::exp(y[static_cast<std::size_t>(i)]) +
                             c.bernstein_M * std::exp(1.0 - (1.0 + c.beta) * x) - 1.0;
            w_interior = std::max(w_interior, w);
        }
    }
    const double tol = discretization_tolerance(h, max_step(traj), std::max(bound, sup_norm(y0)));
    r.measured.push_back({"max_t y_x(0,t)", smax, bound, tol});
    r.measured.push_back({"-min_t y_x(0,t)", -smin, 0.0, tol});
    if (traj.size() > 1 && c.bernstein_M > 0.0) {
        r.measured.push_back({"max interior w - max boundary w", w_interior - w_boundary, 0.0,
                              discretization_tolerance(h, max_step(traj), w_boundary)});
    }
    r.diagnostics.emplace_back("bound_stated", c.bernstein);
    r.diagnostics.emplace_back("bound_proof", c.bernstein_proof);
    r.diagnostics.emplace_back("M", c.bernstein_M);
    r.diagnostics.emplace_back("max_y0p_exp_y0", c.y0p_exp_max);
    r.diagnostics.emplace_back("initial_slope", boundary_slope(y0, h));
    r.finalize();
    return r;
}

std::vector<Field> random_control_batch(std::uint64_t seed, int count, double amplitude, const SpatialGrid& grid,
                                        double t0, double t1, int pieces) {
    if (count < 0 || pieces < 1) throw_invalid("control batch needs count >= 0 and pieces >= 1");
    if (!(t1 > t0)) throw_invalid("control batch needs t1 > t0");
    std::mt19937_64 rng(seed);
    const double unit = 1.0 / 9007199254740992.0;  // 2^-53
    std::vector<Field> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int c = 0; c < count; ++c) {
        auto table = std::make_shared<std::vector<std::vector<double>>>(static_cast<std::size_t>(pieces));
        for (auto& row : *table) {
            row.resize(static_cast<std::size_t>(grid.n()));
            for (auto& v : row) v = -amplitude + 2.0 * amplitude * (static_cast<double>(rng() >> 11) * unit);
        }
        out.emplace_back([table, grid, t0, t1, pieces](double x, double t) {
            const int p = std::clamp(static_cast<int>(std::floor((t - t0) / (t1 - t0) * pieces)), 0, pieces - 1);
            return (*table)[static_cast<std::size_t>(p)][static_cast<std::size_t>(grid.nearest_index(x))];
        });
    }
    return out;
}

WitnessResult noncontrollability_witness(const State& y0, const SpatialGrid& grid, const DiffusionLaw& law,
                                         const Window& omega, double probe_lo, double probe_hi,
                                         const std::vector<Field>& controls, double T, const SolverConfig& cfg) {
    if (!(probe_lo < probe_hi) || probe_lo < 0.0 || probe_hi > 1.0) throw_invalid("probe must be a subinterval of (0,1)");
    if (probe_lo < omega.hi() && omega.lo() < probe_hi) {
        throw_invalid("probe interval overlaps the control window");
    }
    if (!(T > 0.0)) throw_invalid("witness needs T > 0");
    WitnessResult out;
    auto& r = out.report;
    r.name = "noncontrollability_witness";
    const auto sub = make_subinterval(grid, probe_lo, probe_hi);
    out.probe_grid = sub.sub;
    const double hs = sub.sub.h();

    State y0_sub{sub.restrict_values(grid, y0.values), y0.time};
    Digest d;
    d.add(r.name).add(y0.values).add(omega.r).add(omega.l).add(probe_lo).add(probe_hi).add(T);
    d.add(static_cast<std::int64_t>(controls.size()));
    r.inputs_digest = d.hex();
    if (sup_norm(y0_sub.values) == 0.0 || min_of(y0.values) < 0.0) {
        r.inapplicable("initial data must be nonnegative and not vanish on the probe");
        return out;
    }
    SolverConfig c = cfg;
    if (c.dt == 0.0) c.dt = default_dt(grid, T, cfg);
    auto zero = [](double) { return 0.0; };
    const auto env = subdomain_solve(y0_sub, probe_lo, probe_hi, law, zero, zero, y0.time + T, c);
    out.envelope = env.final();
    out.obstruction = l2_norm(out.envelope.values, hs);
    if (const auto* fz = std::get_if<FrozenLaw>(&law); fz && fz->constant) {
        const auto exact = eigen_oracle(y0_sub, sub.sub, fz->constant_value, 0.0, T);
        out.oracle_obstruction = l2_norm(exact.values, hs);
        r.diagnostics.emplace_back("oracle_obstruction", out.oracle_obstruction);
    }
    r.diagnostics.emplace_back("obstruction", out.obstruction);

    const double scale = sup_norm(y0.values);
    double worst = -std::numeric_limits<double>::infinity();
    double worst_dt = c.dt;
    for (const auto& u : controls) {
        const ControlSchedule sched({ControlStage{y0.time, y0.time + T, omega, FieldMultiplicative{u}}});
        const auto traj = solve_forward(y0, y0.time + T, law, sched, grid, c);
        worst_dt = std::max(worst_dt, max_step(traj));
        const auto yp = sub.restrict_values(grid, traj.final().values);
        double gap = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < yp.size(); ++i) gap = std::max(gap, out.envelope.values[i] - yp[i]);
        const bool dominated = gap <= discretization_tolerance(grid.h(), c.dt, scale) + kRoundoffTol * scale;
        out.dominated += dominated ? 1 : 0;
        ++out.total;
        worst = std::max(worst, gap);
    }
    if (out.total > 0) {
        r.measured.push_back({"max (envelope - y(T)) on probe", worst, 0.0,
                              discretization_tolerance(grid.h(), c.dt, scale) + kRoundoffTol * scale});
    }
    r.measured.push_back({"-obstruction", -out.obstruction, 0.0, 0.0, true});
    r.diagnostics.emplace_back("dominated", out.dominated);
    r.diagnostics.emplace_back("controls", out.total);
    r.diagnostics.emplace_back("largest_step", worst_dt);
    r.finalize();
    return out;
}

double lipschitz_constant_sharp(double L, double rho) {
    return L / (std::numbers::pi * std::sqrt(2.0 * rho));
}

double lipschitz_constant_simple(double L, double rho) { return L / (rho * std::numbers::pi); }

CertificateReport check_control_to_state_lipschitz(const SpatialGrid& grid, const Window& omega,
                                                   const FrozenLaw& law, const Field& v,
                                                   const std::vector<Field>& perturbed, double T,
                                                   const SolverConfig& cfg) {
    CertificateReport r;
    r.name = "control_to_state_lipschitz";
    if (!(T > 0.0)) throw_invalid("lipschitz check needs T > 0");
    if (!(law.rho > 0.0)) throw_invalid("lipschitz check needs rho > 0");
    const auto sub = make_subinterval(grid, omega.lo(), omega.hi());
    const auto& g = sub.sub;
    const double h = g.h();
    SolverConfig c = cfg;
    if (c.dt == 0.0) c.dt = default_dt(g, T, cfg);
    const State zero{std::vector<double>(static_cast<std::size_t>(g.n()), 0.0), 0.0};
    auto run = [&](const Field& f) {
        const ControlSchedule s({ControlStage{0.0, T, omega, FieldAdditive{f}}});
        return solve_forward(zero, T, law, s, g, c);
    };
    const auto base = run(v);
    Digest d;
    d.add(r.name).add(omega.r).add(omega.l).add(T).add(law.rho).add(base);

    const double bound = lipschitz_constant_sharp(omega.l, law.rho);
    double worst = 0.0;
    int used = 0;
    for (const auto& vk : perturbed) {
        const auto traj = run(vk);
        d.add(traj);
        double dv_sq = 0.0;
        for (std::size_t k = 1; k < traj.size(); ++k) {
            const double t = traj.states[k].time;
            const double dt = t - traj.states[k - 1].time;
            double s = 0.0;
            for (int i = 0; i < g.n(); ++i) {
                const double x = g.node(i);
                const double diff = vk(x, t) - v(x, t);
                s += diff * diff;
            }
            dv_sq += dt * h * s;
        }
        if (dv_sq == 0.0) continue;
        const double dy = l2_distance(traj.final().values, base.final().values, h);
        worst = std::max(worst, dy / std::sqrt(dv_sq));
        ++used;
    }
    r.inputs_digest = d.hex();
    if (used == 0) {
        r.inapplicable("no perturbation changes the control");
        return r;
    }
    r.measured.push_back({"max |dy(T)| / |dv|", worst, bound, discretization_tolerance(h, c.dt, bound)});
    r.diagnostics.emplace_back("constant_sharp", bound);
    r.diagnostics.emplace_back("constant_simple", lipschitz_constant_simple(omega.l, law.rho));
    r.diagnostics.emplace_back("calibration", lipschitz_constant_simple(omega.l, law.rho) / bound);
    r.diagnostics.emplace_back("perturbations", used);
    r.finalize();
    return r;
}

}  // namespace mobilectl
