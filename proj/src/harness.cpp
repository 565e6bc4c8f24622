#include "mobilectl/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mobilectl/norms.hpp"
#include "mobilectl/schedule_io.hpp"
#include "mobilectl/solver.hpp"
#include "mobilectl/synthesis.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mobilectl {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

namespace {

std::string fixed(double v, int digits = 2) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
    return std::string(buf, p);
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + p.string() + "'");
    out << text;
    if (!out) throw Error(ErrorKind::Io, "write failed for '" + p.string() + "'");
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void add_report(RunArtifact& art, CertificateReport r, const std::string& stage = "-") {
    for (const auto& m : r.measured) {
        art.margins.push_back({stage, r.name, m.quantity, m.value, m.bound + m.tolerance, m.margin()});
    }
    art.reports.push_back(std::move(r));
}

CertificateReport make_report(std::string name, std::vector<Measurement> ms) {
    CertificateReport r;
    r.name = std::move(name);
    r.measured = std::move(ms);
    r.finalize();
    return r;
}

Window static_window(const ExperimentConfig& c) { return Window(c.window_lo, c.window_hi - c.window_lo); }

// Single-stage schedule for solve/certify; empty when no control is given.
ControlSchedule static_schedule(const ExperimentConfig& c) {
    if (c.u.empty() && c.v.empty()) return {};
    ControlStage s;
    s.t_start = c.t0;
    s.t_end = c.T;
    s.window = static_window(c);
    if (!c.u.empty()) {
        const Expr u = c.u;
        if (u.constant() && u() <= 0.0) s.payload = ConstMultiplicative{-u()};
        else s.payload = FieldMultiplicative{Field([u](double x, double t) { return u(x, t); })};
    } else {
        const Expr v = c.v;
        s.payload = FieldAdditive{Field([v](double x, double t) { return v(x, t); })};
    }
    return ControlSchedule({s}, "static");
}

// u of the static schedule as a field on the whole domain
Field static_u(const ExperimentConfig& c) {
    if (c.u.empty()) return {};
    const Expr u = c.u;
    const Window w = static_window(c);
    return Field([u, w](double x, double t) { return w.contains(x) ? u(x, t) : 0.0; });
}

double roundoff(double scale) { return kRoundoffTol * std::max(scale, 1.0); }

// Lemma-style stage checks on one damped sweep stage.
void certify_sweep_stages(RunArtifact& art, const std::vector<SweepStageRecord>& stages, const Trajectory& traj,
                          const FrozenLaw& law, const ControlSchedule& schedule, double eps) {
    for (const auto& s : stages) {
        const std::string tag = std::to_string(s.j);
        std::vector<Measurement> ms;
        ms.push_back({"window |y(T_j)|^2", s.window_norm_sq, s.threshold, 0.0});
        ms.push_back({"cumulative |y(T_j)|^2 on (0, jl)", s.cumulative, s.cumulative_bound, 0.0});
        if (s.j >= 2) ms.push_back({"T_j - t_j (gap rule)", s.T - s.t_start, s.gap_limit, 1e-12 * s.gap_limit});
        add_report(art, make_report("sweep_stage_" + tag, std::move(ms)), tag);

        const auto slice = traj.slice(s.t_start, s.T);
        if (slice.size() < 2) continue;
        const auto c = compute_energy_constants(slice.initial(), traj.grid, law, s.m, 0.0, s.T - s.t_start);
        auto td = check_time_derivative_bound(slice, c, schedule);
        td.name += "_stage_" + tag;
        add_report(art, std::move(td), tag);
        auto bb = check_bernstein_boundary(slice, law, schedule);
        bb.name += "_stage_" + tag;
        add_report(art, std::move(bb), tag);
        art.stage_marks.push_back(s.t_start);
        art.stage_marks.push_back(s.T);
    }
    if (!stages.empty()) {
        const int M = static_cast<int>(stages.size());
        art.norm_levels.emplace_back("eps/2", 0.5 * eps);
        art.norm_levels.emplace_back("sqrt(eps^2/(4(2M-1)))", std::sqrt(sweep_threshold(eps, M)));
    }
}

const FrozenLaw& frozen_of(const BuiltExperiment& b, const char* experiment) {
    if (b.quasilinear) {
        throw Error(ErrorKind::Config, std::string(experiment) + " needs a frozen law b(x,t), not a(y)");
    }
    return b.frozen;
}

// ---------------------------------------------------------------- experiments

void run_solve(RunArtifact& art, const ExperimentConfig& c, const BuiltExperiment& b, std::string& stage,
               bool suite) {
    stage = "solve";
    art.schedule = static_schedule(c);
    art.traj = solve_forward(b.y0, c.T, b.law, art.schedule, b.grid, b.solver);
    art.terminal_error = -1.0;
    art.details["final_norm"] = l2_norm(art.traj.final().values, b.grid.h());
    art.details["dt"] = art.traj.dt;
    art.details["steps"] = art.traj.size() - 1;

    stage = "certificates";
    add_report(art, check_nonnegativity(art.traj, art.schedule));
    add_report(art, check_sup_bound(art.traj, art.schedule));

    if (c.oracle) {
        CertificateReport r;
        r.name = "eigen_oracle";
        const Field u = static_u(c);
        const bool whole = c.window_lo <= 0.0 && c.window_hi >= 1.0;
        const bool constant_u = c.u.empty() || (c.u.constant() && whole);
        if (b.quasilinear || !b.frozen.constant || !c.v.empty() || !constant_u) {
            r.inapplicable("oracle needs constant b, no source and u constant on (0,1)");
            art.reports.push_back(std::move(r));
        } else {
            const double m = c.u.empty() ? 0.0 : -c.u();
            const double scale = std::max(sup_norm(b.y0.values), 1e-300);
            std::vector<double> times = c.oracle_times.empty() ? std::vector<double>{c.T} : c.oracle_times;
            std::string csv = "t,error,tolerance\n";
            json rows = json::array();
            for (double t : times) {
                if (t < c.t0 || t > c.T) throw Error(ErrorKind::Config, "solve.oracle_times must lie in [t0, T]");
                const auto y = art.traj.at(t);
                const auto exact = eigen_oracle(b.y0, b.grid, b.frozen.constant_value, m, t - c.t0);
                const double err = l2_distance(y, exact.values, b.grid.h());
                const double tol = discretization_tolerance(b.grid.h(), art.traj.dt, scale);
                r.measured.push_back({"|y - oracle| at t=" + format_double(t), err, tol, 0.0});
                csv += format_double(t) + "," + format_double(err) + "," + format_double(tol) + "\n";
                rows.push_back({{"t", t}, {"error", err}, {"tolerance", tol}});
            }
            r.finalize();
            add_report(art, std::move(r));
            art.details["oracle"] = rows;
            art.tables.emplace_back("oracle.csv", csv);
            if (!rows.empty()) art.terminal_error = rows.back()["error"].get<double>();
        }
    }
    if (!suite) return;

    const double span = c.T - c.t0;
    const double tp = c.t_probe > 0.0 ? c.t_probe : c.T;
    add_report(art, check_strict_positivity(art.traj, tp, art.schedule));
    State half = b.y0;
    for (auto& v : half.values) v *= 0.5;
    const auto lower = solve_forward(half, c.T, b.law, art.schedule, b.grid, b.solver);
    add_report(art, check_comparison(lower, art.traj));
    if (b.quasilinear) return;
    if (art.schedule.empty()) add_report(art, check_decay(b.y0, b.grid, b.frozen, span, b.solver));
    const auto k = compute_energy_constants(b.y0, b.grid, b.frozen, static_u(c), span);
    add_report(art, check_time_derivative_bound(art.traj, k, art.schedule));
    add_report(art, check_bernstein_boundary(art.traj, b.frozen, art.schedule));
    if (!c.v.empty()) {
        const Expr v = c.v;
        const auto perturbed = random_control_batch(c.seed, std::min(c.count, 5), c.amplitude, b.grid, 0.0, span,
                                                    c.pieces);
        add_report(art, check_control_to_state_lipschitz(b.grid, static_window(c), b.frozen,
                                                         Field([v](double x, double t) { return v(x, t); }),
                                                         perturbed, span, b.solver));
    }
}

void run_sweep_experiment(RunArtifact& art, const ExperimentConfig& c, const BuiltExperiment& b,
                          std::string& stage) {
    const auto& law = frozen_of(b, "sweep");
    const double T_budget = c.T_budget > 0.0 ? c.T_budget : c.t0 + c.synthesis.phase_split * (c.T - c.t0);
    stage = "sweep synthesis";
    const auto r = run_sweep(b.y0, c.eps, c.l, law, T_budget, b.grid, c.synthesis);
    art.traj = r.traj;
    art.schedule = r.schedule;
    art.details["sweep"] = to_json(r.plan);
    art.details["T_budget"] = T_budget;
    art.terminal_error = r.plan.final_norm;

    stage = "certificates";
    const double scale = sup_norm(b.y0.values);
    certify_sweep_stages(art, r.plan.stages, r.traj, law, r.schedule, c.eps);
    add_report(art, make_report("sweep_final", {{"|y(T_M)|", r.plan.final_norm, 0.5 * c.eps, roundoff(scale)}}));
}

void run_pipeline_experiment(RunArtifact& art, const ExperimentConfig& c, const BuiltExperiment& b,
                             std::string& stage) {
    const auto& law = frozen_of(b, "pipeline");
    stage = "pipeline synthesis";
    const auto r = synthesize_pipeline(b.y0, b.y_d, c.eps, c.T, c.l, law, b.grid, c.synthesis);
    art.traj = r.traj;
    art.schedule = r.schedule;
    art.details["pipeline"] = to_json(r);
    art.terminal_error = r.terminal_error;

    stage = "certificates";
    const double scale = std::max(sup_norm(b.y0.values), sup_norm(b.y_d.values));
    add_report(art, make_report("terminal_error", {{"|y(T) - y_d|", r.terminal_error, c.eps, 0.0, true}}));
    if (!r.early_return) {
        add_report(art, make_report("phase_budgets",
                                    {{"|y(T_M)|", r.sweep_final_norm, 0.5 * c.eps, roundoff(scale)},
                                     {"|y(T) - (y_d + free decay)|", r.phase2_error, 0.5 * c.eps, 0.0},
                                     {"|free decay(T)| - |y(T_M)|", r.free_decay_norm - r.sweep_final_norm, 0.0,
                                      roundoff(scale)}}));
        certify_sweep_stages(art, r.sweep.stages, r.traj, law, r.schedule, c.eps);

        std::vector<Measurement> pieces;
        for (const auto& p : r.additive.pieces) {
            if (p.zero) continue;
            pieces.push_back({"piece " + std::to_string(p.j) + " residual", p.residual, r.additive.budget, 0.0});
            art.margins.push_back({std::to_string(p.j), "additive_pieces", "residual", p.residual, r.additive.budget,
                                   r.additive.budget - p.residual});
        }
        auto ap = make_report("additive_pieces", std::move(pieces));
        if (ap.measured.empty()) ap.inapplicable("every piece is zero");
        art.reports.push_back(std::move(ap));

        double u_min = 0.0;
        bool lifted = false;
        for (const auto& s : r.schedule.stages()) {
            if (const auto* fm = std::get_if<FieldMultiplicative>(&s.payload); fm && fm->u.table()) {
                u_min = lifted ? std::min(u_min, fm->u.table()->min_value()) : fm->u.table()->min_value();
                lifted = true;
            }
        }
        auto lift = make_report("lifting", {{"dropped share of |v|", r.dropped_fraction, c.synthesis.lift_drop_tol,
                                             0.0},
                                            {"-min lifted u", -u_min, 0.0, 0.0}});
        lift.diagnostics.emplace_back("lift_defect", r.lift_defect);
        art.reports.push_back(std::move(lift));
        art.stage_marks.push_back(r.T_M);
    }
    add_report(art, check_nonnegativity(art.traj, art.schedule));
    art.norm_levels.emplace_back("eps", c.eps);
}

void run_picard_experiment(RunArtifact& art, const ExperimentConfig& c, const BuiltExperiment& b,
                           std::string& stage) {
    if (!b.quasilinear) throw Error(ErrorKind::Config, "picard needs a quasilinear law a(y)");
    stage = "picard iteration";
    const auto r = picard_quasilinear(b.y0, b.y_d, c.eps, c.T, c.l, b.quasi, c.picard, b.grid, c.synthesis);
    art.traj = r.traj;
    art.schedule = r.schedule;
    art.details["picard"] = to_json(r);
    art.terminal_error = r.terminal_error;

    stage = "certificates";
    const auto& last = r.history.back();
    double sup_z = 0.0;
    for (const auto& it : r.history) sup_z = std::max(sup_z, it.sup_z);
    add_report(art, make_report("picard_convergence",
                                {{"iterate distance", last.distance, c.picard.fix_tol, 0.0},
                                 {"iterations", static_cast<double>(r.history.size()),
                                  static_cast<double>(c.picard.max_iters), 0.0}}));
    add_report(art, make_report("ball", {{"sup |z|", sup_z, c.picard.R, 0.0}}));
    add_report(art, make_report("terminal_error", {{"|y(T) - y_d|", r.terminal_error, c.eps, 0.0, true}}));
    add_report(art, check_nonnegativity(art.traj, art.schedule));
    art.norm_levels.emplace_back("eps", c.eps);
}

void run_witness_experiment(RunArtifact& art, const ExperimentConfig& c, const BuiltExperiment& b,
                            std::string& stage) {
    stage = "control batch";
    const Window omega(c.omega_lo, c.omega_hi - c.omega_lo);
    const auto controls = random_control_batch(c.seed, c.count, c.amplitude, b.grid, c.t0, c.T, c.pieces);
    stage = "witness";
    const auto w = noncontrollability_witness(b.y0, b.grid, b.law, omega, c.probe_lo, c.probe_hi, controls,
                                              c.T - c.t0, b.solver);
    // representative trajectory: the first control of the batch
    ControlStage s{c.t0, c.T, omega, FieldMultiplicative{controls.front()}};
    art.schedule = ControlSchedule({s}, "witness-0");
    art.traj = solve_forward(b.y0, c.T, b.law, art.schedule, b.grid, b.solver);
    art.details["obstruction"] = w.obstruction;
    art.details["oracle_obstruction"] = number_or_null(w.oracle_obstruction >= 0.0 ? w.oracle_obstruction : NAN);
    art.details["dominated"] = w.dominated;
    art.details["total"] = w.total;
    art.details["seed"] = c.seed;

    std::string csv = "x,envelope\n";
    for (int i = 0; i < w.probe_grid.n(); ++i) {
        csv += format_double(w.probe_grid.node(i)) + "," + format_double(w.envelope.values[static_cast<std::size_t>(i)]) +
               "\n";
    }
    art.tables.emplace_back("envelope.csv", csv);
    add_report(art, w.report);
}

}  // namespace

// ---------------------------------------------------------------- artifact

bool RunArtifact::all_passed() const {
    if (failed) return false;
    return std::none_of(reports.begin(), reports.end(), [](const auto& r) { return r.verdict == Verdict::Fail; });
}

int RunArtifact::exit_code() const {
    if (failed) {
        // library argument checks only trip on inputs the config allowed through
        if (error_kind == ErrorKind::Config || error_kind == ErrorKind::InvalidArgument) return kExitConfig;
        return Error(error_kind, "").is_synthesis_failure() ? kExitInfeasible : kExitInternal;
    }
    return all_passed() ? kExitPass : kExitCertificateFail;
}

json RunArtifact::summary() const {
    json certs = json::array();
    for (const auto& r : reports) {
        certs.push_back({{"name", r.name}, {"verdict", to_string(r.verdict)}, {"margin", r.margin()}});
    }
    json tr = json::object();
    tr["states"] = traj.size();
    if (!traj.empty()) {
        tr["t_start"] = traj.t_start();
        tr["t_end"] = traj.t_end();
        tr["final_norm"] = l2_norm(traj.final().values, traj.grid.h());
        tr["digest"] = Digest().add(traj).hex();
    }
    const int code = exit_code();
    json s = {{"schema", kSummarySchema},
              {"experiment", to_string(kind)},
              {"status", failed ? "failed" : code == kExitPass ? "pass" : "certificate_fail"},
              {"exit_code", code},
              {"terminal_error", terminal_error >= 0.0 ? json(terminal_error) : json(nullptr)},
              {"all_passed", all_passed()},
              {"certificates", std::move(certs)},
              {"trajectory", std::move(tr)},
              {"schedule_id", schedule.id()},
              {"details", details}};
    if (failed) {
        s["error"] = {{"kind", to_string(error_kind)}, {"stage", failed_stage}, {"message", error}};
    }
    return s;
}

std::string trajectory_csv(const Trajectory& traj, std::size_t max_rows) {
    std::string out = "t";
    const int n = traj.grid.n();
    for (int i = 1; i <= n; ++i) out += ",y_" + std::to_string(i);
    out += '\n';
    if (traj.empty()) return out;
    const std::size_t N = traj.size();
    const std::size_t stride = max_rows == 0 ? 1 : std::max<std::size_t>(1, (N - 1 + max_rows - 1) / max_rows);
    auto row = [&](const State& s) {
        out += format_double(s.time);
        for (double v : s.values) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    };
    for (std::size_t k = 0; k < N; k += stride) row(traj.states[k]);
    if ((N - 1) % stride != 0) row(traj.states.back());
    return out;
}

// ---------------------------------------------------------------- plots

namespace {

class Plot {
public:
    Plot(std::string title, std::string xlabel, std::string ylabel, double x0, double x1, double y0, double y1)
        : x0_(x0), x1_(x1 > x0 ? x1 : x0 + 1.0), y0_(y0), y1_(y1 > y0 ? y1 : y0 + 1.0) {
        body_ << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title
              << "</text>\n";
        body_ << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 8 << "\" text-anchor=\"middle\">" << xlabel
              << "</text>\n";
        body_ << "<text x=\"14\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << kH / 2
              << ")\">" << ylabel << "</text>\n";
        body_ << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << kW - kL - kR << "\" height=\""
              << kH - kT - kB << "\" fill=\"none\" stroke=\"black\"/>\n";
        for (int k = 0; k <= 4; ++k) {
            const double xv = x0_ + (x1_ - x0_) * k / 4.0;
            const double yv = y0_ + (y1_ - y0_) * k / 4.0;
            body_ << "<text x=\"" << fixed(px(xv)) << "\" y=\"" << kH - kB + 16
                  << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
            body_ << "<text x=\"" << kL - 6 << "\" y=\"" << fixed(py(yv) + 4)
                  << "\" text-anchor=\"end\">" << tick(yv) << "</text>\n";
        }
    }

    void line(const std::vector<std::pair<double, double>>& pts, const std::string& color, bool dashed = false,
              double width = 1.5) {
        if (pts.empty()) return;
        if (pts.size() == 1) {
            body_ << "<circle cx=\"" << fixed(px(pts[0].first)) << "\" cy=\"" << fixed(py(pts[0].second))
                  << "\" r=\"3\" fill=\"" << color << "\"/>\n";
            return;
        }
        body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << fixed(width, 1) << "\"";
        if (dashed) body_ << " stroke-dasharray=\"5,4\"";
        body_ << " points=\"";
        for (const auto& [x, y] : pts) body_ << fixed(px(x)) << ',' << fixed(py(y)) << ' ';
        body_ << "\"/>\n";
    }

    void hline(double y, const std::string& label, const std::string& color) {
        line({{x0_, y}, {x1_, y}}, color, true, 1.0);
        body_ << "<text x=\"" << kW - kR - 4 << "\" y=\"" << fixed(py(y) - 3) << "\" text-anchor=\"end\" fill=\""
              << color << "\">" << label << "</text>\n";
    }

    void vline(double x, const std::string& color) { line({{x, y0_}, {x, y1_}}, color, true, 0.8); }

    void rect(double xa, double xb, double ya, double yb, const std::string& color) {
        body_ << "<rect x=\"" << fixed(px(xa)) << "\" y=\"" << fixed(py(yb)) << "\" width=\""
              << fixed(px(xb) - px(xa)) << "\" height=\"" << fixed(py(ya) - py(yb)) << "\" fill=\"" << color
              << "\" fill-opacity=\"0.2\"/>\n";
    }

    void legend(int row, const std::string& label, const std::string& color) {
        const int y = kT + 14 + 14 * row;
        body_ << "<line x1=\"" << kL + 8 << "\" y1=\"" << y - 4 << "\" x2=\"" << kL + 24 << "\" y2=\"" << y - 4
              << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        body_ << "<text x=\"" << kL + 28 << "\" y=\"" << y << "\">" << label << "</text>\n";
    }

    void note(const std::string& text) {
        body_ << "<text x=\"" << kW / 2 << "\" y=\"" << kH / 2 << "\" text-anchor=\"middle\">" << text << "</text>\n";
    }

    std::string str() const {
        std::ostringstream os;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
           << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
           << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           << body_.str() << "</svg>\n";
        return os.str();
    }

private:
    static constexpr int kW = 720, kH = 420, kL = 70, kR = 20, kT = 32, kB = 44;

    double px(double x) const { return kL + (x - x0_) / (x1_ - x0_) * (kW - kL - kR); }
    double py(double y) const { return kH - kB - (y - y0_) / (y1_ - y0_) * (kH - kT - kB); }
    static std::string tick(double v) {
        std::ostringstream os;
        os.precision(3);
        os << v;
        return os.str();
    }

    double x0_, x1_, y0_, y1_;
    std::ostringstream body_;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};

}  // namespace

std::string norm_plot_svg(const RunArtifact& art) {
    std::vector<std::pair<double, double>> pts;
    const double h = art.grid.n() > 0 ? art.grid.h() : art.traj.grid.h();
    for (const auto& s : art.traj.states) pts.emplace_back(s.time, l2_norm(s.values, h));
    if (pts.empty()) pts.emplace_back(art.initial.time, l2_norm(art.initial.values, h));
    double t0 = pts.front().first, t1 = pts.back().first, ymax = 0.0;
    for (const auto& p : pts) ymax = std::max(ymax, p.second);
    for (const auto& [label, v] : art.norm_levels) ymax = std::max(ymax, v);
    Plot plot("L2 norm of the state", "t", "|y(t)|", t0, t1, 0.0, 1.05 * ymax);
    for (double m : art.stage_marks) plot.vline(m, "#999999");
    for (std::size_t k = 0; k < art.norm_levels.size(); ++k) {
        plot.hline(art.norm_levels[k].second, art.norm_levels[k].first, kPalette[(k + 1) % 10]);
    }
    plot.line(pts, kPalette[0]);
    return plot.str();
}

std::string window_plot_svg(const RunArtifact& art) {
    const auto& st = art.schedule.stages();
    if (st.empty()) {
        const double t0 = art.traj.empty() ? art.initial.time : art.traj.t_start();
        const double t1 = art.traj.empty() ? t0 : art.traj.t_end();
        Plot plot("control window position r(t)", "t", "x", t0, t1, 0.0, 1.0);
        plot.note("no control");
        return plot.str();
    }
    Plot plot("control window position r(t)", "t", "x", st.front().t_start, st.back().t_end, 0.0, 1.0);
    std::vector<std::pair<double, double>> stair;
    for (const auto& s : st) {
        if (std::holds_alternative<Idle>(s.payload)) {
            if (!stair.empty()) plot.line(stair, kPalette[1], false, 2.0);
            stair.clear();
            continue;
        }
        plot.rect(s.t_start, s.t_end, s.window.lo(), std::min(1.0, s.window.hi()), kPalette[0]);
        stair.emplace_back(s.t_start, s.window.r);
        stair.emplace_back(s.t_end, s.window.r);
    }
    plot.line(stair, kPalette[1], false, 2.0);
    plot.legend(0, "r(t)", kPalette[1]);
    return plot.str();
}

std::string snapshot_plot_svg(const RunArtifact& art) {
    const auto& traj = art.traj;
    std::vector<const State*> shown;
    if (traj.empty()) {
        if (!art.initial.values.empty()) shown.push_back(&art.initial);
    } else {
        std::vector<double> times{traj.t_start()};
        for (const auto& s : art.schedule.stages()) times.push_back(s.t_end);
        times.push_back(traj.t_end());
        std::sort(times.begin(), times.end());
        if (times.size() > 10) {  // keep ends, spread the rest
            std::vector<double> keep;
            for (int k = 0; k < 10; ++k) keep.push_back(times[k * (times.size() - 1) / 9]);
            times = keep;
        }
        for (double t : times) {
            auto it = std::lower_bound(traj.states.begin(), traj.states.end(), t - 1e-12,
                                       [](const State& s, double v) { return s.time < v; });
            if (it == traj.states.end()) it = std::prev(traj.states.end());
            if (shown.empty() || shown.back() != &*it) shown.push_back(&*it);
        }
    }
    const auto& grid = art.grid.n() > 0 ? art.grid : traj.grid;
    double lo = 0.0, hi = 0.0;
    for (const auto* s : shown) {
        for (double v : s->values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    Plot plot("state snapshots at stage boundaries", "x", "y(x, t)", 0.0, 1.0, lo, hi > lo ? 1.05 * hi : lo + 1.0);
    for (std::size_t k = 0; k < shown.size(); ++k) {
        std::vector<std::pair<double, double>> pts{{grid.left(), 0.0}};
        for (int i = 0; i < grid.n(); ++i) pts.emplace_back(grid.node(i), shown[k]->values[static_cast<std::size_t>(i)]);
        pts.emplace_back(grid.right(), 0.0);
        plot.line(pts, kPalette[k % 10]);
        plot.legend(static_cast<int>(k), "t = " + fixed(shown[k]->time, 4), kPalette[k % 10]);
    }
    return plot.str();
}

// ---------------------------------------------------------------- run

void emit_report(const RunArtifact& art) {
    const fs::path& d = art.dir;
    fs::create_directories(d / "plots");
    write_file(d / "summary.json", art.summary().dump(2) + "\n");
    write_file(d / "trajectory.csv", trajectory_csv(art.traj));
    const auto& grid = art.grid.n() > 0 ? art.grid : art.traj.grid;
    write_file(d / "schedule.json", dump_json(schedule_to_json(art.schedule, grid)) + "\n");

    json reps = json::array();
    std::string csv = report_csv_header() + "\n";
    for (const auto& r : art.reports) {
        reps.push_back(report_to_json(r));
        csv += report_csv_row(r) + "\n";
    }
    write_file(d / "reports.json", reps.dump(2) + "\n");
    write_file(d / "certificates.csv", csv);

    std::string sm = "stage,certificate,quantity,value,bound,margin\n";
    for (const auto& m : art.margins) {
        sm += m.stage + "," + m.certificate + ",\"" + m.quantity + "\"," + format_double(m.value) + "," +
              format_double(m.bound) + "," + format_double(m.margin) + "\n";
    }
    write_file(d / "stage_margins.csv", sm);
    for (const auto& [name, text] : art.tables) write_file(d / name, text);

    write_file(d / "plots" / "norm.svg", norm_plot_svg(art));
    write_file(d / "plots" / "window.svg", window_plot_svg(art));
    write_file(d / "plots" / "snapshots.svg", snapshot_plot_svg(art));

    if (art.failed) write_file(d / "FAILED", art.error + "\n");
    else if (fs::exists(d / "FAILED")) fs::remove(d / "FAILED");
}

RunArtifact run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
    const BuiltExperiment b = build_experiment(cfg);
    if ((cfg.kind == ExperimentKind::Solve || cfg.kind == ExperimentKind::Certify) && !cfg.u.empty() &&
        !cfg.v.empty()) {
        throw Error(ErrorKind::Config, "give either solve.u or solve.v, not both");
    }
    if ((cfg.kind == ExperimentKind::Sweep || cfg.kind == ExperimentKind::Pipeline) && b.quasilinear) {
        throw Error(ErrorKind::Config, std::string(to_string(cfg.kind)) + " needs a frozen law b(x,t), not a(y)");
    }
    if (cfg.kind == ExperimentKind::Picard && !b.quasilinear) {
        throw Error(ErrorKind::Config, "picard needs a quasilinear law a(y)");
    }

    RunArtifact art;
    art.dir = out_dir;
    art.kind = cfg.kind;
    art.grid = b.grid;
    art.initial = b.y0;
    fs::create_directories(out_dir);
    write_file(out_dir / "config.toml", cfg.source_text);
    if (!cfg.overrides.empty()) {
        std::string ov;
        for (const auto& o : cfg.overrides) ov += o + "\n";
        write_file(out_dir / "overrides.txt", ov);
    }

    std::string stage = "setup";
    try {
        switch (cfg.kind) {
            case ExperimentKind::Solve: run_solve(art, cfg, b, stage, false); break;
            case ExperimentKind::Certify: run_solve(art, cfg, b, stage, true); break;
            case ExperimentKind::Sweep: run_sweep_experiment(art, cfg, b, stage); break;
            case ExperimentKind::Pipeline: run_pipeline_experiment(art, cfg, b, stage); break;
            case ExperimentKind::Picard: run_picard_experiment(art, cfg, b, stage); break;
            case ExperimentKind::Witness: run_witness_experiment(art, cfg, b, stage); break;
        }
    } catch (const Error& e) {
        art.failed = true;
        art.error_kind = e.kind();
        art.failed_stage = stage;
        art.error = stage + ": " + e.what();
    } catch (const std::exception& e) {
        art.failed = true;
        art.error_kind = ErrorKind::Io;
        art.failed_stage = stage;
        art.error = stage + ": " + e.what();
    }
    emit_report(art);
    return art;
}

}  // namespace mobilectl
