#include "mobilectl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

#include "mobilectl/error.hpp"
#include "mobilectl/solver.hpp"

namespace mobilectl {

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::Config, msg); }

std::string where(const toml::node& n, const std::string& key) {
    std::ostringstream os;
    os << "'" << key << "'";
    if (n.source().begin.line > 0) os << " (line " << n.source().begin.line << ")";
    else os << " (override)";
    return os.str();
}

const std::vector<std::string> kKeys = {
    "experiment", "seed",
    "grid.n",
    "time.t0", "time.T", "time.dt",
    "law.b", "law.a", "law.state_lo", "law.state_hi",
    "data.y0", "data.y_d",
    "control.eps", "control.l", "control.T_budget",
    "solve.u", "solve.v", "solve.window_lo", "solve.window_hi", "solve.oracle", "solve.oracle_times",
    "solve.t_probe",
    "solver.newton_tol", "solver.newton_max_iter",
    "synthesis.ladder_max_exponent", "synthesis.scan_min_steps", "synthesis.delta_first_fraction",
    "synthesis.delta_ratio", "synthesis.steps_per_delta", "synthesis.basis_levels", "synthesis.nnls_max_iter",
    "synthesis.nnls_early_fraction", "synthesis.lift_floor_rel", "synthesis.lift_u_max", "synthesis.lift_drop_tol",
    "synthesis.phase_split", "synthesis.margin_cells_min",
    "picard.R", "picard.gamma", "picard.max_iters", "picard.fix_tol", "picard.theta",
    "witness.count", "witness.amplitude", "witness.pieces", "witness.omega_lo", "witness.omega_hi",
    "witness.probe_lo", "witness.probe_hi",
};

void check_known(const toml::table& t, const std::string& prefix, const std::set<std::string>& keys) {
    for (const auto& [k, node] : t) {
        const std::string full = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
        if (const auto* sub = node.as_table()) {
            bool section = false;
            for (const auto& known : keys) section = section || known.rfind(full + ".", 0) == 0;
            if (!section) config_error("unknown field " + where(node, full));
            check_known(*sub, full, keys);
        } else if (!keys.count(full)) {
            config_error("unknown field " + where(node, full));
        }
    }
}

void apply_override(toml::table& root, const std::string& ov) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) config_error("override '" + ov + "' must look like key=value");
    std::string key = ov.substr(0, eq);
    std::string value = ov.substr(eq + 1);
    key.erase(std::remove_if(key.begin(), key.end(), [](unsigned char c) { return std::isspace(c); }), key.end());
    toml::table parsed;
    try {
        parsed = toml::parse("v = " + value);
    } catch (const toml::parse_error&) {
        parsed = toml::table{};
        parsed.insert("v", value);  // bare word: a string
    }
    toml::table* t = &root;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        if (dot == std::string::npos) break;
        const std::string part = key.substr(start, dot - start);
        auto* node = t->get(part);
        if (!node) {
            t->insert(part, toml::table{});
            node = t->get(part);
        }
        if (!node->is_table()) config_error("override '" + ov + "': '" + part + "' is not a section");
        t = node->as_table();
        start = dot + 1;
    }
    const std::string leaf = key.substr(start);
    if (auto* existing = t->get(leaf); existing && existing->is_table()) {
        config_error("override '" + ov + "' targets a section");
    }
    t->insert_or_assign(leaf, *parsed.get("v"));
}

class Reader {
public:
    explicit Reader(const toml::table& root) : root_(root) {}

    const toml::node* find(const std::string& key) const {
        return root_.at_path(key).node();
    }

    double number(const std::string& key, double def) const {
        const auto* n = find(key);
        if (!n) return def;
        if (n->is_integer()) return static_cast<double>(n->as_integer()->get());
        if (n->is_floating_point()) return n->as_floating_point()->get();
        config_error("field " + where(*n, key) + " must be a number");
    }

    long long integer(const std::string& key, long long def) const {
        const auto* n = find(key);
        if (!n) return def;
        if (!n->is_integer()) config_error("field " + where(*n, key) + " must be an integer");
        return n->as_integer()->get();
    }

    bool boolean(const std::string& key, bool def) const {
        const auto* n = find(key);
        if (!n) return def;
        if (!n->is_boolean()) config_error("field " + where(*n, key) + " must be true or false");
        return n->as_boolean()->get();
    }

    std::string string(const std::string& key, const std::string& def) const {
        const auto* n = find(key);
        if (!n) return def;
        if (!n->is_string()) config_error("field " + where(*n, key) + " must be a string");
        return n->as_string()->get();
    }

    Expr expr(const std::string& key, const std::string& def, std::string_view vars) const {
        const auto* n = find(key);
        std::string src = def;
        if (n) {
            if (n->is_string()) src = n->as_string()->get();
            else if (n->is_integer() || n->is_floating_point()) src = std::to_string(number(key, 0.0));
            else config_error("field " + where(*n, key) + " must be an expression string");
        }
        if (src.empty()) return {};
        try {
            return Expr::compile(src, vars);
        } catch (const Error& e) {
            config_error("field " + (n ? where(*n, key) : "'" + key + "'") + ": " + e.what());
        }
    }

    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        const auto* n = find(key);
        if (!n) return out;
        const auto* arr = n->as_array();
        if (!arr) config_error("field " + where(*n, key) + " must be an array of numbers");
        for (const auto& el : *arr) {
            if (el.is_integer()) out.push_back(static_cast<double>(el.as_integer()->get()));
            else if (el.is_floating_point()) out.push_back(el.as_floating_point()->get());
            else config_error("field " + where(*n, key) + " must contain only numbers");
        }
        return out;
    }

    DataSpec data(const std::string& key) const {
        DataSpec d;
        const auto* n = find(key);
        if (!n) return d;
        if (n->is_array()) d.values = numbers(key);
        else d.expr = expr(key, "", "x");
        return d;
    }

private:
    const toml::table& root_;
};

template <class F>
void as_config_error(const std::string& what, F&& f) {
    try {
        f();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        config_error(what + ": " + e.what());
    }
}

}  // namespace

const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Solve: return "solve";
        case ExperimentKind::Sweep: return "sweep";
        case ExperimentKind::Pipeline: return "pipeline";
        case ExperimentKind::Picard: return "picard";
        case ExperimentKind::Certify: return "certify";
        case ExperimentKind::Witness: return "witness";
    }
    return "?";
}

ExperimentKind parse_experiment_kind(const std::string& s) {
    for (auto k : {ExperimentKind::Solve, ExperimentKind::Sweep, ExperimentKind::Pipeline, ExperimentKind::Picard,
                   ExperimentKind::Certify, ExperimentKind::Witness}) {
        if (s == to_string(k)) return k;
    }
    config_error("unknown experiment '" + s + "' (solve, sweep, pipeline, picard, certify, witness)");
}

const std::vector<std::string>& known_config_keys() { return kKeys; }

State DataSpec::sample(const SpatialGrid& grid, double time) const {
    State s;
    s.time = time;
    if (!values.empty()) {
        if (values.size() != static_cast<std::size_t>(grid.n())) {
            std::ostringstream os;
            os << "data lists " << values.size() << " values for " << grid.n() << " nodes";
            config_error(os.str());
        }
        s.values = values;
    } else {
        s.values.resize(static_cast<std::size_t>(grid.n()));
        for (int i = 0; i < grid.n(); ++i) s.values[static_cast<std::size_t>(i)] = expr(grid.node(i));
    }
    for (double v : s.values) {
        if (!std::isfinite(v)) config_error("data " + (expr.empty() ? std::string("values") : "\"" + expr.source() + "\"") + " is not finite on the grid");
    }
    return s;
}

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                              const std::string& origin) {
    toml::table root;
    try {
        root = toml::parse(text, origin);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << origin << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
        config_error(os.str());
    }
    for (const auto& ov : overrides) apply_override(root, ov);
    check_known(root, "", std::set<std::string>(kKeys.begin(), kKeys.end()));

    const Reader r(root);
    ExperimentConfig c;
    c.source_text = text;
    c.overrides = overrides;
    if (!r.find("experiment")) config_error("missing field 'experiment'");
    c.kind = parse_experiment_kind(r.string("experiment", ""));
    c.seed = static_cast<std::uint64_t>(r.integer("seed", 0));

    c.n = static_cast<int>(r.integer("grid.n", c.n));
    c.t0 = r.number("time.t0", c.t0);
    c.T = r.number("time.T", c.T);
    c.dt = r.number("time.dt", c.dt);

    const bool has_a = r.find("law.a") != nullptr;
    const bool has_b = r.find("law.b") != nullptr;
    if (has_a && has_b) config_error("law: give either b(x,t) or a(y), not both");
    c.law.quasilinear = has_a;
    c.law.a = r.expr("law.a", "1", "y");
    c.law.b = r.expr("law.b", "1", "xt");
    c.law.state_lo = r.number("law.state_lo", c.law.state_lo);
    c.law.state_hi = r.number("law.state_hi", c.law.state_hi);

    c.y0 = r.data("data.y0");
    c.y_d = r.data("data.y_d");
    if (!c.y0.given()) config_error("missing field 'data.y0'");

    c.eps = r.number("control.eps", c.eps);
    c.l = r.number("control.l", c.l);
    c.T_budget = r.number("control.T_budget", c.T_budget);

    c.u = r.expr("solve.u", "", "xt");
    c.v = r.expr("solve.v", "", "xt");
    c.window_lo = r.number("solve.window_lo", c.window_lo);
    c.window_hi = r.number("solve.window_hi", c.window_hi);
    c.oracle = r.boolean("solve.oracle", c.oracle);
    c.oracle_times = r.numbers("solve.oracle_times");
    c.t_probe = r.number("solve.t_probe", c.t_probe);

    auto& sc = c.synthesis;
    sc.solver.newton_tol = r.number("solver.newton_tol", sc.solver.newton_tol);
    sc.solver.newton_max_iter = static_cast<int>(r.integer("solver.newton_max_iter", sc.solver.newton_max_iter));
    sc.solver.dt = c.dt;
    sc.ladder_max_exponent = static_cast<int>(r.integer("synthesis.ladder_max_exponent", sc.ladder_max_exponent));
    sc.scan_min_steps = static_cast<int>(r.integer("synthesis.scan_min_steps", sc.scan_min_steps));
    sc.delta_first_fraction = r.number("synthesis.delta_first_fraction", sc.delta_first_fraction);
    sc.delta_ratio = r.number("synthesis.delta_ratio", sc.delta_ratio);
    sc.steps_per_delta = static_cast<int>(r.integer("synthesis.steps_per_delta", sc.steps_per_delta));
    if (const auto* n = r.find("synthesis.basis_levels")) {
        const auto* arr = n->as_array();
        if (!arr) config_error("field " + where(*n, "synthesis.basis_levels") + " must be an array of [stride, pieces]");
        sc.basis_levels.clear();
        for (const auto& el : *arr) {
            const auto* pair = el.as_array();
            if (!pair || pair->size() != 2 || !pair->get(0)->is_integer() || !pair->get(1)->is_integer()) {
                config_error("field " + where(*n, "synthesis.basis_levels") + " must hold [stride, pieces] integer pairs");
            }
            sc.basis_levels.push_back({static_cast<int>(pair->get(0)->as_integer()->get()),
                                       static_cast<int>(pair->get(1)->as_integer()->get())});
        }
    }
    sc.nnls_max_iter = static_cast<int>(r.integer("synthesis.nnls_max_iter", sc.nnls_max_iter));
    sc.nnls_early_fraction = r.number("synthesis.nnls_early_fraction", sc.nnls_early_fraction);
    sc.lift_floor_rel = r.number("synthesis.lift_floor_rel", sc.lift_floor_rel);
    sc.lift_u_max = r.number("synthesis.lift_u_max", sc.lift_u_max);
    sc.lift_drop_tol = r.number("synthesis.lift_drop_tol", sc.lift_drop_tol);
    sc.phase_split = r.number("synthesis.phase_split", sc.phase_split);
    sc.margin_cells_min = static_cast<int>(r.integer("synthesis.margin_cells_min", sc.margin_cells_min));

    c.picard.R = r.number("picard.R", c.picard.R);
    c.picard.gamma = r.number("picard.gamma", c.picard.gamma);
    c.picard.max_iters = static_cast<int>(r.integer("picard.max_iters", c.picard.max_iters));
    c.picard.fix_tol = r.number("picard.fix_tol", c.picard.fix_tol);
    c.picard.theta = r.number("picard.theta", c.picard.theta);

    c.count = static_cast<int>(r.integer("witness.count", c.count));
    c.amplitude = r.number("witness.amplitude", c.amplitude);
    c.pieces = static_cast<int>(r.integer("witness.pieces", c.pieces));
    c.omega_lo = r.number("witness.omega_lo", c.omega_lo);
    c.omega_hi = r.number("witness.omega_hi", c.omega_hi);
    c.probe_lo = r.number("witness.probe_lo", c.probe_lo);
    c.probe_hi = r.number("witness.probe_hi", c.probe_hi);

    // scalar validation
    if (c.n < 2) config_error("grid.n must be at least 2");
    if (!(c.T > c.t0)) config_error("time.T must exceed time.t0");
    if (!(c.dt >= 0.0)) config_error("time.dt must be >= 0 (0 = automatic)");
    if (!(c.eps > 0.0)) config_error("control.eps must be positive");
    if (!(c.l > 0.0 && c.l <= 1.0)) config_error("control.l must lie in (0, 1]");
    if (c.T_budget != 0.0 && !(c.T_budget > c.t0 && c.T_budget <= c.T)) {
        config_error("control.T_budget must lie in (t0, T]");
    }
    if (!(c.window_lo >= 0.0 && c.window_hi <= 1.0 && c.window_lo < c.window_hi)) {
        config_error("solve window must satisfy 0 <= window_lo < window_hi <= 1");
    }
    if (!(c.law.state_lo < c.law.state_hi)) config_error("law.state_lo must be below law.state_hi");
    if (c.count < 1 || c.pieces < 1) config_error("witness.count and witness.pieces must be at least 1");
    if (!(c.amplitude >= 0.0)) config_error("witness.amplitude must be >= 0");
    as_config_error("synthesis", [&] { validate(c.synthesis); });
    as_config_error("picard", [&] { validate(c.picard); });
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Config, "cannot read config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), overrides, path.string());
}

BuiltExperiment build_experiment(const ExperimentConfig& c) {
    BuiltExperiment b;
    as_config_error("grid", [&] { b.grid = build_grid(c.n); });
    b.y0 = c.y0.sample(b.grid, c.t0);
    if (c.y_d.given()) b.y_d = c.y_d.sample(b.grid, c.T);
    else b.y_d = State{std::vector<double>(static_cast<std::size_t>(c.n), 0.0), c.T};
    b.solver = c.synthesis.solver;
    b.quasilinear = c.law.quasilinear;
    if (c.law.quasilinear) {
        const Expr a = c.law.a;
        try {
            b.quasi = make_quasilinear([a](double y) { return a(0.0, 0.0, y); }, c.law.state_lo, c.law.state_hi);
        } catch (const Error& e) {
            config_error("law a(y) = \"" + a.source() + "\" violates inf a > 0 or is not smooth on [" +
                         std::to_string(c.law.state_lo) + ", " + std::to_string(c.law.state_hi) + "]: " + e.what());
        }
        b.law = b.quasi;
    } else {
        const Expr bx = c.law.b;
        if (bx.constant()) {
            const double v = bx();
            if (!(v > 0.0) || !std::isfinite(v)) {
                config_error("law b = \"" + bx.source() + "\" violates inf b > 0");
            }
            b.frozen = constant_law(v);
        } else {
            const double span = c.T - c.t0;
            const double dt = default_dt(b.grid, span, b.solver);
            const int samples_t = static_cast<int>(std::clamp(kSamplingRefinement * std::ceil(span / dt), 4.0, 4000.0));
            try {
                b.frozen = make_frozen([bx](double x, double t) { return bx(x, t); }, c.t0, c.T, kSamplingRefinement * (c.n + 1),
                                       samples_t);
            } catch (const Error& e) {
                config_error("law b(x,t) = \"" + bx.source() + "\" violates inf b > 0 or is not finite: " + e.what());
            }
            if (!(b.frozen.rho > 0.0)) {
                std::ostringstream os;
                os << "law b(x,t) = \"" << bx.source() << "\" violates inf b > 0 (sampled minimum " << b.frozen.rho
                   << ")";
                config_error(os.str());
            }
        }
        b.law = b.frozen;
    }
    return b;
}

}  // namespace mobilectl
