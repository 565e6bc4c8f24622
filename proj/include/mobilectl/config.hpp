#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mobilectl/expr.hpp"
#include "mobilectl/grid.hpp"
#include "mobilectl/law.hpp"
#include "mobilectl/state.hpp"
#include "mobilectl/synthesis.hpp"

namespace mobilectl {

enum class ExperimentKind { Solve, Sweep, Pipeline, Picard, Certify, Witness };

const char* to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& s);

/// Initial or target data: an expression in x, or one value per grid node.
struct DataSpec {
    Expr expr;
    std::vector<double> values;

    bool given() const { return !expr.empty() || !values.empty(); }
    State sample(const SpatialGrid& grid, double time) const;
};

struct LawSpec {
    bool quasilinear = false;
    Expr b;  // b(x, t)
    Expr a;  // a(y)
    double state_lo = -1.0;
    double state_hi = 1.0;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Solve;
    std::string source_text;  // the document as read, before overrides
    std::vector<std::string> overrides;

    int n = 200;
    double t0 = 0.0;
    double T = 1.0;
    double dt = 0.0;  // 0 = automatic
    LawSpec law;
    DataSpec y0;
    DataSpec y_d;

    // sweep / pipeline / picard
    double eps = 0.1;
    double l = 0.5;
    double T_budget = 0.0;  // 0 = t0 + phase_split (T - t0)
    SynthesisConfig synthesis;
    PicardConfig picard;

    // solve / certify: optional static control on (window_lo, window_hi)
    Expr u;
    Expr v;
    double window_lo = 0.0;
    double window_hi = 1.0;
    bool oracle = false;
    std::vector<double> oracle_times;
    double t_probe = 0.0;  // certify: strict positivity probe (0 = T)

    // witness
    std::uint64_t seed = 0;
    int count = 50;
    double amplitude = 100.0;
    int pieces = 10;
    double omega_lo = 0.0, omega_hi = 0.3;
    double probe_lo = 0.4, probe_hi = 0.9;
};

/// Parses a TOML document; `overrides` are "dotted.key=value" strings applied
/// before validation. Throws config errors with line numbers or field names.
ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                              const std::string& origin = "config");

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Every key the loader accepts, dotted.
const std::vector<std::string>& known_config_keys();

/// Grid, data and laws built from a validated config. Laws are certified by
/// sampling at 4x the grid resolution; a violated lower bound is a config error.
struct BuiltExperiment {
    SpatialGrid grid;
    State y0;
    State y_d;
    DiffusionLaw law;
    FrozenLaw frozen;         // valid when !quasilinear
    QuasilinearLaw quasi;     // valid when quasilinear
    bool quasilinear = false;
    SolverConfig solver;
};

BuiltExperiment build_experiment(const ExperimentConfig& cfg);

}  // namespace mobilectl
