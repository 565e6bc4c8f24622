#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mobilectl/control.hpp"
#include "mobilectl/grid.hpp"
#include "mobilectl/law.hpp"
#include "mobilectl/solver.hpp"
#include "mobilectl/state.hpp"

namespace mobilectl {

// ---------------------------------------------------------------- tolerances

/// Error constants of the scheme against closed-form solutions, per unit of
/// the data scale: |error| <= kSpaceErrorConst h^2 + kTimeErrorConst dt.
inline constexpr double kSpaceErrorConst = 0.35;
inline constexpr double kTimeErrorConst = 2.0;
inline constexpr double kToleranceFactor = 10.0;
/// Relative slack for inequalities the discrete scheme preserves exactly.
inline constexpr double kRoundoffTol = 1e-10;
inline constexpr double kPositivityThreshold = 1e-12;

double discretization_tolerance(double h, double dt, double scale);

// ---------------------------------------------------------------- digest

/// FNV-1a, 64 bit, over the raw bytes of what is fed in.
class Digest {
public:
    Digest& add(double v);
    Digest& add(std::int64_t v);
    Digest& add(std::span<const double> v);
    Digest& add(const std::string& s);
    Digest& add(const Trajectory& traj);
    std::uint64_t value() const noexcept { return h_; }
    std::string hex() const;

private:
    void bytes(const void* p, std::size_t n);
    std::uint64_t h_ = 14695981039346656037ull;
};

// ---------------------------------------------------------------- reports

enum class Verdict { Pass, Fail, Inapplicable };

const char* to_string(Verdict v);

/// One inequality value <= bound + tolerance (strict: value < bound + tolerance).
struct Measurement {
    std::string quantity;
    double value = 0.0;
    double bound = 0.0;
    double tolerance = 0.0;
    bool strict = false;

    bool holds() const;
    double margin() const { return bound + tolerance - value; }
};

struct CertificateReport {
    std::string name;
    std::string inputs_digest;
    std::vector<Measurement> measured;
    std::vector<std::pair<std::string, double>> diagnostics;
    Verdict verdict = Verdict::Inapplicable;
    std::string note;

    /// Sets the verdict from the measurements (pass iff all hold).
    void finalize();
    void inapplicable(std::string why);
    bool passed() const { return verdict == Verdict::Pass; }
    /// Smallest margin over the measurements (0 when there are none).
    double margin() const;
    /// Bound and tolerance of the measurement with the smallest margin.
    double bound() const;
    double tolerance() const;
    std::optional<double> diagnostic(const std::string& key) const;
};

inline constexpr const char* kReportSchema = "mobilectl.report/1";

nlohmann::json report_to_json(const CertificateReport& r);
/// name,margin,bound,verdict
std::string report_csv_header();
std::string report_csv_row(const CertificateReport& r);

// ---------------------------------------------------------------- controls

/// Sampled properties of a schedule over a trajectory's time lattice,
/// refined kSamplingRefinement times between stored states.
struct ControlSummary {
    double u_max = 0.0;   // largest u
    double u_min = 0.0;   // smallest u
    double u_sup = 0.0;   // sup |u|
    double ut_sup = 0.0;  // sup |u_t| inside stages
    double v_min = 0.0;
    double v_max = 0.0;
    bool u_time_independent = true;
    int samples = 0;
};

ControlSummary summarize_controls(const ControlSchedule& schedule, const SpatialGrid& grid,
                                  std::span<const double> times);

// ---------------------------------------------------------------- constants

/// Energy constants of the damped problem started from y0 at t0 with
/// horizon length T, and the stage-gap constants assembled from them.
struct EnergyConstants {
    double K1 = 0.0;
    double K2 = 0.0;
    double K3 = 0.0;
    double K4 = 0.0;
    double horizon = 0.0;
    double y0_sup = 0.0;
    double beta = 0.0;             // |b_x| / rho
    double y0p_exp_max = 0.0;      // max y0' e^{y0}
    double bernstein = 0.0;        // e^{1+beta} max{y0' e^{y0}}
    double bernstein_proof = 0.0;  // M e (1+beta) with the proof's M
    double bernstein_M = 0.0;
    double time_derivative = 0.0;  // bound on |y_t(t)|
    double C2 = 0.0;
    double C1 = 0.0;
};

EnergyConstants compute_energy_constants(const State& y0, const SpatialGrid& grid, const FrozenLaw& law,
                                         double u_sup, double ut_sup, double T);

/// u sampled on the grid nodes and kSamplingRefinement * 64 + 1 times over [t0, t0+T].
EnergyConstants compute_energy_constants(const State& y0, const SpatialGrid& grid, const FrozenLaw& law,
                                         const Field& u, double T);

/// Discrete (b(., t) y')' at the nodes with the scheme's midpoint fluxes.
std::vector<double> discrete_flux_divergence(std::span<const double> y, const SpatialGrid& grid,
                                             const FrozenLaw& law, double t);

/// Second order one-sided difference at x = left end, zero boundary value.
double boundary_slope(std::span<const double> y, double h);

// ---------------------------------------------------------------- checks

CertificateReport check_nonnegativity(const Trajectory& traj, const ControlSchedule& schedule = {});

CertificateReport check_sup_bound(const Trajectory& traj, const ControlSchedule& schedule = {});

CertificateReport check_strict_positivity(const Trajectory& traj, double t_probe,
                                          const ControlSchedule& schedule = {});

/// Both trajectories must share the grid, the law and the controls.
CertificateReport check_comparison(const Trajectory& lower, const Trajectory& upper);

CertificateReport check_decay(const State& y0, const SpatialGrid& grid, const FrozenLaw& law, double T,
                              const SolverConfig& cfg = {});

CertificateReport check_time_derivative_bound(const Trajectory& traj, const EnergyConstants& constants,
                                              const ControlSchedule& schedule = {});

CertificateReport check_bernstein_boundary(const Trajectory& traj, const FrozenLaw& law,
                                           const ControlSchedule& schedule = {});

/// Piecewise constant in time (`pieces` equal pieces on [t0, t1]), nodewise
/// uniform in [-amplitude, amplitude]. Generator: std::mt19937_64 seeded
/// with `seed`; each value is -A + 2A * ((x >> 11) * 2^-53) for the next
/// 64-bit output x, drawn control by control, piece by piece, node by node.
std::vector<Field> random_control_batch(std::uint64_t seed, int count, double amplitude, const SpatialGrid& grid,
                                        double t0, double t1, int pieces = 10);

struct WitnessResult {
    CertificateReport report;
    State envelope;             // on the probe sub-grid
    SpatialGrid probe_grid;
    double obstruction = 0.0;   // |envelope(T)| in L2 of the probe
    double oracle_obstruction = -1.0;  // closed form when b is constant
    int dominated = 0;
    int total = 0;
};

/// Static window `omega` carries the supplied u fields; the probe interval
/// must not meet it.
WitnessResult noncontrollability_witness(const State& y0, const SpatialGrid& grid, const DiffusionLaw& law,
                                         const Window& omega, double probe_lo, double probe_hi,
                                         const std::vector<Field>& controls, double T,
                                         const SolverConfig& cfg = {});

/// L / (pi sqrt(2 rho)) for a window of length L.
double lipschitz_constant_sharp(double L, double rho);
/// L / (rho pi), the Poincare-type constant in its simplest form.
double lipschitz_constant_simple(double L, double rho);

/// Window problem with zero data and zero traces on omega: ratio
/// |y_k(T) - y(T)| / |v_k - v|_{L2(Q)} for every perturbed control.
CertificateReport check_control_to_state_lipschitz(const SpatialGrid& grid, const Window& omega,
                                                   const FrozenLaw& law, const Field& v,
                                                   const std::vector<Field>& perturbed, double T,
                                                   const SolverConfig& cfg = {});

}  // namespace mobilectl
