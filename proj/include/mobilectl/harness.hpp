#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mobilectl/certificates.hpp"
#include "mobilectl/config.hpp"
#include "mobilectl/control.hpp"
#include "mobilectl/error.hpp"
#include "mobilectl/state.hpp"

namespace mobilectl {

inline constexpr const char* kSummarySchema = "mobilectl.summary/1";

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitPass = 0,
    kExitInternal = 1,  // I/O or an unexpected exception
    kExitCertificateFail = 2,
    kExitInfeasible = 3,
    kExitConfig = 4,
};

/// One row of stage_margins.csv.
struct StageMargin {
    std::string stage;  // "1", "2", ... or "-" for whole-run quantities
    std::string certificate;
    std::string quantity;
    double value = 0.0;
    double bound = 0.0;
    double margin = 0.0;
};

/// In-memory image of a run directory.
struct RunArtifact {
    std::filesystem::path dir;
    ExperimentKind kind = ExperimentKind::Solve;
    bool failed = false;          // a library error stopped the run
    ErrorKind error_kind = ErrorKind::InvalidArgument;
    std::string error;            // "<stage>: <message>"
    std::string failed_stage;

    SpatialGrid grid;
    State initial;
    Trajectory traj;
    ControlSchedule schedule;
    std::vector<CertificateReport> reports;
    std::vector<StageMargin> margins;
    nlohmann::json details = nlohmann::json::object();  // experiment-specific numbers
    double terminal_error = -1.0;  // < 0: not applicable
    std::vector<std::pair<std::string, std::string>> tables;  // extra CSV files: name, contents

    // plot decorations
    std::vector<double> stage_marks;
    std::vector<std::pair<std::string, double>> norm_levels;  // horizontal lines on the norm plot

    bool all_passed() const;
    int exit_code() const;
    nlohmann::json summary() const;
};

/// Runs the configured experiment in `out_dir` (created if needed) and writes
/// every artifact. Library errors are caught: the directory keeps whatever was
/// produced, plus a FAILED marker. Config errors from building the
/// experiment propagate.
RunArtifact run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// summary.json, trajectory.csv, schedule.json, reports.json, certificates.csv,
/// stage_margins.csv and plots/{norm,window,snapshots}.svg.
void emit_report(const RunArtifact& art);

/// Wide table "t,y_1,...,y_n"; at most max_rows + 1 rows (first and last kept).
std::string trajectory_csv(const Trajectory& traj, std::size_t max_rows = 2000);

/// Shortest round-trip decimal form.
std::string format_double(double v);

std::string norm_plot_svg(const RunArtifact& art);
std::string window_plot_svg(const RunArtifact& art);
std::string snapshot_plot_svg(const RunArtifact& art);

}  // namespace mobilectl
