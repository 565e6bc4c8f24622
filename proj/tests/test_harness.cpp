#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "json.hpp"
#include "mobilectl/config.hpp"
#include "mobilectl/harness.hpp"

using namespace mobilectl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& tag) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    const auto p = fs::temp_directory_path() /
                   ("mobilectl_" + std::string(info->name()) + "_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

const char* kSolve = R"toml(experiment = "solve"
[grid]
n = 100
[time]
T = 0.05
dt = 1e-4
[data]
y0 = "sin(pi*x)"
[solve]
oracle = true
oracle_times = [0.01, 0.05]
)toml";

}  // namespace

TEST(Harness, SolveWritesOracleTable) {
    const auto dir = scratch("solve");
    const auto art = run_experiment(parse_config(kSolve), dir);
    EXPECT_FALSE(art.failed);
    EXPECT_EQ(art.exit_code(), kExitPass);
    for (const char* f : {"config.toml", "summary.json", "trajectory.csv", "schedule.json", "reports.json",
                          "certificates.csv", "stage_margins.csv", "oracle.csv", "plots/norm.svg",
                          "plots/window.svg", "plots/snapshots.svg"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    EXPECT_FALSE(fs::exists(dir / "FAILED"));
    EXPECT_EQ(slurp(dir / "config.toml"), kSolve);

    const auto oracle = slurp(dir / "oracle.csv");
    EXPECT_EQ(oracle.substr(0, oracle.find('\n')), "t,error,tolerance");
    EXPECT_EQ(count_of(oracle, "\n"), 3u);

    const auto s = nlohmann::json::parse(slurp(dir / "summary.json"));
    EXPECT_EQ(s["schema"], kSummarySchema);
    EXPECT_EQ(s["status"], "pass");
    EXPECT_EQ(s["experiment"], "solve");
    const double err = s["terminal_error"].get<double>();
    EXPECT_GT(err, 0.0);
    EXPECT_LT(err, 1e-3);
    EXPECT_EQ(err, s["details"]["oracle"][1]["error"].get<double>());
    bool oracle_seen = false;
    for (const auto& c : s["certificates"]) oracle_seen = oracle_seen || c["name"] == "eigen_oracle";
    EXPECT_TRUE(oracle_seen);

    const auto csv = slurp(dir / "certificates.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "name,margin,bound,verdict");
    const auto traj = slurp(dir / "trajectory.csv");
    EXPECT_EQ(traj.substr(0, 12), "t,y_1,y_2,y_");
    EXPECT_EQ(count_of(traj, "\n"), 501u + 1u);  // 500 steps + initial + header
}

TEST(Harness, OracleInapplicableForVariableCoefficient) {
    const auto dir = scratch("var");
    const auto art = run_experiment(parse_config(kSolve, {"law.b=\"1 + x\""}), dir);
    ASSERT_FALSE(art.failed);
    bool found = false;
    for (const auto& r : art.reports) {
        if (r.name != "eigen_oracle") continue;
        found = true;
        EXPECT_EQ(r.verdict, Verdict::Inapplicable);
    }
    EXPECT_TRUE(found);
    EXPECT_FALSE(fs::exists(dir / "oracle.csv"));
    EXPECT_EQ(art.exit_code(), kExitPass);
    EXPECT_EQ(slurp(dir / "overrides.txt"), "law.b=\"1 + x\"\n");
}

TEST(Harness, ExitCodeReflectsCertificates) {
    RunArtifact art;
    CertificateReport ok;
    ok.name = "a";
    ok.measured.push_back({"q", 1.0, 2.0, 0.0});
    ok.finalize();
    art.reports.push_back(ok);
    EXPECT_EQ(art.exit_code(), kExitPass);
    CertificateReport bad = ok;
    bad.measured[0].value = 3.0;
    bad.finalize();
    art.reports.push_back(bad);
    EXPECT_FALSE(art.all_passed());
    EXPECT_EQ(art.exit_code(), kExitCertificateFail);
    EXPECT_EQ(art.summary()["status"], "certificate_fail");

    RunArtifact f;
    f.failed = true;
    f.error_kind = ErrorKind::StageInfeasible;
    EXPECT_EQ(f.exit_code(), kExitInfeasible);
    f.error_kind = ErrorKind::BallViolation;
    EXPECT_EQ(f.exit_code(), kExitInfeasible);
    f.error_kind = ErrorKind::Config;
    EXPECT_EQ(f.exit_code(), kExitConfig);
    f.error_kind = ErrorKind::Io;
    EXPECT_EQ(f.exit_code(), kExitInternal);
    EXPECT_FALSE(f.all_passed());
}

TEST(Harness, FailedRunKeepsPartialArtifactsWithMarker) {
    const char* cfg = R"toml(experiment = "picard"
[grid]
n = 100
[law]
a = "1 + 0.1*arctan(y)"
[data]
y0 = "sin(pi*x)"
[control]
eps = 0.05
[picard]
gamma = 100
)toml";
    const auto dir = scratch("ball");
    const auto art = run_experiment(parse_config(cfg), dir);
    EXPECT_TRUE(art.failed);
    EXPECT_EQ(art.error_kind, ErrorKind::BallViolation);
    EXPECT_EQ(art.exit_code(), kExitInfeasible);
    ASSERT_TRUE(fs::exists(dir / "FAILED"));
    EXPECT_NE(slurp(dir / "FAILED").find("picard iteration:"), std::string::npos);
    const auto s = nlohmann::json::parse(slurp(dir / "summary.json"));
    EXPECT_EQ(s["status"], "failed");
    EXPECT_EQ(s["error"]["kind"], to_string(ErrorKind::BallViolation));
    EXPECT_EQ(s["all_passed"], false);
    EXPECT_TRUE(s["terminal_error"].is_null());
    EXPECT_TRUE(fs::exists(dir / "plots/norm.svg"));

    // the marker goes away once the same directory holds a good run
    const auto good = run_experiment(parse_config(cfg, {"picard.gamma=0.01"}), dir);
    EXPECT_FALSE(good.failed);
    EXPECT_FALSE(fs::exists(dir / "FAILED"));
}

TEST(Harness, WrongLawKindIsAConfigError) {
    const auto c = parse_config(std::string(kSolve) + "[law]\na = \"1\"\n", {"experiment=sweep", "solve.oracle=false"});
    EXPECT_THROW(run_experiment(c, scratch("q")), Error);
    const auto p = parse_config(kSolve, {"experiment=picard", "solve.oracle=false"});
    try {
        run_experiment(p, scratch("p"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
    const auto both = parse_config(kSolve, {"solve.u=\"-1\"", "solve.v=\"1\""});
    EXPECT_THROW(run_experiment(both, scratch("b")), Error);
}

TEST(Harness, EmptyTrajectoryGivesSinglePointNormPlot) {
    RunArtifact art;
    art.grid = build_grid(10);
    art.initial.values.assign(10, 1.0);
    art.initial.time = 0.0;
    const auto svg = norm_plot_svg(art);
    EXPECT_EQ(count_of(svg, "<circle"), 1u);
    EXPECT_EQ(count_of(svg, "<polyline"), 0u);
    EXPECT_NE(window_plot_svg(art).find("no control"), std::string::npos);
    EXPECT_EQ(count_of(snapshot_plot_svg(art), "<polyline"), 1u);

    const auto dir = scratch("empty");
    art.dir = dir;
    emit_report(art);
    EXPECT_EQ(slurp(dir / "trajectory.csv").find('\n'), slurp(dir / "trajectory.csv").size() - 1);
}

TEST(Harness, SweepStaircaseMatchesWindowSequence) {
    const char* cfg = R"toml(experiment = "sweep"
[grid]
n = 100
[data]
y0 = "sin(pi*x)"
[control]
eps = 0.1
l = 0.5
T_budget = 0.5
)toml";
    const auto dir = scratch("sweep");
    const auto art = run_experiment(parse_config(cfg), dir);
    ASSERT_FALSE(art.failed) << art.error;
    EXPECT_EQ(art.exit_code(), kExitPass);
    const auto windows = sweep_window_sequence(0.5);
    ASSERT_EQ(art.schedule.stages().size(), windows.size());
    for (std::size_t k = 0; k < windows.size(); ++k) EXPECT_EQ(art.schedule.stages()[k].window, windows[k]);
    const auto svg = slurp(dir / "plots/window.svg");
    // one shaded band per stage plus the background and frame
    EXPECT_EQ(count_of(svg, "fill-opacity"), windows.size());
    const auto margins = slurp(dir / "stage_margins.csv");
    EXPECT_EQ(margins.substr(0, margins.find('\n')), "stage,certificate,quantity,value,bound,margin");
    for (std::size_t j = 1; j <= windows.size(); ++j) {
        EXPECT_NE(margins.find("\n" + std::to_string(j) + ",sweep_stage_" + std::to_string(j)), std::string::npos);
        EXPECT_NE(margins.find("bernstein_boundary_stage_" + std::to_string(j)), std::string::npos);
    }
    const auto norm = slurp(dir / "plots/norm.svg");
    EXPECT_NE(norm.find("eps/2"), std::string::npos);
}

TEST(Harness, SweepBeyondTwoWindowsFailsAsInfeasible) {
    // the stage-gap limit shrinks like 1/m, so stage 2 of 4 cannot reach its threshold here
    const char* cfg = R"toml(experiment = "sweep"
[grid]
n = 100
[data]
y0 = "sin(pi*x)"
[control]
eps = 0.2
l = 0.3
T_budget = 0.5
)toml";
    const auto dir = scratch("sweep4");
    const auto art = run_experiment(parse_config(cfg), dir);
    EXPECT_TRUE(art.failed);
    EXPECT_EQ(art.error_kind, ErrorKind::StageInfeasible);
    EXPECT_EQ(art.exit_code(), kExitInfeasible);
    EXPECT_NE(art.error.find("stage 2 of 4"), std::string::npos) << art.error;
    EXPECT_TRUE(fs::exists(dir / "FAILED"));
}

TEST(Harness, RerunsAreByteIdentical) {
    const char* cfg = R"toml(experiment = "witness"
seed = 11
[grid]
n = 100
[time]
T = 0.02
[data]
y0 = "sin(pi*x)"
[witness]
count = 8
)toml";
    const auto a = scratch("a"), b = scratch("b");
    const auto ra = run_experiment(parse_config(cfg), a);
    const auto rb = run_experiment(parse_config(cfg), b);
    EXPECT_EQ(ra.exit_code(), kExitPass);
    for (const char* f : {"summary.json", "trajectory.csv", "schedule.json", "reports.json", "certificates.csv",
                          "stage_margins.csv", "envelope.csv"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    // a different seed changes the controls
    const auto c = scratch("c");
    run_experiment(parse_config(cfg, {"seed=12"}), c);
    EXPECT_NE(slurp(a / "trajectory.csv"), slurp(c / "trajectory.csv"));
}

TEST(Harness, TrajectoryTableIsThinnedKeepingEnds) {
    Trajectory t;
    t.grid = build_grid(3);
    for (int k = 0; k <= 4999; ++k) t.states.push_back({{1.0 * k, 0.0, -1.0}, k * 1e-3});
    const auto csv = trajectory_csv(t, 2000);
    EXPECT_LE(count_of(csv, "\n"), 2002u);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,y_1,y_2,y_3");
    EXPECT_NE(csv.find("\n0,0,0,-1\n"), std::string::npos);
    EXPECT_NE(csv.find("\n4.999,4999,0,-1\n"), std::string::npos);
}

TEST(Harness, FormatDoubleRoundTrips) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1e6, 1e6);
    for (int k = 0; k < 1000; ++k) {
        const double v = U(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(1e-300), "1e-300");
}
