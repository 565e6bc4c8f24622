#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mobilectl/error.hpp"
#include "mobilectl/norms.hpp"
#include "mobilectl/solver.hpp"

using namespace mobilectl;

namespace {

constexpr double kPi = std::numbers::pi;

State sine_mode(const SpatialGrid& g, int k, double amp = 1.0) {
    return sample_state(g, [=](double x) { return amp * std::sin(k * kPi * x); });
}

double l2_error_vs(const SpatialGrid& g, const std::vector<double>& y, const std::function<double(double)>& exact) {
    double s = 0.0;
    for (int i = 0; i < g.n(); ++i) {
        const double d = y[static_cast<std::size_t>(i)] - exact(g.node(i));
        s += d * d;
    }
    return std::sqrt(g.h() * s);
}

}  // namespace

TEST(Grid, RejectsTooFewNodes) {
    EXPECT_THROW(build_grid(1), Error);
    try {
        build_grid(1);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
}

TEST(Grid, SmallGridArithmetic) {
    const auto g = build_grid(3);
    EXPECT_DOUBLE_EQ(g.h(), 0.25);
    ASSERT_EQ(g.nodes().size(), 3u);
    EXPECT_DOUBLE_EQ(g.node(0), 0.25);
    EXPECT_DOUBLE_EQ(g.node(1), 0.5);
    EXPECT_DOUBLE_EQ(g.node(2), 0.75);
    EXPECT_NEAR(build_grid(199).h(), 0.005, 1e-15);
}

TEST(Grid, SpacingTimesCellsIsOne) {
    for (int n : {2, 7, 64, 199, 1000}) {
        const auto g = build_grid(n);
        EXPECT_NEAR(g.h() * (n + 1), 1.0, 1e-14);
        for (int i = 1; i < n; ++i) EXPECT_LT(g.node(i - 1), g.node(i));
        EXPECT_GT(g.node(0), 0.0);
        EXPECT_LT(g.node(n - 1), 1.0);
    }
}

TEST(StepImplicit, ZeroIsAFixedPoint) {
    const auto g = build_grid(20);
    State s{std::vector<double>(20, 0.0), 0.0};
    ControlSlice c = ControlSlice::zeros(20);
    for (auto& u : c.u) u = -7.5;
    const auto q = make_quasilinear([](double y) { return 1.0 + 0.5 / (1.0 + y * y); }, -5, 5);
    for (const DiffusionLaw& law : {DiffusionLaw{constant_law(1.0)}, DiffusionLaw{q}}) {
        const auto next = step_implicit(s, 1e-3, law, c, g);
        for (double v : next.values) EXPECT_EQ(v, 0.0);
        EXPECT_DOUBLE_EQ(next.time, 1e-3);
    }
}

TEST(StepImplicit, SingleStepTracksHeatDecay) {
    const auto g = build_grid(200);
    const double dt = 1e-4;
    const auto next = step_implicit(sine_mode(g, 1), dt, constant_law(1.0), ControlSlice::zeros(200), g);
    const double err = l2_error_vs(g, next.values, [&](double x) { return std::exp(-kPi * kPi * dt) * std::sin(kPi * x); });
    // O(dt^2) per step plus O(h^2 dt) spatial drift.
    EXPECT_LT(err, 10.0 * (dt * dt + g.h() * g.h() * dt) * kPi * kPi * kPi * kPi);
}

TEST(StepImplicit, RejectsNonMMatrixStep) {
    const auto g = build_grid(10);
    ControlSlice c = ControlSlice::zeros(10);
    for (auto& u : c.u) u = 1e5;
    EXPECT_THROW(step_implicit(sine_mode(g, 1), 1e-3, constant_law(1.0), c, g), Error);
}

TEST(StepImplicit, QuasilinearResidualConverges) {
    const auto g = build_grid(50);
    const auto q = make_quasilinear([](double y) { return 1.0 + 0.5 / (1.0 + y * y); }, -5, 5,
                                    [](double y) { return -y / ((1.0 + y * y) * (1.0 + y * y)); });
    StepDiagnostics d;
    const auto s = sample_state(g, [](double x) { return 3.0 * x * (1.0 - x); });
    step_implicit(s, 1e-2, q, ControlSlice::zeros(50), g, {}, 0.0, 0.0, &d);
    EXPECT_FALSE(d.used_picard);
    EXPECT_LE(d.newton_iterations, 6);
    EXPECT_GT(d.min_pivot, 0.0);
}

TEST(SolveForward, ZeroDataStaysZero) {
    const auto g = build_grid(30);
    State y0{std::vector<double>(30, 0.0), 0.0};
    const auto traj = solve_forward(y0, 0.3, constant_law(2.0), {}, g);
    EXPECT_EQ(traj.min_value(), 0.0);
    EXPECT_EQ(traj.sup_abs(), 0.0);
}

TEST(SolveForward, StepCountAndFinalTime) {
    const auto g = build_grid(20);
    SolverConfig cfg;
    cfg.dt = 0.03;
    const auto traj = solve_forward(sine_mode(g, 1), 0.1, constant_law(1.0), {}, g, cfg);
    EXPECT_EQ(traj.size(), 1u + 4u);  // ceil(0.1 / 0.03) = 4
    EXPECT_DOUBLE_EQ(traj.t_end(), 0.1);
}

TEST(SolveForward, HeatDecayMatchesClosedForm) {
    const auto g = build_grid(200);
    SolverConfig cfg;
    cfg.dt = 1e-4;
    const auto traj = solve_forward(sine_mode(g, 1), 0.1, constant_law(1.0), {}, g, cfg);
    const double decay = std::exp(-kPi * kPi * 0.1);
    EXPECT_NEAR(decay, 0.3727, 1e-4);
    const double err = l2_error_vs(g, traj.final().values, [&](double x) { return decay * std::sin(kPi * x); });
    EXPECT_LE(err, 5e-3);
}

TEST(SolveForward, GlobalDampingShiftsTheEigenvalue) {
    const auto g = build_grid(100);
    const double m = 6.0;
    const double T = 0.05;
    const ControlSchedule sched({ControlStage{0.0, T, Window{0.0, 1.0}, ConstMultiplicative{m}}});
    SolverConfig cfg;
    cfg.dt = 1e-4;
    const auto traj = solve_forward(sine_mode(g, 1), T, constant_law(1.0), sched, g, cfg);
    const double decay = std::exp(-(kPi * kPi + m) * T);
    const double err = l2_error_vs(g, traj.final().values, [&](double x) { return decay * std::sin(kPi * x); });
    // Leading backward-Euler error: (lambda^2 / 2) T dt e^{-lambda T} |sin|.
    const double lambda = kPi * kPi + m;
    const double predicted = 0.5 * lambda * lambda * T * cfg.dt * decay / std::sqrt(2.0);
    EXPECT_LT(err, 1.25 * predicted);
    EXPECT_GT(err, 0.75 * predicted);
}

TEST(SolveForward, OracleErrorShrinksWithDtAndH) {
    // Constant damping on the whole domain: compare against the eigen oracle
    // while halving dt and h; backward Euler plus second-order space should
    // reduce the error by about 2 per halving of dt.
    const double m = 2.0;
    const double T = 0.1;
    double prev = 0.0;
    for (int level = 0; level < 3; ++level) {
        const int n = 50 * (1 << level) - 1;
        const auto g = build_grid(n);
        SolverConfig cfg;
        cfg.dt = 4e-3 / (1 << level);
        const auto y0 = sample_state(g, [](double x) { return std::sin(kPi * x) + 0.3 * std::sin(3 * kPi * x); });
        const ControlSchedule sched({ControlStage{0.0, T, Window{0.0, 1.0}, ConstMultiplicative{m}}});
        const auto traj = solve_forward(y0, T, constant_law(1.0), sched, g, cfg);
        const auto oracle = eigen_oracle(y0, g, 1.0, m, T);
        const double err = l2_distance(traj.final().values, oracle.values, g.h());
        if (level > 0) EXPECT_GE(prev / err, 1.8) << "level " << level;
        prev = err;
    }
}

TEST(SolveForward, QuasilinearSelfConvergence) {
    // Levels (h, dt), (h/2, dt/4), (h/4, dt/16): with first order in time and
    // second order in space both errors scale like h^2, so successive
    // differences shrink by about 4.
    const auto a = [](double y) { return 1.0 + 0.5 / (1.0 + y * y); };
    const auto law = make_quasilinear(a, -2, 2);
    const double T = 0.05;
    std::vector<std::vector<double>> finals;
    std::vector<SpatialGrid> grids;
    for (int level = 0; level < 3; ++level) {
        const int cells = 20 << level;
        const auto g = build_grid(cells - 1);
        SolverConfig cfg;
        cfg.dt = 2e-3 / std::pow(4.0, level);
        const auto y0 = sample_state(g, [](double x) { return x * (1.0 - x); });
        finals.push_back(solve_forward(y0, T, law, {}, g, cfg).final().values);
        grids.push_back(g);
    }
    auto coarse_diff = [&](int fine) {
        const auto& gc = grids[0];
        double s = 0.0;
        for (int i = 0; i < gc.n(); ++i) {
            const double x = gc.node(i);
            const double d = interpolate_at(grids[fine - 1], finals[fine - 1], x) -
                             interpolate_at(grids[fine], finals[fine], x);
            s += d * d;
        }
        return std::sqrt(gc.h() * s);
    };
    const double d01 = coarse_diff(1);
    const double d12 = coarse_diff(2);
    EXPECT_GE(d01 / d12, 3.0);
    // Richardson estimate of the level-1 error bounds its distance to level 2.
    EXPECT_LE(d12, d01 / 3.0 + 1e-12);
}

TEST(EigenOracle, SecondModeDecay) {
    const auto g = build_grid(64);
    const auto y0 = sine_mode(g, 2);
    const auto y = eigen_oracle(y0, g, 1.0, 0.0, 0.05);
    const double factor = std::exp(-4 * kPi * kPi * 0.05);
    EXPECT_NEAR(factor, 0.1389, 1e-4);
    for (int i = 0; i < g.n(); ++i) {
        EXPECT_NEAR(y.values[static_cast<std::size_t>(i)], factor * y0.values[static_cast<std::size_t>(i)], 1e-13);
    }
}

TEST(EigenOracle, IdentityAtTimeZero) {
    const auto g = build_grid(40);
    const auto y0 = sample_state(g, [](double x) { return x * x * (1.0 - x) + 0.1 * std::cos(7 * x); });
    const auto y = eigen_oracle(y0, g, 3.0, 1.0, 0.0);
    for (std::size_t i = 0; i < y.values.size(); ++i) EXPECT_NEAR(y.values[i], y0.values[i], 1e-13);
}

TEST(EigenOracle, MonotoneInDamping) {
    const auto g = build_grid(40);
    const auto y0 = sample_state(g, [](double x) { return x * (1.0 - x); });
    double prev = std::numeric_limits<double>::infinity();
    for (double m : {0.0, 1.0, 10.0, 100.0, 1000.0}) {
        const double nrm = l2_norm(eigen_oracle(y0, g, 1.0, m, 0.01).values, g.h());
        EXPECT_LT(nrm, prev);
        prev = nrm;
    }
    EXPECT_LT(prev, 1e-5);
}

TEST(Subdomain, ZeroDataZeroTraces) {
    State y0{std::vector<double>(30, 0.0), 0.0};
    const auto traj = subdomain_solve(y0, 0.2, 0.7, constant_law(1.0), {}, {}, 0.1);
    EXPECT_EQ(traj.sup_abs(), 0.0);
}

TEST(Subdomain, FirstModeDecayRate) {
    const double a = 0.4, b = 0.9;
    const auto sub = build_interval_grid(a, b, 99);
    const auto y0 = sample_state(sub, [&](double x) { return std::sin(kPi * (x - a) / (b - a)); });
    SolverConfig cfg;
    cfg.dt = 1e-5;
    const double T = 0.02;
    const auto traj = subdomain_solve(y0, a, b, constant_law(1.0), {}, {}, T, cfg);
    const double rate = -std::log(l2_norm(traj.final().values, sub.h()) / l2_norm(y0.values, sub.h())) / T;
    EXPECT_NEAR(kPi * kPi / 0.25, 39.48, 0.01);
    EXPECT_NEAR(rate, kPi * kPi / 0.25, 0.05);
}

TEST(Subdomain, NonnegativeTracesDominateZeroTraces) {
    const double a = 0.3, b = 0.8;
    const auto sub = build_interval_grid(a, b, 49);
    const auto y0 = sample_state(sub, [&](double x) { return std::sin(kPi * (x - a) / (b - a)); });
    const auto law = make_quasilinear([](double y) { return 1.0 + 0.5 / (1.0 + y * y); }, -3, 3);
    const auto base = subdomain_solve(y0, a, b, law, {}, {}, 0.05);
    const auto lifted = subdomain_solve(y0, a, b, law, [](double t) { return 0.2 * t; },
                                        [](double t) { return std::sin(10 * t) * std::sin(10 * t); }, 0.05);
    ASSERT_EQ(base.size(), lifted.size());
    for (std::size_t k = 0; k < base.size(); ++k) {
        for (std::size_t i = 0; i < base.states[k].values.size(); ++i) {
            EXPECT_LE(base.states[k].values[i], lifted.states[k].values[i] + 1e-12);
        }
    }
}
