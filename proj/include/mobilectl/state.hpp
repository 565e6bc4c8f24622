#pragma once

#include <string>
#include <vector>

#include "mobilectl/grid.hpp"
#include "mobilectl/law.hpp"

namespace mobilectl {

/// Values at the interior nodes at one time level; boundary values are 0
/// (or the declared Dirichlet traces for subinterval solves).
struct State {
    std::vector<double> values;
    double time = 0.0;
};

State sample_state(const SpatialGrid& grid, const ScalarFn& f, double time = 0.0);

class Trajectory {
public:
    SpatialGrid grid;
    std::vector<State> states;
    double dt = 0.0;  // nominal step; stages may refine it
    DiffusionLaw law;
    std::string schedule_id;

    bool empty() const noexcept { return states.empty(); }
    std::size_t size() const noexcept { return states.size(); }
    const State& initial() const { return states.front(); }
    const State& final() const { return states.back(); }
    double t_start() const { return states.front().time; }
    double t_end() const { return states.back().time; }

    /// Linear interpolation in time, clamped to the stored span.
    std::vector<double> at(double t) const;

    /// States with time in [t0, t1] (inclusive, tolerance 1e-12).
    Trajectory slice(double t0, double t1) const;

    /// Appends other, dropping its first state when it duplicates our last.
    void append(const Trajectory& other);

    /// Space-time L2 distance, trapezoid in time on this trajectory's lattice.
    double l2qt_distance(const Trajectory& other) const;

    double sup_abs() const;
    double min_value() const;
};

}  // namespace mobilectl
