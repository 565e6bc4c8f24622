#pragma once

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mobilectl/grid.hpp"
#include "mobilectl/law.hpp"

namespace mobilectl {

/// Control support (r, r + l), open at both ends.
struct Window {
    double r = 0.0;
    double l = 1.0;

    Window() = default;
    Window(double origin, double length);

    double lo() const noexcept { return r; }
    double hi() const noexcept { return r + l; }
    bool contains(double x) const noexcept { return x > r && x < r + l; }
    friend bool operator==(const Window&, const Window&) = default;
};

/// Values on a node x time lattice; values[k][i] belongs to (nodes[i], times[k]).
/// Evaluation is exact at lattice points and piecewise linear in between.
struct SampledField {
    std::vector<double> nodes;
    std::vector<double> times;
    std::vector<std::vector<double>> values;

    double operator()(double x, double t) const;
    double min_value() const;
    double max_value() const;
};

/// Scalar field of (x, t): either a closure or a sample table. Default is zero.
class Field {
public:
    Field() = default;
    explicit Field(SpaceTimeFn fn) : fn_(std::move(fn)) {}
    explicit Field(SampledField table)
        : table_(std::make_shared<const SampledField>(std::move(table))) {}

    double operator()(double x, double t) const {
        if (table_) return (*table_)(x, t);
        return fn_ ? fn_(x, t) : 0.0;
    }
    const SampledField* table() const noexcept { return table_.get(); }
    bool is_zero() const noexcept { return !fn_ && !table_; }

private:
    SpaceTimeFn fn_;
    std::shared_ptr<const SampledField> table_;
};

struct Idle {};
/// Damping u = -m on the window.
struct ConstMultiplicative {
    double m = 0.0;
};
struct FieldMultiplicative {
    Field u;
};
/// Nonnegative source v on the window.
struct FieldAdditive {
    Field v;
};

using ControlPayload = std::variant<Idle, ConstMultiplicative, FieldMultiplicative, FieldAdditive>;

const char* payload_tag(const ControlPayload& p);

struct ControlStage {
    double t_start = 0.0;
    double t_end = 0.0;
    Window window;
    ControlPayload payload = Idle{};
};

/// Multiplicative (u) and additive (v) coefficients at the grid nodes.
struct ControlSlice {
    std::vector<double> u;
    std::vector<double> v;

    static ControlSlice zeros(int n) {
        return {std::vector<double>(static_cast<std::size_t>(n), 0.0),
                std::vector<double>(static_cast<std::size_t>(n), 0.0)};
    }
};

/// Contiguous, time-ordered stages; window origin constant within a stage.
class ControlSchedule {
public:
    ControlSchedule() = default;
    /// Validates ordering, contiguity and payload invariants.
    explicit ControlSchedule(std::vector<ControlStage> stages, std::string id = {});

    const std::vector<ControlStage>& stages() const noexcept { return stages_; }
    bool empty() const noexcept { return stages_.empty(); }
    double t_start() const;
    double t_end() const;
    const std::string& id() const noexcept { return id_; }
    void set_id(std::string id) { id_ = std::move(id); }

    /// Stage active at t; stage boundaries are right-continuous and the final
    /// end point belongs to the last stage.
    const ControlStage& active(double t) const;

    bool covers(double t0, double t1) const;

private:
    std::vector<ControlStage> stages_;
    std::string id_;
};

/// Payload evaluated at the nodes strictly inside the stage window.
ControlSlice evaluate_stage(const ControlStage& stage, const SpatialGrid& grid, double t);

/// Throws invalid-argument when t lies outside the schedule span.
ControlSlice evaluate_control(const ControlSchedule& schedule, const SpatialGrid& grid, double t);

/// Concatenation; the first must end exactly where the second begins.
ControlSchedule compose_schedules(const ControlSchedule& first, const ControlSchedule& second);

/// Smallest M with M * l >= 1.
int window_count(double l);

/// Windows (j-1) l for j < M and 1 - l for the last one.
std::vector<Window> sweep_window_sequence(double l, int M);
std::vector<Window> sweep_window_sequence(double l);

/// Samples a field on grid nodes x times.
SampledField sample_field(const Field& f, std::span<const double> nodes, std::vector<double> times);

/// Largest positive part of u over the stage, sampled at nodes and `time_samples` times.
double stage_max_positive_u(const ControlStage& stage, const SpatialGrid& grid, int time_samples = 16);

}  // namespace mobilectl
