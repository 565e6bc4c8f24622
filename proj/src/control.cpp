#include "mobilectl/control.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mobilectl/error.hpp"

namespace mobilectl {

namespace {

double time_tol(double t) { return 1e-12 * std::max(1.0, std::abs(t)); }

// Index k with times[k] <= t < times[k+1] plus interpolation weight.
std::pair<std::size_t, double> bracket(const std::vector<double>& axis, double t) {
    if (axis.size() == 1 || t <= axis.front()) return {0, 0.0};
    if (t >= axis.back()) return {axis.size() - 1, 0.0};
    auto it = std::upper_bound(axis.begin(), axis.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - axis.begin()) - 1;
    if (axis[k] == t) return {k, 0.0};
    return {k, (t - axis[k]) / (axis[k + 1] - axis[k])};
}

}  // namespace

Window::Window(double origin, double length) : r(origin), l(length) {
    if (!(length > 0.0) || length > 1.0 + 1e-12) {
        throw_invalid("window length must lie in (0, 1]");
    }
    if (origin < -1e-12 || origin + length > 1.0 + 1e-12) {
        std::ostringstream os;
        os << "window (" << origin << ", " << origin + length << ") leaves (0, 1)";
        throw_invalid(os.str());
    }
}

double SampledField::operator()(double x, double t) const {
    if (nodes.empty() || times.empty()) return 0.0;
    const auto [k, wt] = bracket(times, t);
    const auto [i, wx] = bracket(nodes, x);
    auto at = [&](std::size_t kk) {
        const auto& row = values[kk];
        if (wx == 0.0) return row[i];
        return (1.0 - wx) * row[i] + wx * row[i + 1];
    };
    if (wt == 0.0) return at(k);
    return (1.0 - wt) * at(k) + wt * at(k + 1);
}

double SampledField::min_value() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& row : values)
        for (double v : row) m = std::min(m, v);
    return m;
}

double SampledField::max_value() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& row : values)
        for (double v : row) m = std::max(m, v);
    return m;
}

const char* payload_tag(const ControlPayload& p) {
    struct Visitor {
        const char* operator()(const Idle&) const { return "idle"; }
        const char* operator()(const ConstMultiplicative&) const { return "const_multiplicative"; }
        const char* operator()(const FieldMultiplicative&) const { return "field_multiplicative"; }
        const char* operator()(const FieldAdditive&) const { return "field_additive"; }
    };
    return std::visit(Visitor{}, p);
}

ControlSchedule::ControlSchedule(std::vector<ControlStage> stages, std::string id)
    : stages_(std::move(stages)), id_(std::move(id)) {
    for (std::size_t k = 0; k < stages_.size(); ++k) {
        auto& s = stages_[k];
        if (!(s.t_start < s.t_end)) {
            std::ostringstream os;
            os << "stage " << k << " has empty interval [" << s.t_start << ", " << s.t_end << "]";
            throw_invalid(os.str());
        }
        if (const auto* cm = std::get_if<ConstMultiplicative>(&s.payload); cm && !(cm->m >= 0.0)) {
            throw_invalid("constant damping m must be nonnegative");
        }
        if (const auto* fa = std::get_if<FieldAdditive>(&s.payload)) {
            if (const auto* tab = fa->v.table(); tab && tab->min_value() < 0.0) {
                throw_invalid("additive payload must be nonnegative");
            }
        }
        if (k > 0) {
            const double prev_end = stages_[k - 1].t_end;
            if (std::abs(s.t_start - prev_end) > time_tol(prev_end)) {
                std::ostringstream os;
                os << "stages " << k - 1 << " and " << k << (s.t_start > prev_end ? " leave a gap" : " overlap")
                   << " at t = " << prev_end;
                throw_invalid(os.str());
            }
            s.t_start = prev_end;
        }
    }
}

double ControlSchedule::t_start() const {
    if (stages_.empty()) throw_invalid("empty schedule has no span");
    return stages_.front().t_start;
}

double ControlSchedule::t_end() const {
    if (stages_.empty()) throw_invalid("empty schedule has no span");
    return stages_.back().t_end;
}

bool ControlSchedule::covers(double t0, double t1) const {
    if (stages_.empty()) return false;
    return t_start() <= t0 + time_tol(t0) && t_end() >= t1 - time_tol(t1);
}

const ControlStage& ControlSchedule::active(double t) const {
    if (stages_.empty() || t < t_start() - time_tol(t) || t > t_end() + time_tol(t)) {
        std::ostringstream os;
        os << "t = " << t << " is outside the schedule span";
        throw_invalid(os.str());
    }
    auto it = std::upper_bound(stages_.begin(), stages_.end(), t,
                               [](double tt, const ControlStage& s) { return tt < s.t_start; });
    if (it == stages_.begin()) return stages_.front();
    return *(it - 1);
}

ControlSlice evaluate_stage(const ControlStage& stage, const SpatialGrid& grid, double t) {
    ControlSlice out = ControlSlice::zeros(grid.n());
    if (std::holds_alternative<Idle>(stage.payload)) return out;
    for (int i = 0; i < grid.n(); ++i) {
        const double x = grid.node(i);
        if (!stage.window.contains(x)) continue;
        const auto ii = static_cast<std::size_t>(i);
        if (const auto* cm = std::get_if<ConstMultiplicative>(&stage.payload)) {
            out.u[ii] = -cm->m;
        } else if (const auto* fm = std::get_if<FieldMultiplicative>(&stage.payload)) {
            out.u[ii] = fm->u(x, t);
        } else if (const auto* fa = std::get_if<FieldAdditive>(&stage.payload)) {
            const double v = fa->v(x, t);
            if (v < 0.0) {
                std::ostringstream os;
                os << "additive payload is negative (" << v << ") at x = " << x << ", t = " << t;
                throw_invalid(os.str());
            }
            out.v[ii] = v;
        }
    }
    return out;
}

ControlSlice evaluate_control(const ControlSchedule& schedule, const SpatialGrid& grid, double t) {
    return evaluate_stage(schedule.active(t), grid, t);
}

ControlSchedule compose_schedules(const ControlSchedule& first, const ControlSchedule& second) {
    if (first.empty()) return second;
    if (second.empty()) return first;
    std::vector<ControlStage> stages = first.stages();
    if (std::abs(second.t_start() - first.t_end()) > time_tol(first.t_end())) {
        std::ostringstream os;
        os << "cannot compose: first ends at " << first.t_end() << " but second starts at "
           << second.t_start();
        throw_invalid(os.str());
    }
    stages.insert(stages.end(), second.stages().begin(), second.stages().end());
    std::string id = first.id();
    if (!second.id().empty()) id = id.empty() ? second.id() : id + "+" + second.id();
    return ControlSchedule(std::move(stages), std::move(id));
}

int window_count(double l) {
    if (!(l > 0.0) || l > 1.0 + 1e-12) throw_invalid("window length must lie in (0, 1]");
    return std::max(1, static_cast<int>(std::ceil(1.0 / l - 1e-12)));
}

std::vector<Window> sweep_window_sequence(double l, int M) {
    if (M < 1 || M * l < 1.0 - 1e-12) {
        std::ostringstream os;
        os << "M = " << M << " windows of length " << l << " do not cover (0, 1)";
        throw_invalid(os.str());
    }
    if (M != window_count(l)) throw_invalid("M must be the smallest integer with M * l >= 1");
    std::vector<Window> out;
    out.reserve(static_cast<std::size_t>(M));
    for (int j = 1; j < M; ++j) out.emplace_back((j - 1) * l, l);
    out.emplace_back(std::max(0.0, 1.0 - l), std::min(l, 1.0));
    return out;
}

std::vector<Window> sweep_window_sequence(double l) { return sweep_window_sequence(l, window_count(l)); }

SampledField sample_field(const Field& f, std::span<const double> nodes, std::vector<double> times) {
    SampledField out;
    out.nodes.assign(nodes.begin(), nodes.end());
    out.times = std::move(times);
    out.values.reserve(out.times.size());
    for (double t : out.times) {
        std::vector<double> row(out.nodes.size());
        for (std::size_t i = 0; i < row.size(); ++i) row[i] = f(out.nodes[i], t);
        out.values.push_back(std::move(row));
    }
    return out;
}

double stage_max_positive_u(const ControlStage& stage, const SpatialGrid& grid, int time_samples) {
    const auto* fm = std::get_if<FieldMultiplicative>(&stage.payload);
    if (!fm) return 0.0;
    double m = 0.0;
    if (const auto* tab = fm->u.table()) return std::max(0.0, tab->max_value());
    for (int k = 0; k <= time_samples; ++k) {
        const double t = stage.t_start + (stage.t_end - stage.t_start) * k / time_samples;
        const auto slice = evaluate_stage(stage, grid, t);
        for (double u : slice.u) m = std::max(m, u);
    }
    return m;
}

}  // namespace mobilectl
