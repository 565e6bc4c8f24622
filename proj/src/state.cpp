#include "mobilectl/state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mobilectl/error.hpp"

namespace mobilectl {

State sample_state(const SpatialGrid& grid, const ScalarFn& f, double time) {
    State s;
    s.time = time;
    s.values.resize(static_cast<std::size_t>(grid.n()));
    for (int i = 0; i < grid.n(); ++i) s.values[static_cast<std::size_t>(i)] = f(grid.node(i));
    return s;
}

std::vector<double> Trajectory::at(double t) const {
    if (states.empty()) throw_invalid("empty trajectory");
    if (t <= states.front().time) return states.front().values;
    if (t >= states.back().time) return states.back().values;
    auto it = std::lower_bound(states.begin(), states.end(), t,
                               [](const State& s, double tt) { return s.time < tt; });
    if (it->time == t) return it->values;
    const State& hi = *it;
    const State& lo = *(it - 1);
    const double w = (t - lo.time) / (hi.time - lo.time);
    std::vector<double> out(lo.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - w) * lo.values[i] + w * hi.values[i];
    return out;
}

Trajectory Trajectory::slice(double t0, double t1) const {
    Trajectory out;
    out.grid = grid;
    out.dt = dt;
    out.law = law;
    out.schedule_id = schedule_id;
    const double tol = 1e-12 * std::max(1.0, std::abs(t1));
    for (const auto& s : states) {
        if (s.time >= t0 - tol && s.time <= t1 + tol) out.states.push_back(s);
    }
    return out;
}

void Trajectory::append(const Trajectory& other) {
    if (other.states.empty()) return;
    std::size_t first = 0;
    if (!states.empty()) {
        const double tol = 1e-12 * std::max(1.0, std::abs(states.back().time));
        if (std::abs(other.states.front().time - states.back().time) <= tol) first = 1;
        else if (other.states.front().time < states.back().time) {
            throw_invalid("appended trajectory starts before the current end");
        }
    }
    states.insert(states.end(), other.states.begin() + static_cast<std::ptrdiff_t>(first),
                  other.states.end());
}

double Trajectory::l2qt_distance(const Trajectory& other) const {
    if (states.size() < 2) return 0.0;
    const double h = grid.h();
    auto dist_sq = [&](std::size_t k) {
        const auto& a = states[k];
        const bool same = k < other.states.size() && other.states[k].time == a.time;
        const std::vector<double> b = same ? other.states[k].values : other.at(a.time);
        double s = 0.0;
        for (std::size_t i = 0; i < a.values.size(); ++i) {
            const double d = a.values[i] - b[i];
            s += d * d;
        }
        return h * s;
    };
    double total = 0.0;
    double prev = dist_sq(0);
    for (std::size_t k = 1; k < states.size(); ++k) {
        const double cur = dist_sq(k);
        total += 0.5 * (prev + cur) * (states[k].time - states[k - 1].time);
        prev = cur;
    }
    return std::sqrt(total);
}

double Trajectory::sup_abs() const {
    double m = 0.0;
    for (const auto& s : states)
        for (double v : s.values) m = std::max(m, std::abs(v));
    return m;
}

double Trajectory::min_value() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : states)
        for (double v : s.values) m = std::min(m, v);
    return m;
}

}  // namespace mobilectl
