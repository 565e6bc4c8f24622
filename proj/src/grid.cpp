#include "mobilectl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mobilectl/error.hpp"

namespace mobilectl {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::Nonconvergence: return "nonconvergence";
        case ErrorKind::InfeasibleDecomposition: return "infeasible-decomposition";
        case ErrorKind::StageInfeasible: return "stage-infeasible";
        case ErrorKind::ControlInfeasible: return "control-infeasible";
        case ErrorKind::LiftingInfeasible: return "lifting-infeasible";
        case ErrorKind::BallViolation: return "ball-violation";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

SpatialGrid build_interval_grid(double a, double b, int n) {
    if (n < 2) {
        throw_invalid("grid needs at least 2 interior nodes, got " + std::to_string(n));
    }
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
        throw_invalid("grid interval must satisfy a < b");
    }
    SpatialGrid g;
    g.n_ = n;
    g.a_ = a;
    g.b_ = b;
    g.h_ = (b - a) / static_cast<double>(n + 1);
    g.nodes_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        g.nodes_[static_cast<std::size_t>(i)] = a + (i + 1) * g.h_;
    }
    return g;
}

SpatialGrid build_grid(int n) { return build_interval_grid(0.0, 1.0, n); }

int SpatialGrid::nearest_index(double x) const {
    const int i = static_cast<int>(std::lround((x - a_) / h_)) - 1;
    return std::clamp(i, 0, n_ - 1);
}

}  // namespace mobilectl
