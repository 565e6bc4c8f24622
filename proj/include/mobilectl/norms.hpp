#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "mobilectl/grid.hpp"

namespace mobilectl {

// Discrete norms with zero Dirichlet data: the composite trapezoid rule
// reduces to h * sum over interior nodes.

inline double l2_norm_sq(std::span<const double> y, double h) {
    double s = 0.0;
    for (double v : y) s += v * v;
    return h * s;
}

inline double l2_norm(std::span<const double> y, double h) { return std::sqrt(l2_norm_sq(y, h)); }

inline double l2_distance(std::span<const double> a, std::span<const double> b, double h) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(h * s);
}

/// h * sum of y_i^2 over nodes strictly inside (lo, hi).
inline double window_norm_sq(std::span<const double> y, const SpatialGrid& grid, double lo, double hi) {
    double s = 0.0;
    for (int i = 0; i < grid.n(); ++i) {
        const double x = grid.node(i);
        if (x > lo && x < hi) s += y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
    }
    return grid.h() * s;
}

inline double sup_norm(std::span<const double> y) {
    double m = 0.0;
    for (double v : y) m = std::max(m, std::abs(v));
    return m;
}

/// L2 norm of the forward-difference gradient, boundary zeros included.
inline double gradient_norm(std::span<const double> y, double h) {
    double s = 0.0;
    double prev = 0.0;
    for (double v : y) {
        const double d = (v - prev) / h;
        s += d * d;
        prev = v;
    }
    s += (prev / h) * (prev / h);
    return std::sqrt(h * s);
}

}  // namespace mobilectl
