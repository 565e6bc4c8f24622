#pragma once

#include <span>
#include <vector>

namespace mobilectl {

/// Uniform mesh of an interval (default (0,1)) with n interior nodes.
/// Boundary values are never stored; Dirichlet data is eliminated.
class SpatialGrid {
public:
    SpatialGrid() = default;

    int n() const noexcept { return n_; }
    double h() const noexcept { return h_; }
    double left() const noexcept { return a_; }
    double right() const noexcept { return b_; }
    double length() const noexcept { return b_ - a_; }
    std::span<const double> nodes() const noexcept { return nodes_; }
    double node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }

    /// Index of the node closest to x, clamped to [0, n-1].
    int nearest_index(double x) const;

    friend SpatialGrid build_interval_grid(double a, double b, int n);

private:
    int n_ = 0;
    double h_ = 0.0;
    double a_ = 0.0;
    double b_ = 1.0;
    std::vector<double> nodes_;
};

/// Grid of (0,1) with spacing 1/(n+1). Throws invalid-argument for n < 2.
SpatialGrid build_grid(int n);

/// Uniform grid of (a,b) with n interior nodes, used by subinterval solves.
SpatialGrid build_interval_grid(double a, double b, int n);

}  // namespace mobilectl
