#pragma once

#include <span>
#include <vector>

namespace mobilectl {

/// Tridiagonal system: lower[i] couples row i to i-1 (lower[0] unused),
/// upper[i] couples row i to i+1 (upper[n-1] unused).
struct Tridiagonal {
    std::vector<double> lower;
    std::vector<double> diag;
    std::vector<double> upper;

    explicit Tridiagonal(std::size_t n = 0) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}
    std::size_t size() const noexcept { return diag.size(); }

    /// y = A x
    void multiply(std::span<const double> x, std::span<double> y) const;

    /// True when the off-diagonals are nonpositive (Z-matrix pattern).
    bool is_z_matrix() const;
};

struct ThomasResult {
    bool ok = false;
    /// Smallest elimination pivot. For a Z-matrix, all pivots > 0 iff
    /// the matrix is a nonsingular M-matrix (nonnegative inverse).
    double min_pivot = 0.0;
};

/// Thomas algorithm. rhs is overwritten with the solution.
ThomasResult thomas_solve(const Tridiagonal& a, std::span<double> rhs);

/// Elimination pivots only, no solve.
double thomas_min_pivot(const Tridiagonal& a);

}  // namespace mobilectl
