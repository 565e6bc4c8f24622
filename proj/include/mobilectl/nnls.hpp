#pragma once

#include <span>
#include <vector>

namespace mobilectl {

struct NnlsOptions {
    int max_iter = 20000;
    /// Stop when the projected gradient falls below rel_tol * |A^T W b|_inf.
    double rel_tol = 1e-12;
    /// Stop as soon as the residual is at most this value (0 disables).
    double target_residual = 0.0;
    /// Subspace refinement on the final support (skipped after an early stop).
    int polish_rounds = 20;
};

struct NnlsResult {
    std::vector<double> x;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// min |A x - b|_W subject to x >= 0, with |r|_W^2 = weight * sum r_i^2 and A
/// given by its columns. Projected gradient with Barzilai-Borwein step
/// lengths (alternating both formulas) and an exact line search along the
/// projected direction, which keeps the iteration monotone. A final
/// active-set pass on the support is kept only if it lowers the residual.
NnlsResult nnls_projected_gradient(const std::vector<std::vector<double>>& columns, std::span<const double> b,
                                   double weight, const NnlsOptions& opts = {});

}  // namespace mobilectl
