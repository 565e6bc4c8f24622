#include "mobilectl/nnls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mobilectl/error.hpp"

namespace mobilectl {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct Gram {
    std::size_t k;
    std::vector<double> g;  // row-major k x k

    void apply(std::span<const double> x, std::span<double> out) const {
        for (std::size_t r = 0; r < k; ++r) {
            const double* row = g.data() + r * k;
            double s = 0.0;
            for (std::size_t c = 0; c < k; ++c) s += row[c] * x[c];
            out[r] = s;
        }
    }
};

// In-place Cholesky of the k x k row-major matrix a; false if not positive definite.
bool cholesky(std::vector<double>& a, std::size_t k) {
    for (std::size_t j = 0; j < k; ++j) {
        double d = a[j * k + j];
        for (std::size_t p = 0; p < j; ++p) d -= a[j * k + p] * a[j * k + p];
        if (!(d > 0.0)) return false;
        d = std::sqrt(d);
        a[j * k + j] = d;
        for (std::size_t i = j + 1; i < k; ++i) {
            double s = a[i * k + j];
            for (std::size_t p = 0; p < j; ++p) s -= a[i * k + p] * a[j * k + p];
            a[i * k + j] = s / d;
        }
    }
    return true;
}

std::vector<double> cholesky_solve(const std::vector<double>& L, std::size_t k, std::vector<double> b) {
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t p = 0; p < i; ++p) b[i] -= L[i * k + p] * b[p];
        b[i] /= L[i * k + i];
    }
    for (std::size_t i = k; i-- > 0;) {
        for (std::size_t p = i + 1; p < k; ++p) b[i] -= L[p * k + i] * b[p];
        b[i] /= L[i * k + i];
    }
    return b;
}

// Minimise over the current support, walking back into x >= 0 whenever the
// unconstrained minimiser leaves it (the inner loop of Lawson-Hanson).
void polish_on_support(const Gram& G, const std::vector<double>& g, std::vector<double>& x, int rounds) {
    const std::size_t k = G.k;
    for (int round = 0; round < rounds; ++round) {
        std::vector<std::size_t> F;
        for (std::size_t i = 0; i < k; ++i)
            if (x[i] > 0.0) F.push_back(i);
        const std::size_t m = F.size();
        if (m == 0) return;
        std::vector<double> A(m * m), rhs(m);
        double dmax = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            rhs[r] = g[F[r]];
            for (std::size_t c = 0; c < m; ++c) A[r * m + c] = G.g[F[r] * k + F[c]];
            dmax = std::max(dmax, A[r * m + r]);
        }
        for (std::size_t r = 0; r < m; ++r) A[r * m + r] += 1e-14 * dmax;
        if (!cholesky(A, m)) return;
        const auto z = cholesky_solve(A, m, rhs);
        double alpha = 1.0;
        std::size_t hit = m;
        for (std::size_t r = 0; r < m; ++r) {
            if (z[r] <= 0.0) {
                const double a = x[F[r]] / (x[F[r]] - z[r]);
                if (a < alpha) {
                    alpha = a;
                    hit = r;
                }
            }
        }
        for (std::size_t r = 0; r < m; ++r) x[F[r]] = std::max(0.0, x[F[r]] + alpha * (z[r] - x[F[r]]));
        if (hit == m) return;
        x[F[hit]] = 0.0;
    }
}

}  // namespace

NnlsResult nnls_projected_gradient(const std::vector<std::vector<double>>& columns, std::span<const double> b,
                                   double weight, const NnlsOptions& opts) {
    if (!(weight > 0.0)) throw_invalid("nnls weight must be positive");
    if (opts.max_iter < 1) throw_invalid("nnls needs at least one iteration");
    const std::size_t k = columns.size();
    for (const auto& c : columns) {
        if (c.size() != b.size()) throw_invalid("nnls column length differs from target length");
    }
    NnlsResult res;
    res.x.assign(k, 0.0);
    const double bb = weight * dot(b, b);
    res.residual = std::sqrt(bb);
    if (k == 0 || bb == 0.0) {
        res.converged = true;
        return res;
    }

    Gram G{k, std::vector<double>(k * k)};
    std::vector<double> g(k);
    for (std::size_t r = 0; r < k; ++r) {
        g[r] = weight * dot(columns[r], b);
        for (std::size_t c = r; c < k; ++c) {
            const double v = weight * dot(columns[r], columns[c]);
            G.g[r * k + c] = v;
            G.g[c * k + r] = v;
        }
    }
    double gscale = 0.0;
    double lmax = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
        gscale = std::max(gscale, std::abs(g[r]));
        double row = 0.0;
        for (std::size_t c = 0; c < k; ++c) row += std::abs(G.g[r * k + c]);
        lmax = std::max(lmax, row);
    }
    if (lmax == 0.0 || gscale == 0.0) {
        res.converged = true;
        return res;
    }

    auto& x = res.x;
    std::vector<double> Gx(k, 0.0), grad(k), grad_prev(k), x_prev(k), d(k), Gd(k);
    // residual^2 = x'Gx - 2 g'x + b'Wb
    auto objective = [&]() { return std::max(0.0, dot(x, Gx) - 2.0 * dot(g, x) + bb); };
    double alpha = 1.0 / lmax;
    const double target_sq = opts.target_residual * opts.target_residual;
    double f = bb;
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        for (std::size_t i = 0; i < k; ++i) grad[i] = Gx[i] - g[i];
        double pg = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double step = std::max(0.0, x[i] - grad[i]) - x[i];
            pg = std::max(pg, std::abs(step));
        }
        if (pg <= opts.rel_tol * gscale) {
            res.converged = true;
            break;
        }
        if (target_sq > 0.0 && f <= target_sq) {
            res.converged = true;
            break;
        }
        if (it > 0) {
            double ss = 0.0, sy = 0.0, yy = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                const double s = x[i] - x_prev[i];
                const double y = grad[i] - grad_prev[i];
                ss += s * s;
                sy += s * y;
                yy += y * y;
            }
            if (sy > 0.0) {
                alpha = (it % 2 == 0) ? ss / sy : sy / yy;
            } else {
                alpha = 1.0 / lmax;
            }
            alpha = std::clamp(alpha, 1e-3 / lmax, 1e12 / lmax);
        }
        for (std::size_t i = 0; i < k; ++i) d[i] = std::max(0.0, x[i] - alpha * grad[i]) - x[i];
        G.apply(d, Gd);
        const double gd = dot(grad, d);
        const double dGd = dot(d, Gd);
        if (!(gd < 0.0)) {
            res.converged = true;
            break;
        }
        const double lambda = dGd > 0.0 ? std::min(1.0, -gd / dGd) : 1.0;
        x_prev = x;
        grad_prev = grad;
        for (std::size_t i = 0; i < k; ++i) {
            x[i] = std::max(0.0, x[i] + lambda * d[i]);
            Gx[i] += lambda * Gd[i];
        }
        f = objective();
    }
    res.iterations = it;
    if (!(target_sq > 0.0 && f <= target_sq) && opts.polish_rounds > 0) {
        auto trial = x;
        polish_on_support(G, g, trial, opts.polish_rounds);
        std::vector<double> Gt(k);
        G.apply(trial, Gt);
        const double ft = std::max(0.0, dot(trial, Gt) - 2.0 * dot(g, trial) + bb);
        if (ft < f) x = std::move(trial);
    }
    // Recompute the residual directly rather than from the Gram expansion.
    std::vector<double> r(b.begin(), b.end());
    for (std::size_t c = 0; c < k; ++c) {
        if (x[c] == 0.0) continue;
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= x[c] * columns[c][i];
    }
    res.residual = std::sqrt(weight * dot(r, r));
    return res;
}

}  // namespace mobilectl
