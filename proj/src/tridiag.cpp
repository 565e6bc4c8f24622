#include "mobilectl/tridiag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mobilectl {

void Tridiagonal::multiply(std::span<const double> x, std::span<double> y) const {
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
        double s = diag[i] * x[i];
        if (i > 0) s += lower[i] * x[i - 1];
        if (i + 1 < n) s += upper[i] * x[i + 1];
        y[i] = s;
    }
}

bool Tridiagonal::is_z_matrix() const {
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && lower[i] > 0.0) return false;
        if (i + 1 < n && upper[i] > 0.0) return false;
    }
    return true;
}

ThomasResult thomas_solve(const Tridiagonal& a, std::span<double> rhs) {
    const std::size_t n = a.size();
    ThomasResult res;
    res.min_pivot = std::numeric_limits<double>::infinity();
    if (n == 0) {
        res.ok = true;
        return res;
    }
    std::vector<double> c(n, 0.0);
    double pivot = a.diag[0];
    res.min_pivot = pivot;
    if (pivot == 0.0 || !std::isfinite(pivot)) return res;
    c[0] = a.upper[0] / pivot;
    rhs[0] /= pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = a.diag[i] - a.lower[i] * c[i - 1];
        res.min_pivot = std::min(res.min_pivot, pivot);
        if (pivot == 0.0 || !std::isfinite(pivot)) return res;
        c[i] = (i + 1 < n) ? a.upper[i] / pivot : 0.0;
        rhs[i] = (rhs[i] - a.lower[i] * rhs[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    res.ok = true;
    return res;
}

double thomas_min_pivot(const Tridiagonal& a) {
    const std::size_t n = a.size();
    if (n == 0) return std::numeric_limits<double>::infinity();
    double pivot = a.diag[0];
    double min_pivot = pivot;
    for (std::size_t i = 1; i < n && pivot != 0.0; ++i) {
        const double c = a.upper[i - 1] / pivot;
        pivot = a.diag[i] - a.lower[i] * c;
        min_pivot = std::min(min_pivot, pivot);
    }
    return min_pivot;
}

}  // namespace mobilectl
