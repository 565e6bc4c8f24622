#include "mobilectl/law.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "mobilectl/error.hpp"

namespace mobilectl {

double QuasilinearLaw::derivative(double y) const {
    if (a_prime) return a_prime(y);
    const double step = 1e-6 * std::max(1.0, std::abs(y));
    return (a(y + step) - a(y - step)) / (2.0 * step);
}

QuasilinearLaw make_quasilinear(ScalarFn a, double lo, double hi, ScalarFn a_prime) {
    if (!a) throw_invalid("quasilinear law needs a coefficient function");
    if (!(lo < hi)) throw_invalid("quasilinear state range must satisfy lo < hi");
    QuasilinearLaw law;
    law.a = std::move(a);
    law.a_prime = std::move(a_prime);
    law.state_lo = lo;
    law.state_hi = hi;

    constexpr int kSamples = 4000;
    const double dy = (hi - lo) / kSamples;
    std::vector<double> vals(kSamples + 1);
    law.a_min = std::numeric_limits<double>::infinity();
    law.a_max = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= kSamples; ++k) {
        const double y = lo + k * dy;
        const double v = law.a(y);
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "diffusion coefficient a(" << y << ") is not finite";
            throw_invalid(os.str());
        }
        vals[static_cast<std::size_t>(k)] = v;
        law.a_min = std::min(law.a_min, v);
        law.a_max = std::max(law.a_max, v);
    }
    if (!(law.a_min > 0.0)) {
        std::ostringstream os;
        os << "inf a = " << law.a_min << " <= 0 on [" << lo << ", " << hi
           << "]: the coefficient must stay bounded away from zero";
        throw_invalid(os.str());
    }
    for (int k = 0; k <= kSamples; ++k) {
        law.a_d1_max = std::max(law.a_d1_max, std::abs(law.derivative(lo + k * dy)));
    }
    for (int k = 1; k < kSamples; ++k) {
        const auto i = static_cast<std::size_t>(k);
        const double d2 = (vals[i + 1] - 2.0 * vals[i] + vals[i - 1]) / (dy * dy);
        law.a_d2_max = std::max(law.a_d2_max, std::abs(d2));
    }
    return law;
}

FrozenLaw make_frozen(SpaceTimeFn b, double t_lo, double t_hi, int samples_x, int samples_t,
                      double rho) {
    if (!b) throw_invalid("frozen law needs a coefficient field");
    if (!(t_hi >= t_lo)) throw_invalid("frozen law horizon must satisfy t_lo <= t_hi");
    samples_x = std::max(samples_x, 2);
    samples_t = std::max(samples_t, 1);
    FrozenLaw law;
    law.b = std::move(b);
    law.t_lo = t_lo;
    law.t_hi = t_hi;
    law.samples_x = samples_x;
    law.samples_t = samples_t;

    const double dx = 1.0 / samples_x;
    const double dtt = (t_hi > t_lo) ? (t_hi - t_lo) / samples_t : 0.0;
    const int nt = (t_hi > t_lo) ? samples_t : 0;
    std::vector<double> prev_row;
    std::vector<double> row(static_cast<std::size_t>(samples_x + 1));
    double bmin = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= nt; ++k) {
        const double t = t_lo + k * dtt;
        for (int i = 0; i <= samples_x; ++i) {
            const double v = law.b(i * dx, t);
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << "coefficient b(" << i * dx << ", " << t << ") is not finite";
                throw_invalid(os.str());
            }
            row[static_cast<std::size_t>(i)] = v;
            bmin = std::min(bmin, v);
            law.b_sup = std::max(law.b_sup, std::abs(v));
            if (i > 0) {
                law.bx_sup = std::max(law.bx_sup, std::abs(v - row[static_cast<std::size_t>(i - 1)]) / dx);
            }
        }
        law.b0_sup = std::max(law.b0_sup, std::abs(row[0]));
        if (!prev_row.empty()) {
            for (int i = 0; i <= samples_x; ++i) {
                const auto ii = static_cast<std::size_t>(i);
                law.bt_sup = std::max(law.bt_sup, std::abs(row[ii] - prev_row[ii]) / dtt);
            }
        }
        prev_row = row;
    }
    if (rho > 0.0) {
        if (bmin < rho) {
            std::ostringstream os;
            os << "sampled min b = " << bmin << " violates the ellipticity floor rho = " << rho;
            throw_invalid(os.str());
        }
        law.rho = rho;
    } else {
        law.rho = bmin;
    }
    if (!(law.rho > 0.0)) {
        std::ostringstream os;
        os << "frozen coefficient is not uniformly elliptic (min b = " << bmin << ")";
        throw_invalid(os.str());
    }
    return law;
}

FrozenLaw constant_law(double b) {
    if (!(b > 0.0) || !std::isfinite(b)) throw_invalid("constant diffusion must be positive");
    FrozenLaw law;
    law.b = [b](double, double) { return b; };
    law.rho = b;
    law.b_sup = b;
    law.b0_sup = b;
    law.t_hi = std::numeric_limits<double>::infinity();
    law.constant = true;
    law.constant_value = b;
    return law;
}

}  // namespace mobilectl
