#pragma once

#include <functional>
#include <variant>

namespace mobilectl {

using ScalarFn = std::function<double(double)>;
using SpaceTimeFn = std::function<double(double x, double t)>;

/// Diffusion coefficient a(y) with bounds certified on a declared state range.
struct QuasilinearLaw {
    ScalarFn a;
    ScalarFn a_prime;  // exact derivative if supplied, otherwise a central difference
    double state_lo = -1.0;
    double state_hi = 1.0;
    double a_min = 0.0;
    double a_max = 0.0;
    double a_d1_max = 0.0;
    double a_d2_max = 0.0;

    double derivative(double y) const;
};

/// Frozen space-time coefficient b(x,t) >= rho with sampled sup-norms on
/// [0,1] x [t_lo, t_hi].
struct FrozenLaw {
    SpaceTimeFn b;
    double rho = 0.0;
    double b_sup = 0.0;
    double bt_sup = 0.0;
    double bx_sup = 0.0;
    double b0_sup = 0.0;  // sup over t of |b(0,t)|
    double t_lo = 0.0;
    double t_hi = 0.0;
    int samples_x = 0;
    int samples_t = 0;
    bool constant = false;
    double constant_value = 0.0;

    double operator()(double x, double t) const { return constant ? constant_value : b(x, t); }
};

using DiffusionLaw = std::variant<QuasilinearLaw, FrozenLaw>;

/// Samples a and its first two derivatives on [lo, hi] (4001 points) and
/// refuses the law when inf a <= 0 or a derivative is not finite.
QuasilinearLaw make_quasilinear(ScalarFn a, double lo, double hi, ScalarFn a_prime = {});

/// Samples b on a (samples_x+1) x (samples_t+1) lattice. If rho > 0 it is
/// checked against the samples; otherwise rho is the sampled minimum.
FrozenLaw make_frozen(SpaceTimeFn b, double t_lo, double t_hi, int samples_x = 804,
                      int samples_t = 400, double rho = 0.0);

FrozenLaw constant_law(double b);

/// Sampling refinement factor applied to grid resolution when certifying fields.
inline constexpr int kSamplingRefinement = 4;

}  // namespace mobilectl
