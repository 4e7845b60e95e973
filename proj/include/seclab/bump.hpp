#pragma once

#include <cmath>
#include <stdexcept>

namespace seclab {

/// Even C-infinity bump: 1 on [-plateau_end, plateau_end], 0 outside
/// [-support_end, support_end], monotone in between.
struct BumpSpec {
    double plateau_end = 2.0;
    double support_end = 3.0;

    void validate() const
    {
        if (!(plateau_end > 0.0) || !(support_end > plateau_end))
            throw std::invalid_argument("bump: need 0 < plateau_end < support_end");
    }
};

/// Value with first and second derivative.
struct Jet {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

/// s(t) = e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)}), rising from 0 at t<=0 to 1 at t>=1.
inline Jet smooth_step(double t)
{
    if (t <= 0.0) return {0.0, 0.0, 0.0};
    if (t >= 1.0) return {1.0, 0.0, 0.0};
    const double u = 1.0 - t;
    const double phi = 1.0 / t - 1.0 / u;
    double s;
    if (phi > 0.0) {
        const double e = std::exp(-phi);
        s = e / (1.0 + e);
    } else {
        s = 1.0 / (1.0 + std::exp(phi));
    }
    const double w = s * (1.0 - s);
    const double dphi = -1.0 / (t * t) - 1.0 / (u * u);
    const double ddphi = 2.0 / (t * t * t) - 2.0 / (u * u * u);
    Jet j;
    j.v = s;
    j.d1 = -w * dphi;
    j.d2 = -(j.d1 * (1.0 - 2.0 * s) * dphi + w * ddphi);
    return j;
}

inline Jet bump_jet(const BumpSpec& b, double t)
{
    const double a = std::abs(t);
    const double width = b.support_end - b.plateau_end;
    const Jet s = smooth_step((a - b.plateau_end) / width);
    const double sg = t < 0.0 ? -1.0 : 1.0;
    return {1.0 - s.v, -s.d1 * sg / width, -s.d2 / (width * width)};
}

inline double bump_eval(const BumpSpec& b, double t) { return bump_jet(b, t).v; }
inline double bump_deriv(const BumpSpec& b, double t) { return bump_jet(b, t).d1; }

/// xi_0: plateau 2, support 3.
inline BumpSpec default_xi0() { return {2.0, 3.0}; }
/// xi_1, applied to the squared fibre norm: plateau 4, support 9.
inline BumpSpec default_xi1() { return {4.0, 9.0}; }

/// Gluing weight psi(u) = 1 - B(u - 1/2): 1 within eps/3 of the ends of
/// [0,1], 0 on [eps/2, 1 - eps/2].
inline Jet glue_weight(double eps, double u)
{
    const BumpSpec b{0.5 - eps / 2.0, 0.5 - eps / 3.0};
    const Jet j = bump_jet(b, u - 0.5);
    return {1.0 - j.v, -j.d1, -j.d2};
}

/// Speed factor zeta(u) = 1 - zeta0 B'(u - 1/2): 1 - zeta0 on [2 eps, 1 - 2 eps],
/// 1 within eps of the ends.
inline Jet slowdown_factor(double eps, double zeta0, double u)
{
    if (zeta0 == 0.0) return {1.0, 0.0, 0.0};
    const BumpSpec b{0.5 - 2.0 * eps, 0.5 - eps};
    const Jet j = bump_jet(b, u - 0.5);
    return {1.0 - zeta0 * j.v, -zeta0 * j.d1, -zeta0 * j.d2};
}

} // namespace seclab
