#pragma once

// Solenoid base: an expanding integer endomorphism g of T^k and the fibred
// contraction F0(theta, d) = (g theta, alpha d + beta c(theta)) on T^k x D.
// Torus coordinates are 64-bit fixed point, so g is exact mod 1.

#include "seclab/compound.hpp"
#include "seclab/model.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace seclab {

inline constexpr double kTwoPow64 = 18446744073709551616.0;

inline double torus_to_unit(std::uint64_t x) { return static_cast<double>(x) / kTwoPow64; }

/// Signed offset from 0 in [-1/2, 1/2).
inline double torus_offset(std::uint64_t x) { return static_cast<double>(static_cast<std::int64_t>(x)) / kTwoPow64; }

inline std::uint64_t torus_from_unit(double t)
{
    t -= std::floor(t);
    const long double s = static_cast<long double>(t) * 18446744073709551616.0L;
    return s >= 18446744073709551615.0L ? ~std::uint64_t{0} : static_cast<std::uint64_t>(s);
}

/// Adds a real offset (in turns) to a torus coordinate, wrapping.
inline std::uint64_t torus_shift(std::uint64_t x, double delta)
{
    const long double s = std::nearbyint(static_cast<long double>(delta) * 18446744073709551616.0L);
    return x + static_cast<std::uint64_t>(static_cast<std::int64_t>(s));
}

struct SolenoidPoint {
    std::vector<std::uint64_t> theta;
    Eigen::Vector2d disk = Eigen::Vector2d::Zero();

    int k() const { return static_cast<int>(theta.size()); }
    std::vector<double> theta_unit() const
    {
        std::vector<double> t;
        for (auto x : theta) t.push_back(torus_to_unit(x));
        return t;
    }
    bool operator==(const SolenoidPoint&) const = default;
};

struct SolenoidSpec {
    int k = 1;
    Eigen::MatrixXi expansion = 2 * Eigen::MatrixXi::Identity(1, 1);
    double alpha = 0.1;
    double beta = 0.5;
    double disk_radius = 1.0;

    static SolenoidSpec doubling(int k)
    {
        SolenoidSpec s;
        s.k = k;
        s.expansion = 2 * Eigen::MatrixXi::Identity(k, k);
        s.disk_radius = std::max(1.0, s.beta * s.weight_sum() / (1.0 - s.alpha));
        return s;
    }

    double weight_sum() const
    {
        double w = 0.0;
        for (int j = 0; j < k; ++j) w += weight(j);
        return w;
    }

    /// Torus dimension matching the horizontal chart of a model.
    static SolenoidSpec for_model(const ModelSpec& m) { return doubling(m.dim() - 1); }

    /// Weight of coordinate j (0-based) in the disk embedding.
    static double weight(int j) { return std::ldexp(1.0, -j); }

    RealVector expansion_singular_values() const
    {
        return singular_values(expansion.cast<double>());
    }
    double lambda0() const { return expansion_singular_values().minCoeff(); }
    double lambda1() const { return expansion_singular_values().maxCoeff(); }

    /// Number of low bits of g(theta) that carry no information from theta.
    int lost_bits() const
    {
        long mx = 1;
        for (int i = 0; i < k; ++i) {
            long s = 0;
            for (int j = 0; j < k; ++j) s += std::abs(static_cast<long>(expansion(i, j)));
            mx = std::max(mx, s);
        }
        int b = 0;
        while ((1L << b) < mx) ++b;
        return b;
    }

    void validate() const
    {
        if (k < 1) throw ConfigError("solenoid.k: must be positive");
        if (expansion.rows() != k || expansion.cols() != k)
            throw ConfigError("solenoid.expansion: must be a k x k integer matrix");
        if (!(lambda0() > 1.0)) throw ConfigError("solenoid.expansion: smallest singular value must exceed 1");
        if (!(alpha > 0.0 && alpha < std::exp(-0.4)))
            throw ConfigError("solenoid.alpha: must lie in (0, exp(-2/5))");
        if (!(beta > 0.0)) throw ConfigError("solenoid.beta: must be positive");
        if (!(alpha * disk_radius + beta * weight_sum() <= disk_radius * (1.0 + 1e-12)))
            throw ConfigError("solenoid.disk_radius: F0 must map the disk into itself");
    }

    /// The fixed point p: theta = 0 and the disk point fixed by the fibre map.
    SolenoidPoint fixed_point() const
    {
        SolenoidPoint p;
        p.theta.assign(k, 0);
        p.disk = Eigen::Vector2d(beta * weight_sum() / (1.0 - alpha), 0.0);
        return p;
    }

    /// Linear part of g acting on tangent vectors.
    RealMatrix base_derivative() const { return expansion.cast<double>(); }
};

/// g on the torus, exact mod 1.
inline std::vector<std::uint64_t> torus_map(const SolenoidSpec& s, const std::vector<std::uint64_t>& th)
{
    std::vector<std::uint64_t> out(s.k, 0);
    for (int i = 0; i < s.k; ++i)
        for (int j = 0; j < s.k; ++j)
            out[i] += static_cast<std::uint64_t>(static_cast<std::int64_t>(s.expansion(i, j))) * th[j];
    return out;
}

inline SolenoidPoint solenoid_map(const SolenoidSpec& s, const SolenoidPoint& w)
{
    if (w.k() != s.k) throw std::invalid_argument("solenoid_map: torus dimension mismatch");
    const double two_pi = 2.0 * std::acos(-1.0);
    SolenoidPoint out;
    out.theta = torus_map(s, w.theta);
    out.disk = s.alpha * w.disk;
    for (int j = 0; j < s.k; ++j) {
        const double a = two_pi * torus_to_unit(w.theta[j]);
        out.disk += s.beta * SolenoidSpec::weight(j) * Eigen::Vector2d(std::cos(a), std::sin(a));
    }
    return out;
}

/// Replaces the low bits that g shifted in as zeros. Without this a finite
/// binary orbit of the doubling map reaches 0 after 64 steps.
inline void refill_low_bits(const SolenoidSpec& s, SolenoidPoint& w, std::mt19937_64& rng)
{
    const int b = s.lost_bits();
    if (b == 0) return;
    const std::uint64_t mask = (std::uint64_t{1} << b) - 1;
    for (auto& x : w.theta) x = (x & ~mask) | (rng() & mask);
}

/// Uniform sample on T^k x D avoiding a tiny ball around p.
inline SolenoidPoint sample_section(const SolenoidSpec& s, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const SolenoidPoint p = s.fixed_point();
    const double eps = 10.0 * std::numeric_limits<double>::epsilon();
    for (;;) {
        SolenoidPoint w;
        for (int i = 0; i < s.k; ++i) w.theta.push_back(rng());
        const double r = s.disk_radius * std::sqrt(U(rng));
        const double a = 2.0 * std::acos(-1.0) * U(rng);
        w.disk = Eigen::Vector2d(r * std::cos(a), r * std::sin(a));
        double d2 = (w.disk - p.disk).squaredNorm();
        for (auto x : w.theta) d2 += torus_offset(x) * torus_offset(x);
        if (std::sqrt(d2) > eps) return w;
    }
}

/// Torus distance of the base point to theta = 0.
inline double base_distance_to_p(const SolenoidPoint& w)
{
    double d2 = 0.0;
    for (auto x : w.theta) d2 += torus_offset(x) * torus_offset(x);
    return std::sqrt(d2);
}

} // namespace seclab
