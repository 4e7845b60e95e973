#pragma once

// Closed-form cylinder vector fields, Jacobians and equilibria.
//
// H(x,y) = x (1 - rho^2 xi0(x) - m (1 - xi0(x))) / 10 with rho^2 = x^2 + y^2.
// Inside |x| <= 2 this is x (1 - x^2 - y^2) / 10 whatever m is.

#include "seclab/bump.hpp"
#include "seclab/compound.hpp"
#include "seclab/model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace seclab {

struct HamiltonianJet {
    double H = 0, Hx = 0, Hy = 0, Hxx = 0, Hxy = 0, Hyy = 0;
};

inline HamiltonianJet hamiltonian_jet(const ModelSpec& m, double x, double y)
{
    const Jet xi = bump_jet(m.xi0, x);
    const double M = m.outer_level;
    const double q = x * x + y * y;
    const double a = M - q;
    HamiltonianJet h;
    h.H = x * (1.0 - M + xi.v * a) / 10.0;
    h.Hx = (1.0 - M + xi.v * a + x * xi.d1 * a - 2.0 * x * x * xi.v) / 10.0;
    h.Hy = -x * y * xi.v / 5.0;
    h.Hxx = (2.0 * xi.d1 * a + x * xi.d2 * a - 6.0 * x * xi.v - 4.0 * x * x * xi.d1) / 10.0;
    h.Hxy = -y * (xi.v + x * xi.d1) / 5.0;
    h.Hyy = -x * xi.v / 5.0;
    return h;
}

/// (H, grad H).
inline std::pair<double, RealVector> hamiltonian_eval(const ModelSpec& m, double x, double y)
{
    const HamiltonianJet h = hamiltonian_jet(m, x, y);
    RealVector g(2);
    g << h.Hx, h.Hy;
    return {h.H, g};
}

namespace detail {

inline void check_dim(const ModelSpec& m, Eigen::Index n)
{
    if (n != m.dim())
        throw std::invalid_argument("field: point has dimension " + std::to_string(n) + ", model " +
                                    m.name() + " expects " + std::to_string(m.dim()));
}

inline double vertical_factor(Family f)
{
    return (f == Family::Y4 || f == Family::Y4hat) ? 2.0 : 1.0;
}

} // namespace detail

/// Field evaluation on raw storage; `w` and `out` hold m.dim() values.
inline void field_raw(const ModelSpec& m, const double* w, double* out)
{
    switch (m.family) {
    case Family::Y0:
    case Family::Y1:
    case Family::Yperturbed: {
        const HamiltonianJet h = hamiltonian_jet(m, w[0], w[1]);
        out[0] = h.Hy - (m.family == Family::Yperturbed ? w[0] / 10.0 : 0.0);
        out[1] = (m.family == Family::Y1 ? -2.0 : -1.0) * h.Hx;
        return;
    }
    case Family::Y2: {
        const int l = m.ell;
        const double x = w[0], z = w[l + 1];
        const HamiltonianJet h = hamiltonian_jet(m, x, z);
        double s = 0.0;
        for (int i = 1; i <= l; ++i) s += w[i] * w[i];
        const double xi1 = bump_eval(m.xi1, s);
        out[0] = h.Hy;
        for (int i = 1; i <= l; ++i) out[i] = m.omega * xi1 * w[i];
        out[l + 1] = -2.0 * h.Hx;
        return;
    }
    case Family::Y3:
    case Family::Y4:
    case Family::Y3hat:
    case Family::Y4hat: {
        const double x = w[0], y = w[1], z = w[2];
        const double rho = std::hypot(x, y);
        const double f = -z * bump_eval(m.xi0, rho) / 5.0;
        const HamiltonianJet h = hamiltonian_jet(m, rho, z);
        out[0] = f * x;
        out[1] = f * y;
        out[2] = -detail::vertical_factor(m.family) * h.Hx;
        for (int i = 3; i < m.dim(); ++i) out[i] = 0.0;
        return;
    }
    }
}

/// Jacobian on raw storage, row-major d x d.
inline void jacobian_raw(const ModelSpec& m, const double* w, double* J)
{
    const int d = m.dim();
    for (int i = 0; i < d * d; ++i) J[i] = 0.0;
    auto at = [&](int r, int c) -> double& { return J[r * d + c]; };
    switch (m.family) {
    case Family::Y0:
    case Family::Y1:
    case Family::Yperturbed: {
        const HamiltonianJet h = hamiltonian_jet(m, w[0], w[1]);
        const double c = m.family == Family::Y1 ? 2.0 : 1.0;
        at(0, 0) = h.Hxy - (m.family == Family::Yperturbed ? 0.1 : 0.0);
        at(0, 1) = h.Hyy;
        at(1, 0) = -c * h.Hxx;
        at(1, 1) = -c * h.Hxy;
        return;
    }
    case Family::Y2: {
        const int l = m.ell;
        const double x = w[0], z = w[l + 1];
        const HamiltonianJet h = hamiltonian_jet(m, x, z);
        double s = 0.0;
        for (int i = 1; i <= l; ++i) s += w[i] * w[i];
        const Jet xi1 = bump_jet(m.xi1, s);
        at(0, 0) = h.Hxy;
        at(0, l + 1) = h.Hyy;
        for (int i = 1; i <= l; ++i)
            for (int j = 1; j <= l; ++j)
                at(i, j) = m.omega * ((i == j ? xi1.v : 0.0) + 2.0 * xi1.d1 * w[i] * w[j]);
        at(l + 1, 0) = -2.0 * h.Hxx;
        at(l + 1, l + 1) = -2.0 * h.Hxy;
        return;
    }
    case Family::Y3:
    case Family::Y4:
    case Family::Y3hat:
    case Family::Y4hat: {
        const double x = w[0], y = w[1], z = w[2];
        const double rho = std::hypot(x, y);
        const double c = detail::vertical_factor(m.family);
        const Jet xi = bump_jet(m.xi0, rho);
        const double f = -z * xi.v / 5.0;
        // g = f_rho / rho and K = -H_xx(rho, z) / rho, both regular at rho = 0.
        double g = 0.0, K = 0.6;
        if (rho > m.xi0.plateau_end) {
            const HamiltonianJet hr = hamiltonian_jet(m, rho, z);
            g = -z * xi.d1 / (5.0 * rho);
            K = -hr.Hxx / rho;
        }
        const HamiltonianJet h = hamiltonian_jet(m, rho, z);
        const double fz = -xi.v / 5.0;
        at(0, 0) = f + x * x * g;
        at(0, 1) = x * y * g;
        at(0, 2) = x * fz;
        at(1, 0) = x * y * g;
        at(1, 1) = f + y * y * g;
        at(1, 2) = y * fz;
        at(2, 0) = c * x * K;
        at(2, 1) = c * y * K;
        at(2, 2) = -c * h.Hxy;
        return;
    }
    }
}

inline RealVector field_eval(const ModelSpec& m, const RealVector& w)
{
    detail::check_dim(m, w.size());
    RealVector out(w.size());
    field_raw(m, w.data(), out.data());
    return out;
}

inline RealMatrix field_jacobian(const ModelSpec& m, const RealVector& w)
{
    detail::check_dim(m, w.size());
    const int d = m.dim();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> J(d, d);
    jacobian_raw(m, w.data(), J.data());
    return J;
}

inline double divergence(const ModelSpec& m, const RealVector& w)
{
    return field_jacobian(m, w).trace();
}

/// Rate at which log ||wedge^2 (D phi_t)^{-1}|| can grow at w:
/// minus the smallest eigenvalue of the symmetric part of the additive compound.
inline double sectional_rate(const RealMatrix& J)
{
    const RealMatrix A = additive_compound(J, 2);
    const RealMatrix S = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(S, Eigen::EigenvaluesOnly);
    return -es.eigenvalues()(0);
}

inline double sectional_rate(const ModelSpec& m, const RealVector& w)
{
    return sectional_rate(field_jacobian(m, w));
}

enum class SingularityTag {
    GeneralizedLorenzLike,
    GeneralizedRovellaLike,
    NonSectionalSaddle,
    NonHyperbolic,
    HyperbolicNonSaddle, ///< sink or source; only produced by equilibria()
};

inline const char* to_string(SingularityTag t)
{
    switch (t) {
    case SingularityTag::GeneralizedLorenzLike: return "GeneralizedLorenzLike";
    case SingularityTag::GeneralizedRovellaLike: return "GeneralizedRovellaLike";
    case SingularityTag::NonSectionalSaddle: return "NonSectionalSaddle";
    case SingularityTag::NonHyperbolic: return "NonHyperbolic";
    case SingularityTag::HyperbolicNonSaddle: return "HyperbolicNonSaddle";
    }
    return "?";
}

struct SingularityClass {
    SingularityTag tag = SingularityTag::NonHyperbolic;
    double lambda_s = std::numeric_limits<double>::quiet_NaN();
    double lambda_u = std::numeric_limits<double>::quiet_NaN();
};

class ClassificationError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

inline constexpr double kClassifyTol = 1e-9;

inline bool is_real_eigenvalue(std::complex<double> l)
{
    return std::abs(l.imag()) < 1e-9 * (1.0 + std::abs(l));
}

inline std::vector<std::complex<double>> eigenvalues(const RealMatrix& J)
{
    Eigen::EigenSolver<RealMatrix> es(J, false);
    std::vector<std::complex<double>> out;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
    return out;
}

inline SingularityClass classify_singularity(const RealMatrix& J_cu)
{
    const auto ev = eigenvalues(J_cu);
    SingularityClass c;
    for (const auto& l : ev)
        if (std::abs(l.real()) < kClassifyTol) return c; // NonHyperbolic
    double ls = -std::numeric_limits<double>::infinity();
    double lu = std::numeric_limits<double>::infinity();
    bool has_s = false, has_u = false;
    for (const auto& l : ev) {
        if (is_real_eigenvalue(l) && l.real() < 0.0) {
            has_s = true;
            ls = std::max(ls, l.real());
        }
        if (l.real() >= 0.0) {
            has_u = true;
            lu = std::min(lu, l.real());
        }
    }
    if (!has_s) throw ClassificationError("classify_singularity: no negative real eigenvalue");
    if (!has_u) throw ClassificationError("classify_singularity: no eigenvalue with nonnegative real part");
    c.lambda_s = ls;
    c.lambda_u = lu;
    if (std::abs(ls + lu) < kClassifyTol) c.tag = SingularityTag::NonSectionalSaddle;
    else if (-lu < ls) c.tag = SingularityTag::GeneralizedLorenzLike;
    else c.tag = SingularityTag::GeneralizedRovellaLike;
    return c;
}

struct Equilibrium {
    std::string label;
    RealVector location;
    RealMatrix jacobian;
    std::vector<std::complex<double>> cu_spectrum;
    SingularityClass sing_class;
};

/// Closed-form equilibria of a bare field. For Y3hat/Y4hat the neutral
/// coordinates make every equilibrium part of a line; the representative at
/// w = 0 is returned and classified on the (x, y, z) block.
inline std::vector<Equilibrium> equilibria(const ModelSpec& m)
{
    if (m.glued()) throw std::invalid_argument("equilibria: expects a bare cylinder field");
    const int d = m.dim();
    const int v = m.vertical_index();
    const double r3 = std::sqrt(3.0) / 3.0;
    std::vector<std::pair<std::string, RealVector>> pts;
    auto make = [&](std::initializer_list<std::pair<int, double>> coords) {
        RealVector p = RealVector::Zero(d);
        for (auto [i, val] : coords) p(i) = val;
        return p;
    };
    pts.push_back({"sigma1", make({{v, -1.0}})});
    pts.push_back({"sigma2", make({{v, 1.0}})});
    if (m.family == Family::Yperturbed) {
        pts.push_back({"focus+", make({{0, 0.5}, {1, -0.5}})});
        pts.push_back({"focus-", make({{0, -0.5}, {1, -0.5}})});
    } else if (m.radial()) {
        const double pi = std::acos(-1.0);
        const double as[] = {0.0, pi / 2.0, pi};
        const char* names[] = {"zeta(0)", "zeta(pi/2)", "zeta(pi)"};
        for (int k = 0; k < 3; ++k)
            pts.push_back({names[k], make({{0, r3 * std::cos(as[k])}, {1, r3 * std::sin(as[k])}})});
    } else {
        pts.push_back({"+zeta", make({{0, r3}})});
        pts.push_back({"-zeta", make({{0, -r3}})});
    }
    std::vector<Equilibrium> out;
    for (auto& [label, p] : pts) {
        Equilibrium e;
        e.label = label;
        e.location = p;
        e.jacobian = field_jacobian(m, p);
        const RealMatrix Jcu = m.radial() ? RealMatrix(e.jacobian.topLeftCorner(3, 3)) : e.jacobian;
        e.cu_spectrum = eigenvalues(Jcu);
        try {
            e.sing_class = classify_singularity(Jcu);
        } catch (const ClassificationError&) {
            e.sing_class.tag = SingularityTag::HyperbolicNonSaddle;
        }
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace seclab
