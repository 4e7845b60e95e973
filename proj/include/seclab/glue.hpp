#pragma once

// Cylinder chart field: either a bare Y field, or the gluing
//   G = psi(u) X + (1 - psi(u)) zeta(u) Y
// with u = (v + 2) / 4 for the vertical chart coordinate v in [-2, 2] and
// X = 4 e_v, the unit-speed suspension direction written in chart units.

#include "seclab/bump.hpp"
#include "seclab/fields.hpp"
#include "seclab/model.hpp"

#include <vector>

namespace seclab {

inline constexpr double kSuspensionSpeed = 4.0;

class CylinderField {
public:
    explicit CylinderField(ModelSpec m) : m_(std::move(m)), d_(m_.dim()), v_(m_.vertical_index())
    {
        m_.validate();
        y_.assign(d_, 0.0);
        dy_.assign(static_cast<size_t>(d_) * d_, 0.0);
    }

    const ModelSpec& model() const { return m_; }
    int dim() const { return d_; }
    int vertical() const { return v_; }

    double u_of(const double* w) const { return (w[v_] + 2.0) / 4.0; }

    void eval(const double* w, double* out) const
    {
        if (!m_.glued()) {
            field_raw(m_, w, out);
            return;
        }
        const double u = u_of(w);
        const Jet psi = glue_weight(m_.epsilon, u);
        if (psi.v == 1.0) {
            for (int i = 0; i < d_; ++i) out[i] = 0.0;
            out[v_] = kSuspensionSpeed;
            return;
        }
        const Jet zeta = m_.gluing == Gluing::Slowed ? slowdown_factor(m_.epsilon, m_.zeta0, u) : Jet{1.0, 0.0, 0.0};
        field_raw(m_, w, y_.data());
        const double c = (1.0 - psi.v) * zeta.v;
        for (int i = 0; i < d_; ++i) out[i] = c * y_[i];
        out[v_] += psi.v * kSuspensionSpeed;
    }

    /// Row-major Jacobian.
    void jacobian(const double* w, double* J) const
    {
        if (!m_.glued()) {
            jacobian_raw(m_, w, J);
            return;
        }
        const double u = u_of(w);
        const Jet psi = glue_weight(m_.epsilon, u);
        if (psi.v == 1.0 && psi.d1 == 0.0) {
            for (int i = 0; i < d_ * d_; ++i) J[i] = 0.0;
            return;
        }
        const Jet zeta = m_.gluing == Gluing::Slowed ? slowdown_factor(m_.epsilon, m_.zeta0, u) : Jet{1.0, 0.0, 0.0};
        field_raw(m_, w, y_.data());
        jacobian_raw(m_, w, dy_.data());
        const double c = (1.0 - psi.v) * zeta.v;
        for (int i = 0; i < d_ * d_; ++i) J[i] = c * dy_[i];
        // d/dv of the u-dependent weights; du/dv = 1/4.
        const double cu = (1.0 - psi.v) * zeta.d1 - psi.d1 * zeta.v;
        for (int i = 0; i < d_; ++i) J[i * d_ + v_] += 0.25 * cu * y_[i];
        J[v_ * d_ + v_] += 0.25 * psi.d1 * kSuspensionSpeed;
    }

    /// The unscaled cylinder field Y at w (no gluing, no slowdown).
    void eval_bare(const double* w, double* out) const { field_raw(m_, w, out); }
    void jacobian_bare(const double* w, double* J) const { jacobian_raw(m_, w, J); }

private:
    ModelSpec m_;
    int d_;
    int v_;
    mutable std::vector<double> y_, dy_;
};

/// Glued field at a chart point.
inline RealVector glued_field_eval(const ModelSpec& m, const RealVector& w)
{
    if (!m.glued()) throw std::invalid_argument("glued_field_eval: model is not glued");
    if (w.size() != m.dim()) throw std::invalid_argument("glued_field_eval: chart mismatch");
    CylinderField f(m);
    RealVector out(w.size());
    f.eval(w.data(), out.data());
    return out;
}

inline RealMatrix glued_field_jacobian(const ModelSpec& m, const RealVector& w)
{
    if (w.size() != m.dim()) throw std::invalid_argument("glued_field_jacobian: chart mismatch");
    CylinderField f(m);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> J(m.dim(), m.dim());
    f.jacobian(w.data(), J.data());
    return J;
}

} // namespace seclab
