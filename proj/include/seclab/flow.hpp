#pragma once

// Trajectories, variational cocycles and section crossings of cylinder fields.

#include "seclab/compound.hpp"
#include "seclab/glue.hpp"
#include "seclab/ode.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace seclab {

struct IntegratorConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_time = 1e4;
    double renorm_interval = 1.0;
    bool fixed_step = false;
    double fixed_h = 1e-2;

    void validate() const
    {
        auto ok = [](double x) { return x > 0.0 && x <= 1e-3; };
        if (!ok(rel_tol)) throw ConfigError("integrator.rel_tol: must lie in (0, 1e-3]");
        if (!ok(abs_tol)) throw ConfigError("integrator.abs_tol: must lie in (0, 1e-3]");
        if (!(max_time > 0.0)) throw ConfigError("integrator.max_time: must be positive");
        if (!(renorm_interval > 0.0)) throw ConfigError("integrator.renorm_interval: must be positive");
        if (fixed_step && !(fixed_h > 0.0)) throw ConfigError("integrator.fixed_h: must be positive");
    }

    Dop853 make(OdeRhs rhs, int n) const
    {
        Dop853 ode(std::move(rhs), n, rel_tol, abs_tol);
        if (fixed_step) ode.set_fixed_step(fixed_h);
        return ode;
    }
};

class TimeBudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense trajectory over [t0, t_end].
class Trajectory {
public:
    explicit Trajectory(int dim = 0) : n_(dim) {}

    void append(double t0, double h, std::vector<double> coeffs)
    {
        t0_.push_back(t0);
        h_.push_back(h);
        c_.push_back(std::move(coeffs));
    }

    int dim() const { return n_; }
    double t_begin() const { return t0_.empty() ? 0.0 : t0_.front(); }
    double t_end() const { return t0_.empty() ? 0.0 : t0_.back() + h_.back(); }
    size_t segments() const { return t0_.size(); }

    RealVector at(double t) const
    {
        if (t0_.empty()) throw std::out_of_range("Trajectory: empty");
        auto it = std::upper_bound(t0_.begin(), t0_.end(), t);
        size_t k = it == t0_.begin() ? 0 : static_cast<size_t>(it - t0_.begin()) - 1;
        const double s = (t - t0_[k]) / h_[k], s1 = 1.0 - s;
        const auto& c = c_[k];
        RealVector out(n_);
        for (int i = 0; i < n_; ++i) {
            auto r = [&](int j) { return c[static_cast<size_t>(j) * n_ + i]; };
            out(i) = r(0) + s * (r(1) + s1 * (r(2) + s * (r(3) + s1 * (r(4) + s * (r(5) + s1 * (r(6) + s * r(7)))))));
        }
        return out;
    }

private:
    int n_;
    std::vector<double> t0_, h_;
    std::vector<std::vector<double>> c_;
};

inline Trajectory integrate(const ModelSpec& model, const RealVector& w0, double T, const IntegratorConfig& cfg)
{
    cfg.validate();
    if (T > cfg.max_time) throw TimeBudgetExceeded("integrate: horizon exceeds max_time");
    if (!(T > 0.0)) throw std::invalid_argument("integrate: horizon must be positive");
    CylinderField field(model);
    if (w0.size() != field.dim()) throw std::invalid_argument("integrate: dimension mismatch");
    Dop853 ode = cfg.make([&](double, const double* y, double* dy) { field.eval(y, dy); }, field.dim());
    ode.init(0.0, w0.data());
    Trajectory tr(field.dim());
    std::vector<double> coeffs;
    while (ode.t() < T) {
        ode.step(T);
        ode.dense_coefficients(coeffs);
        tr.append(ode.t_prev(), ode.last_step(), coeffs);
    }
    return tr;
}

/// Right-hand side of w' = Y(w), Z' = DY(w) Z and optionally C' = A2(w) C,
/// with A2 the order-2 additive compound of DY. Matrices are row-major.
class VariationalRhs {
public:
    VariationalRhs(const CylinderField& f, bool with_compound)
        : f_(f), d_(f.dim()), m_(with_compound ? static_cast<int>(binomial(f.dim(), 2)) : 0)
    {
        J_.assign(static_cast<size_t>(d_) * d_, 0.0);
    }

    int size() const { return d_ + d_ * d_ + m_ * m_; }
    int dim() const { return d_; }
    int compound_dim() const { return m_; }

    void operator()(double, const double* y, double* dy)
    {
        f_.eval(y, dy);
        f_.jacobian(y, J_.data());
        const double* Z = y + d_;
        double* dZ = dy + d_;
        for (int i = 0; i < d_; ++i)
            for (int j = 0; j < d_; ++j) {
                double s = 0.0;
                for (int k = 0; k < d_; ++k) s += J_[i * d_ + k] * Z[k * d_ + j];
                dZ[i * d_ + j] = s;
            }
        if (m_ == 0) return;
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> J(J_.data(), d_, d_);
        A2_ = additive_compound(J, 2);
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> C(y + d_ + d_ * d_, m_, m_);
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dC(dy + d_ + d_ * d_, m_, m_);
        dC.noalias() = A2_ * C;
    }

private:
    const CylinderField& f_;
    int d_, m_;
    std::vector<double> J_;
    RealMatrix A2_;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Flow point with the tangent cocycle and its order-2 compound, both kept as
/// exp(log_scale) * frame * r after QR renormalisation.
struct VariationalState {
    double t = 0.0;
    RealVector point;
    RealMatrix frame;      ///< orthonormal factor of D phi_t
    RealMatrix frame_r;    ///< accumulated triangular factor, max-abs normalised
    double frame_log_scale = 0.0;
    RealVector log_frame;  ///< accumulated log of the R diagonals per column
    RealMatrix compound_frame;
    RealMatrix compound_r;
    double compound_log_scale = 0.0;
    double log_compound = 0.0; ///< accumulated log det of the compound cocycle
    double psi_cu_integral = 0.0; ///< time integral of the sectional rate

    RealMatrix cocycle() const { return std::exp(frame_log_scale) * frame * frame_r; }
    RealMatrix compound_cocycle() const { return std::exp(compound_log_scale) * compound_frame * compound_r; }

    /// log ||wedge^p (D phi_t)^{-1}|| from the tangent cocycle.
    double log_wedge_inv_norm(int p) const
    {
        const RealVector s = singular_values(frame_r);
        const int d = static_cast<int>(s.size());
        double acc = 0.0;
        for (int i = d - p; i < d; ++i) acc -= frame_log_scale + std::log(s(i));
        return acc;
    }

    /// log ||(wedge^2 D phi_t)^{-1}|| from the compound cocycle.
    double log_compound_inv_norm() const
    {
        const RealVector s = singular_values(compound_r);
        return -(compound_log_scale + std::log(s(s.size() - 1)));
    }

    double log_det() const { return log_frame.sum(); }
};

struct VariationalOptions {
    bool compound = true;
    bool rate_integral = true;
};

namespace detail {

inline void renormalise(RealMatrix& Q, RealMatrix& Racc, double& log_scale, RealVector& log_diag, const RealMatrix& Z)
{
    const QrResult qr = qr_renormalize(Z);
    Q = qr.q;
    Racc = qr.r * Racc;
    const double mx = Racc.cwiseAbs().maxCoeff();
    Racc /= mx;
    log_scale += std::log(mx);
    log_diag += qr.log_diag;
}

} // namespace detail

inline VariationalState integrate_variational(const ModelSpec& model, const RealVector& w0, double T,
                                              const IntegratorConfig& cfg, VariationalOptions opt = {})
{
    cfg.validate();
    if (T > cfg.max_time) throw TimeBudgetExceeded("integrate_variational: horizon exceeds max_time");
    if (!(T >= 0.0)) throw std::invalid_argument("integrate_variational: horizon must be nonnegative");
    CylinderField field(model);
    const int d = field.dim();
    if (w0.size() != d) throw std::invalid_argument("integrate_variational: dimension mismatch");
    VariationalRhs rhs(field, opt.compound);
    const int m = rhs.compound_dim();
    VariationalState st;
    st.frame = RealMatrix::Identity(d, d);
    st.frame_r = RealMatrix::Identity(d, d);
    st.log_frame = RealVector::Zero(d);
    st.compound_frame = RealMatrix::Identity(m, m);
    st.compound_r = RealMatrix::Identity(m, m);

    std::vector<double> y(rhs.size(), 0.0);
    auto load = [&](const RealVector& w) {
        for (int i = 0; i < d; ++i) y[i] = w(i);
        Eigen::Map<RowMatrix>(y.data() + d, d, d) = st.frame;
        if (m) Eigen::Map<RowMatrix>(y.data() + d + d * d, m, m) = st.compound_frame;
    };
    load(w0);
    st.point = w0;
    if (T == 0.0) return st;

    Dop853 ode = cfg.make([&rhs](double t, const double* yy, double* dy) { rhs(t, yy, dy); }, rhs.size());
    ode.init(0.0, y.data());
    const GaussLegendre gl(8);
    std::vector<double> yy(rhs.size());
    RowMatrix J(d, d);
    double next_renorm = std::min(T, cfg.renorm_interval);
    while (ode.t() < T) {
        ode.step(next_renorm);
        if (opt.rate_integral) {
            const double t0 = ode.t_prev(), h = ode.t() - t0;
            double acc = 0.0;
            for (size_t q = 0; q < gl.x.size(); ++q) {
                ode.dense(t0 + gl.x[q] * h, yy.data());
                field.jacobian(yy.data(), J.data());
                acc += gl.w[q] * sectional_rate(RealMatrix(J));
            }
            st.psi_cu_integral += acc * h;
        }
        if (ode.t() >= next_renorm) {
            const auto& cur = ode.y();
            RealMatrix Z = Eigen::Map<const RowMatrix>(cur.data() + d, d, d);
            detail::renormalise(st.frame, st.frame_r, st.frame_log_scale, st.log_frame, Z);
            if (m) {
                RealMatrix C = Eigen::Map<const RowMatrix>(cur.data() + d + d * d, m, m);
                RealVector ld = RealVector::Zero(m);
                detail::renormalise(st.compound_frame, st.compound_r, st.compound_log_scale, ld, C);
                st.log_compound += ld.sum();
            }
            RealVector w(d);
            for (int i = 0; i < d; ++i) w(i) = cur[i];
            load(w);
            ode.reset_state(y.data());
            next_renorm = std::min(T, next_renorm + cfg.renorm_interval);
        }
    }
    st.t = ode.t();
    st.point.resize(d);
    for (int i = 0; i < d; ++i) st.point(i) = ode.y()[i];
    return st;
}

enum class Direction { Increasing, Decreasing, Both };

struct SectionSpec {
    int coordinate_index = 1;
    double level = 2.0;
    Direction direction = Direction::Increasing;
};

struct CrossingEvent {
    double time = 0.0;
    RealVector point;
    double residual = 0.0;
};

struct CrossingResult {
    bool found = false;
    CrossingEvent event;
    double elapsed = 0.0;
    std::string reason; ///< why no crossing was found
};

namespace detail {

inline bool sign_change(double g0, double g1, Direction dir)
{
    switch (dir) {
    case Direction::Increasing: return g0 < 0.0 && g1 >= 0.0;
    case Direction::Decreasing: return g0 > 0.0 && g1 <= 0.0;
    case Direction::Both: return (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0);
    }
    return false;
}

/// Locates the root of the dense coordinate inside the last step:
/// bisection to 1e-13 in time, then one Newton step.
inline double refine_root(Dop853& ode, const CylinderField& field, int idx, double level)
{
    double a = ode.t_prev(), b = ode.t();
    double ga = ode.dense_component(idx, a) - level;
    while (b - a > 1e-13) {
        const double c = 0.5 * (a + b);
        const double gc = ode.dense_component(idx, c) - level;
        if ((gc < 0.0) == (ga < 0.0)) {
            a = c;
            ga = gc;
        } else {
            b = c;
        }
    }
    double tc = 0.5 * (a + b);
    std::vector<double> y(ode.dim()), f(field.dim());
    ode.dense(tc, y.data());
    field.eval(y.data(), f.data());
    if (f[idx] != 0.0) {
        const double tn = tc - (y[idx] - level) / f[idx];
        if (tn >= ode.t_prev() && tn <= ode.t()) tc = tn;
    }
    return tc;
}

} // namespace detail

inline CrossingResult section_crossing(const ModelSpec& model, const RealVector& w0, const SectionSpec& sec,
                                       const IntegratorConfig& cfg)
{
    cfg.validate();
    CylinderField field(model);
    const int d = field.dim();
    if (w0.size() != d) throw std::invalid_argument("section_crossing: dimension mismatch");
    if (sec.coordinate_index < 0 || sec.coordinate_index >= d)
        throw std::invalid_argument("section_crossing: coordinate index out of range");
    Dop853 ode = cfg.make([&](double, const double* y, double* dy) { field.eval(y, dy); }, d);
    ode.init(0.0, w0.data());
    const int idx = sec.coordinate_index;
    CrossingResult res;
    while (ode.t() < cfg.max_time) {
        ode.step(cfg.max_time);
        const double g0 = ode.y_prev()[idx] - sec.level;
        const double g1 = ode.y()[idx] - sec.level;
        if (detail::sign_change(g0, g1, sec.direction)) {
            const double tc = detail::refine_root(ode, field, idx, sec.level);
            res.found = true;
            res.event.time = tc;
            res.event.point.resize(d);
            ode.dense(tc, res.event.point.data());
            res.event.residual = std::abs(res.event.point(idx) - sec.level);
            res.elapsed = tc;
            return res;
        }
    }
    res.elapsed = ode.t();
    res.reason = "no crossing within max_time (stable-manifold suspect)";
    return res;
}

struct TransitionResult {
    bool found = false;
    RealVector exit;       ///< transverse coordinates on the exit section
    RealVector exit_point; ///< full chart point
    double tau = 0.0;
    double elapsed = 0.0;
};

/// From the bottom section (vertical = -2) to the top section (vertical = 2).
inline TransitionResult transition_map(const ModelSpec& model, const RealVector& entry,
                                       const IntegratorConfig& cfg = {})
{
    const auto hz = model.horizontal_indices();
    if (entry.size() != static_cast<Eigen::Index>(hz.size()))
        throw std::invalid_argument("transition_map: entry has wrong number of transverse coordinates");
    RealVector w0(model.dim());
    for (size_t i = 0; i < hz.size(); ++i) w0(hz[i]) = entry(static_cast<Eigen::Index>(i));
    w0(model.vertical_index()) = -2.0;
    const CrossingResult c = section_crossing(model, w0, {model.vertical_index(), 2.0, Direction::Increasing}, cfg);
    TransitionResult r;
    r.found = c.found;
    r.elapsed = c.elapsed;
    if (!c.found) return r;
    r.tau = c.event.time;
    r.exit_point = c.event.point;
    r.exit.resize(entry.size());
    for (size_t i = 0; i < hz.size(); ++i) r.exit(static_cast<Eigen::Index>(i)) = c.event.point(hz[i]);
    return r;
}

/// log ||wedge^2 (D phi_T restricted to E^cu)^{-1}|| with E^cu the full chart
/// tangent space.
inline double psi_cu_over_segment(const ModelSpec& model, const RealVector& w0, double T,
                                  const IntegratorConfig& cfg = {})
{
    const VariationalState st = integrate_variational(model, w0, T, cfg, {false, false});
    return st.log_wedge_inv_norm(2);
}

} // namespace seclab
