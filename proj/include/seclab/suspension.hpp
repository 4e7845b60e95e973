#pragma once

// Suspension of the solenoid map with a cylinder glued over a neighbourhood U
// of the fixed point p.
//
// Chart: a base point theta near p maps to horizontal chart coordinates
// h = 3 (theta - p) / eps_U, so U corresponds to the horizontal extent of the
// cylinder; the phase u in [0, 1] maps to v = 4 u - 2. Off U the flow is the
// unit-speed suspension, which takes time 1 per lap. Tangent vectors are
// measured in (h, v) coordinates everywhere, so DF0 = diag(g, 1).

#include "seclab/accumulator.hpp"
#include "seclab/flow.hpp"
#include "seclab/solenoid.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace seclab {

/// Singular points of the cylinder field in chart coordinates, with the mask
/// of coordinates that enter the distance (neutral coordinates of the hat
/// families do not: their equilibria are whole lines).
struct SingularSet {
    std::vector<RealVector> points;
    std::vector<int> metric_coords;
    int vertical = 0;

    double distance(const double* w, int* which = nullptr) const
    {
        double best = std::numeric_limits<double>::infinity();
        for (size_t s = 0; s < points.size(); ++s) {
            double d2 = 0.0;
            for (int i : metric_coords) d2 += (w[i] - points[s](i)) * (w[i] - points[s](i));
            const double d = std::sqrt(d2);
            if (d < best) {
                best = d;
                if (which) *which = static_cast<int>(s);
            }
        }
        return best;
    }

    /// Offset from the local stable manifold, the coordinate the linearised
    /// passage expands. W^s(sigma_1) is the vertical axis. W^s(sigma_2) is
    /// v - 1 = a rho^2 to second order.
    double stable_curvature = 0.0;

    double entry_offset(const double* w, int s) const
    {
        double h2 = 0.0;
        for (int i : metric_coords)
            if (i != vertical) h2 += (w[i] - points[s](i)) * (w[i] - points[s](i));
        if (s == 0) return std::sqrt(h2);
        return std::abs(w[vertical] - points[s](vertical) - stable_curvature * h2);
    }
};

/// sigma_1 and sigma_2. The elliptic equilibria sit inside the separatrix loop
/// and are never approached by orbits crossing the cylinder.
inline SingularSet singular_set(const ModelSpec& m)
{
    SingularSet s;
    s.vertical = m.vertical_index();
    for (double z : {-1.0, 1.0}) {
        RealVector p = RealVector::Zero(m.dim());
        p(s.vertical) = z;
        s.points.push_back(p);
    }
    // Near sigma_2 with dv = v - 1: rho' = -rho/5, dv' = c (3 rho^2 + 2 dv)/10
    // to second order, c the vertical factor; dv = a rho^2 invariant gives
    // a = -3c / (4 + 2c).
    const double c = (m.family == Family::Y1 || m.family == Family::Y4 || m.family == Family::Y4hat) ? 2.0 : 1.0;
    s.stable_curvature = -3.0 * c / (4.0 + 2.0 * c);
    const int extra_from = (m.family == Family::Y3hat || m.family == Family::Y4hat) ? 3 : m.dim();
    for (int i = 0; i < m.dim(); ++i)
        if (i < extra_from) s.metric_coords.push_back(i);
    return s;
}

/// Whether horizontal chart coordinates lie over U.
inline bool chart_in_u(const ModelSpec& m, const RealVector& h)
{
    switch (m.family) {
    case Family::Y0:
    case Family::Y1:
    case Family::Yperturbed: return std::abs(h(0)) < 3.0;
    case Family::Y2: return std::abs(h(0)) < 3.0 && h.tail(h.size() - 1).norm() < 3.0;
    default: {
        if (std::hypot(h(0), h(1)) >= 3.0) return false;
        for (Eigen::Index i = 2; i < h.size(); ++i)
            if (std::abs(h(i)) >= 3.0) return false;
        return true;
    }
    }
}

inline RealVector chart_horizontal(const ModelSpec& m, const SolenoidPoint& s)
{
    RealVector h(s.k());
    for (int i = 0; i < s.k(); ++i) h(i) = 3.0 * torus_offset(s.theta[i]) / m.u_radius;
    return h;
}

/// Full chart point (h, v) with the vertical coordinate inserted.
inline RealVector chart_point(const ModelSpec& m, const RealVector& h, double v)
{
    const auto hz = m.horizontal_indices();
    RealVector w(m.dim());
    for (size_t i = 0; i < hz.size(); ++i) w(hz[i]) = h(static_cast<Eigen::Index>(i));
    w(m.vertical_index()) = v;
    return w;
}

inline RealVector chart_horizontal_of(const ModelSpec& m, const RealVector& w)
{
    const auto hz = m.horizontal_indices();
    RealVector h(static_cast<Eigen::Index>(hz.size()));
    for (size_t i = 0; i < hz.size(); ++i) h(static_cast<Eigen::Index>(i)) = w(hz[i]);
    return h;
}

/// DF0 in chart tangent coordinates.
inline RealMatrix identification_derivative(const ModelSpec& m, const SolenoidSpec& s)
{
    const auto hz = m.horizontal_indices();
    RealMatrix D = RealMatrix::Identity(m.dim(), m.dim());
    const RealMatrix g = s.base_derivative();
    for (size_t i = 0; i < hz.size(); ++i)
        for (size_t j = 0; j < hz.size(); ++j)
            D(hz[i], hz[j]) = g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return D;
}

struct PassObservers {
    std::vector<double> deltas = default_scale_grid();
    std::vector<double> radii = default_scale_grid();
    bool variational = true;
    bool quadrature = true;
};

/// One sojourn in a small ball around a singular point.
struct BallVisit {
    int sigma = 0;
    int radius_index = 0;
    double x0 = 0.0;       ///< linear-flow entry offset
    double integral = 0.0; ///< time integral of -log d inside the ball
    double duration = 0.0;
};

struct CylinderPass {
    bool found = false;
    double tau = 0.0;
    double elapsed = 0.0;
    RealVector entry, exit;
    RealMatrix cocycle;    ///< D phi_tau of the whole pass
    RealMatrix last_piece; ///< D phi from the last integer boundary to exit
    double log_det = 0.0;  ///< log |det D phi_tau|, summed over the pieces
    double rate_glued = 0.0; ///< time integral of the sectional rate of the glued field
    double rate_bare = 0.0;  ///< same with the bare field Jacobian at the orbit point
    std::vector<double> int_trunc;
    std::vector<double> ball_time, ball_integral;
    std::vector<BallVisit> visits;
};

/// Integrates the glued flow from the bottom of the cylinder to its top.
class CylinderIntegrator {
public:
    CylinderIntegrator(const ModelSpec& m, IntegratorConfig cfg, PassObservers obs)
        : model_(m), field_(m), cfg_(cfg), obs_(std::move(obs)), sing_(singular_set(m)), gl_(8)
    {
        if (!m.glued()) throw ConfigError("model.family: the suspension needs a glued family (G*, Ghat*)");
        cfg_.validate();
        d_ = field_.dim();
        v_ = field_.vertical();
        n_ = obs_.variational ? d_ + d_ * d_ : d_;
        Jg_.resize(d_, d_);
        Jb_.resize(d_, d_);
        w_.resize(d_);
    }

    const ModelSpec& model() const { return model_; }
    const SingularSet& singular() const { return sing_; }

    /// on_boundary(n, Z, w) is called at each integer clock time n with
    /// n >= first_boundary and n < t0 + tau, with Z the derivative since the
    /// previous boundary (or since entry) and w the chart point.
    template <class OnBoundary>
    CylinderPass run(const RealVector& entry, double t0, long first_boundary, OnBoundary&& on_boundary)
    {
        CylinderPass P;
        P.entry = entry;
        P.int_trunc.assign(obs_.deltas.size(), 0.0);
        P.ball_time.assign(obs_.radii.size(), 0.0);
        P.ball_integral.assign(obs_.radii.size(), 0.0);
        inside_.assign(obs_.radii.size(), -1);
        open_visit_.assign(obs_.radii.size(), -1);

        std::vector<double> y(n_, 0.0);
        for (int i = 0; i < d_; ++i) y[i] = entry(i);
        auto set_identity = [&]() {
            if (!obs_.variational) return;
            for (int i = 0; i < d_ * d_; ++i) y[d_ + i] = 0.0;
            for (int i = 0; i < d_; ++i) y[d_ + i * d_ + i] = 1.0;
        };
        set_identity();
        RealMatrix total = RealMatrix::Identity(d_, d_);
        auto Zof = [&](const double* yy) {
            RealMatrix Z(d_, d_);
            if (obs_.variational) Z = Eigen::Map<const RowMatrix>(yy + d_, d_, d_);
            else Z.setIdentity();
            return Z;
        };

        long nb = first_boundary;
        if (static_cast<double>(nb) < t0) nb = static_cast<long>(std::ceil(t0));
        if (static_cast<double>(nb) == t0) {
            on_boundary(nb, RealMatrix(RealMatrix::Identity(d_, d_)), entry);
            ++nb;
        }

        Dop853 ode = cfg_.make(
            [this](double, const double* yy, double* dy) { rhs(yy, dy); }, n_);
        ode.init(0.0, y.data());
        std::vector<double> yd(n_);
        for (;;) {
            const double bound = static_cast<double>(nb) - t0;
            ode.step(bound);
            const double g0 = ode.y_prev()[v_] - 2.0, g1 = ode.y()[v_] - 2.0;
            if (g0 < 0.0 && g1 >= 0.0) {
                const double tc = detail::refine_root(ode, field_, v_, 2.0);
                observe(ode, ode.t_prev(), tc, P);
                ode.dense(tc, yd.data());
                P.found = true;
                P.tau = tc;
                P.elapsed = tc;
                P.exit = RealVector::Map(yd.data(), d_);
                P.last_piece = Zof(yd.data());
                total = P.last_piece * total;
                P.cocycle = total;
                P.log_det += std::log(std::abs(P.last_piece.determinant()));
                return P;
            }
            observe(ode, ode.t_prev(), ode.t(), P);
            if (ode.t() >= bound) {
                const RealMatrix Z = Zof(ode.y().data());
                total = Z * total;
                P.log_det += std::log(std::abs(Z.determinant()));
                RealVector w = RealVector::Map(ode.y().data(), d_);
                on_boundary(nb, Z, w);
                ++nb;
                std::copy(ode.y().begin(), ode.y().end(), y.begin());
                set_identity();
                ode.reset_state(y.data());
            }
            if (ode.t() > cfg_.max_time) {
                P.elapsed = ode.t();
                return P;
            }
        }
    }

    CylinderPass run(const RealVector& entry)
    {
        return run(entry, 0.0, 0, [](long, const RealMatrix&, const RealVector&) {});
    }

private:
    void rhs(const double* y, double* dy)
    {
        field_.eval(y, dy);
        if (!obs_.variational) return;
        field_.jacobian(y, Jg_.data());
        Eigen::Map<const RowMatrix> Z(y + d_, d_, d_);
        Eigen::Map<RowMatrix> dZ(dy + d_, d_, d_);
        dZ.noalias() = Jg_ * Z;
    }

    double dist_at(Dop853& ode, double t, int* which = nullptr)
    {
        for (int i = 0; i < d_; ++i) w_[i] = ode.dense_component(i, t);
        return sing_.distance(w_.data(), which);
    }

    /// Quadrature observers on [a, b] within the last step.
    void observe(Dop853& ode, double a, double b, CylinderPass& P)
    {
        if (!obs_.quadrature || !(b > a)) return;
        const double h = b - a;
        for (size_t q = 0; q < gl_.x.size(); ++q) {
            const double t = a + gl_.x[q] * h;
            for (int i = 0; i < d_; ++i) w_[i] = ode.dense_component(i, t);
            field_.jacobian(w_.data(), Jg_.data());
            field_.jacobian_bare(w_.data(), Jb_.data());
            P.rate_glued += gl_.w[q] * h * sectional_rate(RealMatrix(Jg_));
            P.rate_bare += gl_.w[q] * h * sectional_rate(RealMatrix(Jb_));
        }
        double scale = 0.0;
        for (double dl : obs_.deltas) scale = std::max(scale, 2.0 * dl);
        for (double r : obs_.radii) scale = std::max(scale, r);
        if (scale == 0.0) return;
        constexpr int kSub = 16;
        double dmin = std::numeric_limits<double>::infinity();
        std::vector<double> dsamp(kSub + 1);
        for (int j = 0; j <= kSub; ++j) {
            dsamp[j] = dist_at(ode, a + h * j / kSub);
            dmin = std::min(dmin, dsamp[j]);
        }
        if (dmin > 1.5 * scale) {
            for (size_t ri = 0; ri < obs_.radii.size(); ++ri) close_visit(ri, P);
            return;
        }
        for (int j = 0; j < kSub; ++j) {
            const double sa = a + h * j / kSub, sb = a + h * (j + 1) / kSub;
            if (std::min(dsamp[j], dsamp[j + 1]) > 1.5 * scale) {
                for (size_t ri = 0; ri < obs_.radii.size(); ++ri) close_visit(ri, P);
                continue;
            }
            for (size_t q = 0; q < gl_.x.size(); ++q) {
                const double t = sa + gl_.x[q] * (sb - sa);
                const double d = dist_at(ode, t);
                for (size_t di = 0; di < obs_.deltas.size(); ++di)
                    if (d < 2.0 * obs_.deltas[di])
                        P.int_trunc[di] -= gl_.w[q] * (sb - sa) * std::log(truncated_distance(d, obs_.deltas[di]));
            }
            for (size_t ri = 0; ri < obs_.radii.size(); ++ri) ball_segment(ode, sa, sb, dsamp[j], dsamp[j + 1], ri, P);
        }
    }

    double root_of(Dop853& ode, double a, double b, double r)
    {
        double fa = dist_at(ode, a) - r;
        for (int it = 0; it < 60 && b - a > 1e-14; ++it) {
            const double c = 0.5 * (a + b);
            const double fc = dist_at(ode, c) - r;
            if ((fc < 0.0) == (fa < 0.0)) {
                a = c;
                fa = fc;
            } else {
                b = c;
            }
        }
        return 0.5 * (a + b);
    }

    void close_visit(size_t ri, CylinderPass&)
    {
        inside_[ri] = -1;
        open_visit_[ri] = -1;
    }

    /// Integrates -log d over the part of [a, b] inside the ball of radius r_ri.
    void ball_segment(Dop853& ode, double a, double b, double da, double db, size_t ri, CylinderPass& P)
    {
        const double r = obs_.radii[ri];
        double lo = a, hi = b;
        const bool ina = da < r, inb = db < r;
        if (!ina && !inb) {
            // Possible graze between samples; check the midpoint.
            if (dist_at(ode, 0.5 * (a + b)) >= r) {
                if (inside_[ri] >= 0) close_visit(ri, P);
                return;
            }
            lo = root_of(ode, a, 0.5 * (a + b), r);
            hi = root_of(ode, 0.5 * (a + b), b, r);
        } else if (!ina) {
            lo = root_of(ode, a, b, r);
        } else if (!inb) {
            hi = root_of(ode, a, b, r);
        }
        if (inside_[ri] < 0 || lo > a) {
            int which = 0;
            const double d0 = dist_at(ode, lo, &which);
            (void)d0;
            BallVisit v;
            v.sigma = which;
            v.radius_index = static_cast<int>(ri);
            v.x0 = sing_.entry_offset(w_.data(), which);
            P.visits.push_back(v);
            open_visit_[ri] = static_cast<int>(P.visits.size()) - 1;
            inside_[ri] = which;
        }
        double acc = 0.0;
        for (size_t q = 0; q < gl_.x.size(); ++q) {
            const double t = lo + gl_.x[q] * (hi - lo);
            acc -= gl_.w[q] * std::log(dist_at(ode, t));
        }
        acc *= hi - lo;
        P.ball_time[ri] += hi - lo;
        P.ball_integral[ri] += acc;
        auto& v = P.visits[static_cast<size_t>(open_visit_[ri])];
        v.integral += acc;
        v.duration += hi - lo;
        if (hi < b) close_visit(ri, P);
    }

    ModelSpec model_;
    CylinderField field_;
    IntegratorConfig cfg_;
    PassObservers obs_;
    SingularSet sing_;
    GaussLegendre gl_;
    int d_ = 0, v_ = 0, n_ = 0;
    RowMatrix Jg_, Jb_;
    std::vector<double> w_;
    std::vector<int> inside_, open_visit_;
};

struct ReturnResult {
    SolenoidPoint next;
    double tau = 1.0;
    RealMatrix cocycle; ///< derivative of the lap in chart tangent coordinates
    bool crossed = false;
    bool found = true;
    CylinderPass pass;
};

/// One Poincare return to the bottom section Sigma_0.
inline ReturnResult poincare_return(const SolenoidSpec& spec, const ModelSpec& model, const SolenoidPoint& s,
                                    const IntegratorConfig& cfg = {}, PassObservers obs = {})
{
    ReturnResult r;
    const RealMatrix DF = identification_derivative(model, spec);
    const RealVector h = chart_horizontal(model, s);
    if (!chart_in_u(model, h)) {
        r.next = solenoid_map(spec, s);
        r.cocycle = DF;
        return r;
    }
    CylinderIntegrator cyl(model, cfg, std::move(obs));
    r.crossed = true;
    r.pass = cyl.run(chart_point(model, h, -2.0));
    if (!r.pass.found) {
        r.found = false;
        r.next = s;
        r.tau = r.pass.elapsed;
        return r;
    }
    r.tau = r.pass.tau;
    SolenoidPoint exit = s;
    const RealVector dh = chart_horizontal_of(model, r.pass.exit) - h;
    for (int i = 0; i < s.k(); ++i) exit.theta[i] = torus_shift(s.theta[i], dh(i) * model.u_radius / 3.0);
    r.next = solenoid_map(spec, exit);
    r.cocycle = DF * r.pass.cocycle;
    return r;
}

struct LedgerEntry {
    long lap = 0;          ///< k_i, index of the return that crosses
    double n = 0.0;        ///< entry time
    double m = 0.0;        ///< exit time
    double tau = 0.0;
    double entry_distance = 0.0; ///< base distance to p at entry
    double transition_error = 0.0; ///< max |h_exit - h_entry|
    double psi_cu = 0.0;   ///< log ||wedge^2 (D phi_tau)^{-1}|| over the pass
    double log_det = 0.0;
    double rate_glued = 0.0;
    double rate_bare = 0.0;
};

class CrossingLedger {
public:
    std::vector<LedgerEntry> entries;
    std::vector<double> lap_taus; ///< tau of every lap, if recorded
    long total_returns = 0;

    /// l(i) = k_{i+1} - 1: laps completed before the next crossing starts.
    long lap_number(size_t i) const
    {
        const long next = i + 1 < entries.size() ? entries[i + 1].lap : total_returns;
        return next - 1;
    }
    /// The counting form i + sum_{k<=i} (n_{k+1} - m_k), which equals
    /// k_{i+1} - k_0 - 1 because every laminar lap lasts one time unit.
    long lap_number_counting(size_t i) const
    {
        const long k0 = entries.empty() ? 0 : entries.front().lap;
        return lap_number(i) - k0;
    }
    /// l(i, q): the lap reached q laminar laps after the i-th exit.
    long lap_number(size_t i, long q) const { return entries[i].lap + 1 + q; }

    void merge(const CrossingLedger& o)
    {
        const double t_off = lap_taus.empty() ? 0.0 : [&] {
            double s = 0.0;
            for (double x : lap_taus) s += x;
            return s;
        }();
        for (auto e : o.entries) {
            e.lap += total_returns;
            e.n += t_off;
            e.m += t_off;
            entries.push_back(e);
        }
        lap_taus.insert(lap_taus.end(), o.lap_taus.begin(), o.lap_taus.end());
        total_returns += o.total_returns;
    }
};

struct OrbitOptions {
    std::vector<double> deltas = default_scale_grid();
    std::vector<double> radii = default_scale_grid();
    bool variational = true;
    bool quadrature = true;
    bool record_laps = false;
    std::uint64_t seed = 1;
    /// Called at the start of each lap with the section point and the lap time.
    std::function<void(const SolenoidPoint&, double)> on_lap;
};

struct OrbitResult {
    CrossingLedger ledger;
    BirkhoffAccumulator acc;
    std::vector<BallVisit> visits;
    SolenoidPoint final_point;
    bool terminated = false;
    std::string reason;
    std::uint64_t seed = 0;
};

namespace detail {

inline double step_psi(const RealMatrix& S, int p)
{
    if (S.rows() < p) return 0.0;
    return log_wedge_inv_norm(S, p);
}

} // namespace detail

/// Iterates the return map n_returns times, accumulating the time-one
/// cocycle observables along the global clock.
inline OrbitResult orbit_generate(const SolenoidSpec& spec, const ModelSpec& model, const SolenoidPoint& s0,
                                  long n_returns, const IntegratorConfig& cfg = {}, OrbitOptions opt = {})
{
    spec.validate();
    model.validate();
    if (spec.k != model.dim() - 1)
        throw ConfigError("solenoid.k: must equal the number of horizontal chart coordinates of the model");
    OrbitResult out;
    out.seed = opt.seed;
    out.acc = BirkhoffAccumulator(opt.deltas, opt.radii);
    std::mt19937_64 rng(opt.seed);
    PassObservers obs;
    obs.deltas = opt.deltas;
    obs.radii = opt.radii;
    obs.variational = opt.variational;
    obs.quadrature = opt.quadrature;
    CylinderIntegrator cyl(model, cfg, obs);
    const SingularSet& sing = cyl.singular();
    const int D = model.dim();
    const RealMatrix DF = identification_derivative(model, spec);
    const double psi_laminar = detail::step_psi(DF, 2);

    auto& acc = out.acc;
    RealMatrix S = RealMatrix::Identity(D, D);
    long next_boundary = 1;
    double t = 0.0;
    SolenoidPoint s = s0;
    const double inf = std::numeric_limits<double>::infinity();

    auto finalize = [&](long nb, double dist) {
        if (opt.variational) {
            const double lj = std::log(std::abs(S.determinant()));
            acc.add_step(detail::step_psi(S, 2), detail::step_psi(S, 3), lj, dist);
        } else {
            acc.add_step(0.0, 0.0, 0.0, dist);
        }
        S.setIdentity();
        next_boundary = nb + 1;
    };

    for (long lap = 0; lap < n_returns; ++lap) {
        const RealVector h = chart_horizontal(model, s);
        double tau = 1.0;
        if (!chart_in_u(model, h)) {
            if (opt.on_lap) opt.on_lap(s, 1.0);
            const double t_end = t + 1.0;
            while (static_cast<double>(next_boundary) < t_end) finalize(next_boundary, inf);
            if (opt.variational) S = DF * S;
            // A step ending exactly on the lap boundary is complete now.
            if (static_cast<double>(next_boundary) == t_end) finalize(next_boundary, inf);
            s = solenoid_map(spec, s);
            acc.sum_rate_accounting += psi_laminar;
        } else {
            const RealVector entry = chart_point(model, h, -2.0);
            CylinderPass P = cyl.run(entry, t, next_boundary, [&](long nb, const RealMatrix& Z, const RealVector& w) {
                if (opt.variational) S = Z * S;
                finalize(nb, sing.distance(w.data()));
            });
            if (!P.found) {
                out.terminated = true;
                out.reason = "no cylinder exit within max_time at lap " + std::to_string(lap) +
                             " (stable-manifold suspect)";
                break;
            }
            tau = P.tau;
            if (opt.on_lap) opt.on_lap(s, tau);
            if (opt.variational) S = DF * (P.last_piece * S);
            LedgerEntry e;
            e.lap = lap;
            e.n = t;
            e.m = t + tau;
            e.tau = tau;
            e.entry_distance = base_distance_to_p(s);
            const RealVector dh = chart_horizontal_of(model, P.exit) - h;
            e.transition_error = dh.cwiseAbs().maxCoeff();
            if (opt.variational) {
                e.psi_cu = log_wedge_inv_norm(P.cocycle, 2, P.log_det);
                e.log_det = P.log_det;
            }
            e.rate_glued = P.rate_glued;
            e.rate_bare = P.rate_bare;
            out.ledger.entries.push_back(e);
            for (size_t i = 0; i < acc.deltas.size(); ++i) acc.int_trunc[i] += P.int_trunc[i];
            for (size_t i = 0; i < acc.radii.size(); ++i) {
                acc.ball_time[i] += P.ball_time[i];
                acc.ball_integral[i] += P.ball_integral[i];
            }
            out.visits.insert(out.visits.end(), P.visits.begin(), P.visits.end());
            ++acc.crossings;
            acc.sum_tau_crossing += tau;
            acc.sum_rate_crossing += P.rate_glued;
            acc.sum_rate_accounting += P.rate_glued + psi_laminar;
            for (int i = 0; i < s.k(); ++i) s.theta[i] = torus_shift(s.theta[i], dh(i) * model.u_radius / 3.0);
            s = solenoid_map(spec, s);
        }
        refill_low_bits(spec, s, rng);
        t += tau;
        ++acc.returns;
        acc.total_time = t;
        if (opt.record_laps) out.ledger.lap_taus.push_back(tau);
        out.ledger.total_returns = lap + 1;
    }
    out.final_point = s;
    return out;
}

} // namespace seclab
