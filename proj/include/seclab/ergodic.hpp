#pragma once

// Birkhoff-average diagnostics: sectional expansion, slow recurrence,
// crossing-time laws, empirical measures and the slowdown sweep.

#include "seclab/accumulator.hpp"
#include "seclab/suspension.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace seclab {

class EmptyAccumulatorError : public std::domain_error {
public:
    EmptyAccumulatorError() : std::domain_error("empty accumulator") {}
};

namespace detail {

inline size_t grid_index(const std::vector<double>& g, double x, const char* who)
{
    for (size_t i = 0; i < g.size(); ++i)
        if (g[i] == x) return i;
    throw std::invalid_argument(std::string(who) + ": value not in the accumulator grid");
}

} // namespace detail

/// Discrete slow-recurrence average (1/n) sum -log d_delta at integer times.
inline double sr_average(const BirkhoffAccumulator& a, double delta)
{
    if (a.n == 0) throw EmptyAccumulatorError();
    return a.sum_trunc[detail::grid_index(a.deltas, delta, "sr_average")] / static_cast<double>(a.n);
}

/// Continuous-time version (1/T) int -log d_delta dt.
inline double sr_average_continuous(const BirkhoffAccumulator& a, double delta)
{
    if (a.n == 0 || !(a.total_time > 0.0)) throw EmptyAccumulatorError();
    return a.int_trunc[detail::grid_index(a.deltas, delta, "sr_average_continuous")] / a.total_time;
}

inline double wsr_frequency(const BirkhoffAccumulator& a, double r)
{
    if (a.n == 0) throw EmptyAccumulatorError();
    return static_cast<double>(a.visits[detail::grid_index(a.radii, r, "wsr_frequency")]) / static_cast<double>(a.n);
}

struct RecurrenceBound {
    double S = 0.0;  ///< (5/2)((log x0)^2 - (log r)^2)
    double t0 = 0.0; ///< 5 log(r / x0)
};

/// Closed-form per-ball bound for the linear saddle diag(1/5, -1/5).
inline RecurrenceBound recurrence_bound_oracle(double x0, double r)
{
    if (!(x0 > 0.0 && x0 < r)) throw std::invalid_argument("recurrence_bound_oracle: need 0 < |x0| < r");
    const double lx = std::log(x0), lr = std::log(r);
    return {2.5 * (lx * lx - lr * lr), 5.0 * (lr - lx)};
}

/// Right-hand side integral over the r-ball in the plane:
/// int_{|u|<r} ((log|u|)^2 - (log r)^2) du = (pi r^2 / 2)(1 - 2 log r).
inline double lebesgue_ball_bound(double r)
{
    return 0.5 * std::acos(-1.0) * r * r * (1.0 - 2.0 * std::log(r));
}

enum class Verdict { Holds, Fails, Inconclusive };

inline const char* to_string(Verdict v)
{
    switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::Fails: return "fails";
    case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

struct WindowCheck {
    double early = std::numeric_limits<double>::quiet_NaN(); ///< average over [N/4, N/2)
    double late = std::numeric_limits<double>::quiet_NaN();  ///< average over [N/2, N]
    bool converged = false;
};

inline constexpr double kWindowRelTol = 0.02;
inline constexpr double kWindowAbsTol = 1e-3;

/// Agreement of the averages over the last two dyadic windows.
inline WindowCheck window_check(const BirkhoffAccumulator& a, double WindowSnapshot::*field, double total)
{
    WindowCheck w;
    if (!a.snapshots_valid || a.n < 4 * BirkhoffAccumulator::kSnapshotEvery) return w;
    auto at_or_below = [&](long target) -> std::pair<long, double> {
        std::pair<long, double> best{0, 0.0};
        for (const auto& s : a.snapshots)
            if (s.n <= target) best = {s.n, s.*field};
        return best;
    };
    const auto q = at_or_below(a.n / 4), h = at_or_below(a.n / 2);
    if (h.first <= q.first || a.n <= h.first) return w;
    w.early = (h.second - q.second) / static_cast<double>(h.first - q.first);
    w.late = (total - h.second) / static_cast<double>(a.n - h.first);
    const double scale = std::max(std::abs(w.early), std::abs(w.late));
    w.converged = std::abs(w.early - w.late) <= std::max(kWindowRelTol * scale, kWindowAbsTol);
    return w;
}

struct ErgodicReport {
    long n = 0;
    long returns = 0;
    long crossings = 0;
    double total_time = 0.0;
    std::uint64_t seed = 0;

    double psi_cu_avg = std::numeric_limits<double>::quiet_NaN();
    double nu2se_margin = std::numeric_limits<double>::quiet_NaN();
    double wase_rate = std::numeric_limits<double>::quiet_NaN();
    double psi3_avg = std::numeric_limits<double>::quiet_NaN();
    double p3_margin = std::numeric_limits<double>::quiet_NaN();
    double rate_accounting_avg = std::numeric_limits<double>::quiet_NaN();
    std::map<double, double> sr_values;
    std::map<double, double> sr_continuous;
    std::map<double, double> wsr_frequencies;
    double tau_mean = std::numeric_limits<double>::quiet_NaN();
    double tau_crossing_mean = std::numeric_limits<double>::quiet_NaN();
    double tau_loglaw_slope = std::numeric_limits<double>::quiet_NaN();

    WindowCheck psi_window, logj_window, psi3_window;
    Verdict nu2se = Verdict::Inconclusive;
    Verdict wase = Verdict::Inconclusive;
    Verdict p3 = Verdict::Inconclusive;
    bool has_p3 = false;

    /// wNU2SE implies wASE on this orbit (vacuous when nu2se does not hold).
    bool implication_ok() const { return nu2se != Verdict::Holds || wase == Verdict::Holds; }
};

inline Verdict verdict_of(double margin, bool converged)
{
    if (!converged || !std::isfinite(margin)) return Verdict::Inconclusive;
    return margin > 0.0 ? Verdict::Holds : Verdict::Fails;
}

/// dim: dimension of E^cu, to decide whether the order-3 quantity exists.
inline ErgodicReport condition_verdicts(const BirkhoffAccumulator& a, int dim, std::uint64_t seed = 0)
{
    ErgodicReport r;
    r.n = a.n;
    r.returns = a.returns;
    r.crossings = a.crossings;
    r.total_time = a.total_time;
    r.seed = seed;
    r.has_p3 = dim >= 3;
    if (a.n == 0) return r;
    r.psi_cu_avg = a.psi_cu_avg();
    r.nu2se_margin = -r.psi_cu_avg;
    r.wase_rate = a.sum_log_jcu / a.total_time;
    r.rate_accounting_avg = a.rate_accounting_avg();
    if (r.has_p3) {
        r.psi3_avg = a.psi3_avg();
        r.p3_margin = -r.psi3_avg;
    }
    for (double d : a.deltas) {
        r.sr_values[d] = sr_average(a, d);
        r.sr_continuous[d] = sr_average_continuous(a, d);
    }
    for (double x : a.radii) r.wsr_frequencies[x] = wsr_frequency(a, x);
    if (a.returns > 0) r.tau_mean = a.total_time / static_cast<double>(a.returns);
    if (a.crossings > 0) r.tau_crossing_mean = a.sum_tau_crossing / static_cast<double>(a.crossings);
    r.psi_window = window_check(a, &WindowSnapshot::psi_cu, a.sum_psi_cu);
    r.logj_window = window_check(a, &WindowSnapshot::log_jcu, a.sum_log_jcu);
    r.nu2se = verdict_of(r.nu2se_margin, r.psi_window.converged);
    r.wase = verdict_of(r.wase_rate, r.logj_window.converged);
    if (r.has_p3) {
        r.psi3_window = window_check(a, &WindowSnapshot::psi3, a.sum_psi3);
        r.p3 = verdict_of(r.p3_margin, r.psi3_window.converged);
    }
    return r;
}

struct LogLawFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double residual_rms = 0.0;
    double max_envelope_excess = 0.0; ///< max over crossings of (tau - fit) / fit
    size_t count = 0;
};

inline constexpr size_t kLogLawMinCrossings = 30;

/// Least-squares fit tau = slope |log d| + intercept.
inline LogLawFit tau_loglaw_fit(const std::vector<double>& taus, const std::vector<double>& dists)
{
    if (taus.size() != dists.size()) throw std::invalid_argument("tau_loglaw_fit: size mismatch");
    if (taus.size() < kLogLawMinCrossings) throw std::invalid_argument("tau_loglaw_fit: need at least 30 crossings");
    const size_t n = taus.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i) {
        if (!(dists[i] > 0.0)) throw std::invalid_argument("tau_loglaw_fit: distances must be positive");
        x[i] = std::abs(std::log(dists[i]));
        sx += x[i];
        sy += taus[i];
        sxx += x[i] * x[i];
        sxy += x[i] * taus[i];
    }
    LogLawFit f;
    f.count = n;
    const double den = n * sxx - sx * sx;
    f.slope = den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
    f.intercept = (sy - f.slope * sx) / n;
    const double ym = sy / n;
    double ss_res = 0, ss_tot = 0;
    for (size_t i = 0; i < n; ++i) {
        const double fit = f.slope * x[i] + f.intercept;
        ss_res += (taus[i] - fit) * (taus[i] - fit);
        ss_tot += (taus[i] - ym) * (taus[i] - ym);
        if (fit > 0.0) f.max_envelope_excess = std::max(f.max_envelope_excess, (taus[i] - fit) / fit);
    }
    f.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    f.residual_rms = std::sqrt(ss_res / n);
    return f;
}

inline LogLawFit tau_loglaw_fit(const CrossingLedger& L)
{
    std::vector<double> t, d;
    for (const auto& e : L.entries) {
        t.push_back(e.tau);
        d.push_back(e.entry_distance);
    }
    return tau_loglaw_fit(t, d);
}

/// Return-time-weighted histogram of section points over the base torus.
/// For k = 1 the nx * ny cells split [0, 1) into equal bins; for k >= 2 the
/// grid covers the first two torus coordinates.
class EmpiricalMeasure {
public:
    EmpiricalMeasure(int k = 1, int nx = 64, int ny = 64) : k_(k), nx_(nx), ny_(ny), w_(static_cast<size_t>(nx) * ny, 0.0)
    {
        if (k < 1 || nx < 1 || ny < 1) throw std::invalid_argument("EmpiricalMeasure: bad grid");
    }

    size_t cell_of(const SolenoidPoint& p) const
    {
        if (p.k() != k_) throw std::out_of_range("EmpiricalMeasure: point outside grid (torus dimension)");
        if (k_ == 1) return static_cast<size_t>((p.theta[0] >> 32) * static_cast<std::uint64_t>(nx_ * ny_) >> 32);
        const size_t i = static_cast<size_t>((p.theta[0] >> 32) * static_cast<std::uint64_t>(nx_) >> 32);
        const size_t j = static_cast<size_t>((p.theta[1] >> 32) * static_cast<std::uint64_t>(ny_) >> 32);
        return i * ny_ + j;
    }

    void update(const SolenoidPoint& p, double tau)
    {
        if (!(tau > 0.0)) throw std::invalid_argument("EmpiricalMeasure: return time must be positive");
        w_[cell_of(p)] += tau;
        total_ += tau;
    }

    void merge(const EmpiricalMeasure& o)
    {
        if (o.w_.size() != w_.size() || o.k_ != k_) throw std::invalid_argument("EmpiricalMeasure::merge: grids differ");
        for (size_t i = 0; i < w_.size(); ++i) w_[i] += o.w_[i];
        total_ += o.total_;
    }

    const std::vector<double>& weights() const { return w_; }
    double total_time() const { return total_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }

    std::vector<double> normalized() const
    {
        std::vector<double> p(w_.size(), 0.0);
        if (total_ > 0.0)
            for (size_t i = 0; i < w_.size(); ++i) p[i] = w_[i] / total_;
        return p;
    }

private:
    int k_, nx_, ny_;
    std::vector<double> w_;
    double total_ = 0.0;
};

inline EmpiricalMeasure empirical_measure_update(EmpiricalMeasure M, const SolenoidPoint& p, double tau)
{
    M.update(p, tau);
    return M;
}

inline double tv_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b)
{
    const auto p = a.normalized(), q = b.normalized();
    if (p.size() != q.size()) throw std::invalid_argument("tv_distance: grids differ");
    double s = 0.0;
    for (size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

/// Section averages computed as integrals over the entry set U instead of
/// along one orbit. Lebesgue measure on the base is invariant for g, so the
/// time average of an observable accumulated during crossings is
///   int_U h d(leb) / E[tau],   E[tau] = 1 + int_U (tau - 1) d(leb).
/// Entry radii are sampled with Gauss-Legendre panels in log radius.
struct SectionQuadrature {
    double e_tau = 0.0;
    double u_measure = 0.0;        ///< Lebesgue measure of U on the base
    std::vector<double> deltas, radii;
    std::vector<double> sr;        ///< per delta, continuous-time average
    std::vector<double> ball_avg;  ///< per radius, time average of the in-ball -log d integral
    std::vector<double> ball_freq; ///< per radius, fraction of time in the balls
    double rate_avg = 0.0;         ///< time average of the crossing rate integral
    double psi_cross_avg = 0.0;    ///< time average of crossing psi^cu
    std::vector<double> nodes;     ///< entry radii
    std::vector<double> taus;      ///< crossing time per node
    std::vector<BallVisit> visits; ///< ball visits of all node crossings
    std::vector<double> visit_node; ///< entry radius of each visit
};

struct QuadratureOptions {
    /// Smallest entry radius; 0 picks 1e-5 for the Y4 families, whose offset
    /// after the first saddle passage is ~rho^2 and drops under the
    /// integrator error below that, and 1e-10 otherwise. The omitted
    /// measure is ~rho_min^2.
    double rho_min = 0.0;
    int panels = 24;
    int order = 8;
    std::vector<double> deltas = default_scale_grid();
    std::vector<double> radii = default_scale_grid();
};

inline SectionQuadrature section_quadrature(const ModelSpec& model, const IntegratorConfig& cfg = {},
                                            QuadratureOptions opt = {})
{
    const bool planar = model.family == Family::Y0 || model.family == Family::Y1;
    if (!planar && !(model.family == Family::Y3 || model.family == Family::Y4))
        throw std::invalid_argument("section_quadrature: needs a glued family over a one- or two-dimensional base");
    PassObservers obs;
    obs.deltas = opt.deltas;
    obs.radii = opt.radii;
    obs.variational = true;
    CylinderIntegrator cyl(model, cfg, obs);
    SectionQuadrature Q;
    Q.deltas = opt.deltas;
    Q.radii = opt.radii;
    Q.sr.assign(opt.deltas.size(), 0.0);
    Q.ball_avg.assign(opt.radii.size(), 0.0);
    Q.ball_freq.assign(opt.radii.size(), 0.0);
    const double pi = std::acos(-1.0);
    const double c = model.u_radius / 3.0; // chart unit in turns
    // d(leb) = 2 c dx (planar, symmetric in x) or 2 pi c^2 rho d rho.
    const double rho_min = opt.rho_min > 0.0 ? opt.rho_min : (model.family == Family::Y4 ? 1e-5 : 1e-10);
    const double lo = std::log(rho_min), hi = std::log(3.0);
    const GaussLegendre gl(opt.order);
    double int_tau = 0.0, int_rate = 0.0, int_psi = 0.0;
    std::vector<double> int_sr(opt.deltas.size(), 0.0), int_ball(opt.radii.size(), 0.0),
        int_btime(opt.radii.size(), 0.0);
    Q.u_measure = planar ? 2.0 * c * 3.0 : pi * 9.0 * c * c;
    for (int p = 0; p < opt.panels; ++p) {
        const double a = lo + (hi - lo) * p / opt.panels, b = lo + (hi - lo) * (p + 1) / opt.panels;
        for (size_t q = 0; q < gl.x.size(); ++q) {
            const double s = a + gl.x[q] * (b - a);
            const double rho = std::exp(s);
            const double jac = planar ? 2.0 * c * rho : 2.0 * pi * c * c * rho * rho; // d(leb)/ds
            const double wq = gl.w[q] * (b - a) * jac;
            RealVector h = RealVector::Zero(model.dim() - 1);
            h(0) = rho;
            const CylinderPass P = cyl.run(chart_point(model, h, -2.0));
            if (!P.found) throw std::runtime_error("section_quadrature: crossing timed out");
            Q.nodes.push_back(rho);
            Q.taus.push_back(P.tau);
            int_tau += wq * (P.tau - 1.0);
            int_rate += wq * P.rate_glued;
            int_psi += wq * log_wedge_inv_norm(P.cocycle, 2, P.log_det);
            for (size_t i = 0; i < opt.deltas.size(); ++i) int_sr[i] += wq * P.int_trunc[i];
            for (size_t i = 0; i < opt.radii.size(); ++i) {
                int_ball[i] += wq * P.ball_integral[i];
                int_btime[i] += wq * P.ball_time[i];
            }
            for (const auto& v : P.visits) {
                Q.visits.push_back(v);
                Q.visit_node.push_back(rho);
            }
        }
    }
    Q.e_tau = 1.0 + int_tau;
    for (size_t i = 0; i < opt.deltas.size(); ++i) Q.sr[i] = int_sr[i] / Q.e_tau;
    for (size_t i = 0; i < opt.radii.size(); ++i) {
        Q.ball_avg[i] = int_ball[i] / Q.e_tau;
        Q.ball_freq[i] = int_btime[i] / Q.e_tau;
    }
    Q.rate_avg = int_rate / Q.e_tau;
    Q.psi_cross_avg = int_psi / Q.e_tau;
    return Q;
}

struct SweepRow {
    double zeta0 = 0.0;
    double psi_cu_avg = 0.0;
    double psi3_avg = 0.0;
    double rate_accounting_avg = 0.0;
    double crossing_rate_mean = 0.0; ///< mean per-crossing rate integral
    double tau_crossing_mean = 0.0;
    long crossings = 0;
    long n = 0;
};

/// Runs one orbit per slowdown depth from the same initial point.
inline std::vector<SweepRow> slowdown_sweep(const ModelSpec& templ, const std::vector<double>& zeta_grid,
                                            long n_returns, std::uint64_t seed, const IntegratorConfig& cfg = {})
{
    std::vector<SweepRow> rows;
    for (double z : zeta_grid) {
        if (!(z >= 0.0 && z <= 0.95)) throw ConfigError("slowdown_sweep: zeta0 grid must lie in [0, 0.95]");
        ModelSpec m = templ;
        m.gluing = Gluing::Slowed;
        m.zeta0 = z;
        const SolenoidSpec sp = SolenoidSpec::for_model(m);
        std::mt19937_64 rng(seed);
        const SolenoidPoint s0 = sample_section(sp, rng);
        OrbitOptions opt;
        opt.seed = seed;
        const OrbitResult o = orbit_generate(sp, m, s0, n_returns, cfg, opt);
        if (o.terminated) throw std::runtime_error("slowdown_sweep: " + o.reason);
        SweepRow r;
        r.zeta0 = z;
        r.psi_cu_avg = o.acc.psi_cu_avg();
        r.psi3_avg = o.acc.psi3_avg();
        r.rate_accounting_avg = o.acc.rate_accounting_avg();
        r.crossings = o.acc.crossings;
        r.n = o.acc.n;
        if (r.crossings > 0) {
            r.crossing_rate_mean = o.acc.sum_rate_crossing / static_cast<double>(r.crossings);
            r.tau_crossing_mean = o.acc.sum_tau_crossing / static_cast<double>(r.crossings);
        }
        rows.push_back(r);
    }
    return rows;
}

/// Per-crossing rate integral of the bare field along the slowed orbit,
/// for one entry point.
inline double crossing_rate_integral(const ModelSpec& m, const RealVector& entry_h, const IntegratorConfig& cfg = {})
{
    PassObservers obs;
    obs.deltas.clear();
    obs.radii.clear();
    obs.variational = false;
    CylinderIntegrator cyl(m, cfg, obs);
    const CylinderPass P = cyl.run(chart_point(m, entry_h, -2.0));
    if (!P.found) throw std::runtime_error("crossing_rate_integral: crossing timed out");
    return P.rate_bare;
}

} // namespace seclab
