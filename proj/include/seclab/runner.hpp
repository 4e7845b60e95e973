#pragma once

// Experiment runner: binds an ExperimentConfig to the library and returns a
// JSON report plus named CSV tables. Output depends only on (config, seed);
// the thread count changes scheduling, never results.

#include "seclab/compound.hpp"
#include "seclab/config.hpp"
#include "seclab/ergodic.hpp"
#include "seclab/fields.hpp"
#include "seclab/flow.hpp"
#include "seclab/io.hpp"
#include "seclab/suspension.hpp"

#include <atomic>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace seclab {

struct RunOutput {
    json report;
    std::vector<std::pair<std::string, std::string>> tables; ///< file name, CSV body
    bool withheld = false; ///< some verdict is inconclusive or some orbit failed
};

/// Runs body(i) for i in [0, n) on up to `threads` workers.
inline void parallel_for(int n, int threads, const std::function<void(int)>& body)
{
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> err(n);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i; (i = next.fetch_add(1)) < n;) {
                try {
                    body(i);
                } catch (...) {
                    err[i] = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : err)
        if (e) std::rethrow_exception(e);
}

namespace detail {

inline json matrix_json(const RealMatrix& M)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        std::vector<double> r(M.cols());
        for (Eigen::Index j = 0; j < M.cols(); ++j) r[j] = M(i, j);
        a.push_back(r);
    }
    return a;
}

inline json vector_json(const RealVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

/// Transverse entry coordinates for a signed grid value x.
inline RealVector entry_for(const ModelSpec& m, double x)
{
    RealVector h = RealVector::Zero(m.dim() - 1);
    if (m.family == Family::Y2) {
        h(0) = x;
        for (Eigen::Index i = 1; i < h.size(); ++i) h(i) = 0.3;
    } else if (m.radial()) {
        h(0) = 0.6 * x;
        h(1) = 0.8 * x;
    } else {
        h(0) = x;
    }
    return h;
}

/// Coordinates the transition is claimed to preserve.
inline int preserved_count(const ModelSpec& m)
{
    if (m.family == Family::Y2) return 1;
    return m.dim() - 1;
}

/// Integrates s * field from w0 for time T and returns dense samples.
inline std::vector<RealVector> sample_path(const ModelSpec& m, const RealVector& w0, double T, double sign, int samples,
                                           const IntegratorConfig& cfg)
{
    CylinderField f(m);
    const int d = f.dim();
    Dop853 ode = cfg.make(
        [&](double, const double* y, double* dy) {
            f.eval(y, dy);
            for (int i = 0; i < d; ++i) dy[i] *= sign;
        },
        d);
    ode.init(0.0, w0.data());
    std::vector<RealVector> out{w0};
    RealVector p(d);
    for (int k = 1; k <= samples; ++k) {
        const double tk = T * k / samples;
        while (ode.t() < tk) ode.step(T);
        ode.dense(tk, p.data());
        out.push_back(p);
    }
    return out;
}

} // namespace detail

inline RunOutput run_equilibria(const ExperimentConfig& c)
{
    RunOutput o;
    std::ostringstream csv;
    CsvWriter w(csv);
    w.row("label", "location", "tag", "lambda_s", "lambda_u", "residual", "spectrum");
    json eqs = json::array();
    for (const auto& e : equilibria(c.model)) {
        json sp = json::array();
        std::string spec_str;
        for (const auto& l : e.cu_spectrum) {
            sp.push_back({l.real(), l.imag()});
            spec_str += format_double(l.real()) + (l.imag() >= 0 ? "+" : "") + format_double(l.imag()) + "i ";
        }
        const double res = field_eval(c.model, e.location).cwiseAbs().maxCoeff();
        eqs.push_back({{"label", e.label},
                       {"location", detail::vector_json(e.location)},
                       {"jacobian", detail::matrix_json(e.jacobian)},
                       {"cu_spectrum", sp},
                       {"class", to_string(e.sing_class.tag)},
                       {"lambda_s", e.sing_class.lambda_s},
                       {"lambda_u", e.sing_class.lambda_u},
                       {"residual", res}});
        std::string loc;
        for (Eigen::Index i = 0; i < e.location.size(); ++i) loc += (i ? " " : "") + format_double(e.location(i));
        w.row(e.label, loc, to_string(e.sing_class.tag), e.sing_class.lambda_s, e.sing_class.lambda_u, res, spec_str);
    }
    o.report["equilibria"] = eqs;
    o.tables.push_back({"equilibria.csv", csv.str()});
    return o;
}

inline RunOutput run_transition(const ExperimentConfig& c)
{
    RunOutput o;
    std::ostringstream csv;
    CsvWriter w(csv);
    w.row("x_in", "found", "max_abs_error", "tau", "elapsed");
    double max_err = 0.0, max_tau_outer = 0.0;
    int failures = 0;
    const int keep = detail::preserved_count(c.model);
    for (double x : c.entry_grid) {
        const RealVector h = detail::entry_for(c.model, x);
        const TransitionResult r = transition_map(c.model, h, c.integrator);
        double err = std::numeric_limits<double>::quiet_NaN();
        if (r.found) {
            err = (r.exit.head(keep) - h.head(keep)).cwiseAbs().maxCoeff();
            max_err = std::max(max_err, err);
            if (std::abs(x) >= 2.0) max_tau_outer = std::max(max_tau_outer, r.tau);
        } else {
            ++failures;
        }
        w.row(x, r.found ? 1 : 0, err, r.found ? r.tau : std::numeric_limits<double>::quiet_NaN(), r.elapsed);
    }
    o.report["max_abs_error"] = max_err;
    o.report["max_tau_outer"] = max_tau_outer;
    o.report["no_crossing"] = failures;
    o.withheld = failures > 0;
    o.tables.push_back({"transition.csv", csv.str()});
    return o;
}

struct SymmetryChecks {
    double mirror_deviation = std::numeric_limits<double>::quiet_NaN();
    double axis_final_distance = std::numeric_limits<double>::quiet_NaN(); ///< from sigma_1 + 1e-6 to sigma_2
    double axis_max_abs_x = std::numeric_limits<double>::quiet_NaN();
    double axis_reverse_final_distance = std::numeric_limits<double>::quiet_NaN(); ///< from sigma_2 - 1e-6 to sigma_1
    double branch_min_distance = std::numeric_limits<double>::quiet_NaN(); ///< W^u(sigma_1) branch to sigma_2
    double rotation_error = std::numeric_limits<double>::quiet_NaN();
};

/// Mirror trajectories, the invariant-axis orbit and rotational equivariance,
/// whichever apply to the family.
inline SymmetryChecks symmetry_checks(const ModelSpec& m, const IntegratorConfig& cfg, std::uint64_t seed,
                                      double T = 30.0)
{
    SymmetryChecks s;
    const bool planar = m.family == Family::Y0 || m.family == Family::Y1;
    if (planar) {
        RealVector a(2), b(2);
        a << 1.7, -2.0;
        b << 1.7, 2.0;
        // Over the crossing window only; past the top section the orbit leaves the cylinder.
        const CrossingResult cr = section_crossing(m, a, {1, 2.0, Direction::Increasing}, cfg);
        const double Tm = cr.found ? cr.event.time : 8.0;
        const auto P = detail::sample_path(m, a, Tm, 1.0, 400, cfg);
        const auto Q = detail::sample_path(m, b, Tm, -1.0, 400, cfg);
        s.mirror_deviation = 0.0;
        for (size_t i = 0; i < P.size(); ++i)
            s.mirror_deviation =
                std::max(s.mirror_deviation, std::abs(Q[i](0) - P[i](0)) + std::abs(Q[i](1) + P[i](1)));
        RealVector w0(2);
        w0 << 0.0, -1.0 + 1e-6;
        const auto A = detail::sample_path(m, w0, T, 1.0, 600, cfg);
        s.axis_max_abs_x = 0.0;
        for (const auto& p : A) s.axis_max_abs_x = std::max(s.axis_max_abs_x, std::abs(p(0)));
        s.axis_final_distance = std::hypot(A.back()(0), A.back()(1) - 1.0);
        // Leaving sigma_2 from 1e-6 away takes about 10 atanh(1 - 1e-6) / c
        // time units with c the vertical factor, so allow 200.
        w0 << 0.0, 1.0 - 1e-6;
        const auto B = detail::sample_path(m, w0, std::max(T, 200.0), 1.0, 600, cfg);
        s.axis_reverse_final_distance = std::hypot(B.back()(0), B.back()(1) + 1.0);
        // The unstable branch of sigma_1 leaves along x. Its closest approach
        // to sigma_2 is limited by the integration error e as ~e^{1/3}.
        IntegratorConfig tight = cfg;
        tight.rel_tol = std::min(cfg.rel_tol, 1e-12);
        tight.abs_tol = std::min(cfg.abs_tol, 1e-14);
        w0 << 1e-6, -1.0;
        const auto C = detail::sample_path(m, w0, 200.0, 1.0, 20000, tight);
        s.branch_min_distance = std::numeric_limits<double>::infinity();
        for (const auto& p : C) s.branch_min_distance = std::min(s.branch_min_distance, std::hypot(p(0), p(1) - 1.0));
    }
    if (m.radial()) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> U(-2.5, 2.5), A(0.0, 2.0 * std::acos(-1.0));
        s.rotation_error = 0.0;
        for (int k = 0; k < 1000; ++k) {
            RealVector w(m.dim());
            for (int i = 0; i < m.dim(); ++i) w(i) = U(rng);
            const double a = A(rng), ca = std::cos(a), sa = std::sin(a);
            RealVector rw = w;
            rw(0) = ca * w(0) - sa * w(1);
            rw(1) = sa * w(0) + ca * w(1);
            const RealVector f = field_eval(m, w);
            RealVector rf = f;
            rf(0) = ca * f(0) - sa * f(1);
            rf(1) = sa * f(0) + ca * f(1);
            s.rotation_error = std::max(s.rotation_error, (field_eval(m, rw) - rf).cwiseAbs().maxCoeff());
        }
    }
    return s;
}

inline RunOutput run_symmetry(const ExperimentConfig& c)
{
    RunOutput o;
    const SymmetryChecks s = symmetry_checks(c.model, c.integrator, c.seed);
    o.report["mirror_deviation"] = s.mirror_deviation;
    o.report["axis_from_sigma1"] = {{"final_distance_to_sigma2", s.axis_final_distance},
                                    {"max_abs_x", s.axis_max_abs_x}};
    o.report["axis_from_sigma2"] = {{"final_distance_to_sigma1", s.axis_reverse_final_distance}};
    o.report["unstable_branch_of_sigma1"] = {{"min_distance_to_sigma2", s.branch_min_distance}};
    o.report["rotation_error"] = s.rotation_error;
    std::ostringstream csv;
    CsvWriter w(csv);
    w.row("check", "value");
    w.row("mirror_deviation", s.mirror_deviation);
    w.row("axis_final_distance_to_sigma2", s.axis_final_distance);
    w.row("axis_max_abs_x", s.axis_max_abs_x);
    w.row("axis_reverse_final_distance_to_sigma1", s.axis_reverse_final_distance);
    w.row("branch_min_distance_to_sigma2", s.branch_min_distance);
    w.row("rotation_error", s.rotation_error);
    o.tables.push_back({"symmetry.csv", csv.str()});
    return o;
}

struct CompoundChecks {
    double fd_rel_error = 0.0;         ///< additive vs derivative of multiplicative
    double multiplicative_error = 0.0; ///< wedge(MN) vs wedge(M) wedge(N)
    double trace_error = 0.0;          ///< tr wedge^[2] A vs (d-1) tr A
    double cocycle_rel_error = std::numeric_limits<double>::quiet_NaN();
};

inline CompoundChecks compound_checks(const ModelSpec& m, const IntegratorConfig& cfg, std::uint64_t seed,
                                      double T)
{
    CompoundChecks r;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int d : {3, 4})
        for (int k = 0; k < 100; ++k) {
            RealMatrix A(d, d), B(d, d);
            for (int i = 0; i < d * d; ++i) {
                A.data()[i] = N(rng);
                B.data()[i] = N(rng);
            }
            const double h = 1e-6;
            const RealMatrix I = RealMatrix::Identity(d, d);
            const RealMatrix fd = (multiplicative_compound(I + h * A, 2) - multiplicative_compound(I - h * A, 2)) / (2 * h);
            const RealMatrix ad = additive_compound(A, 2);
            r.fd_rel_error = std::max(r.fd_rel_error, (fd - ad).norm() / ad.norm());
            const RealMatrix lhs = multiplicative_compound(A * B, 2);
            const RealMatrix rhs = multiplicative_compound(A, 2) * multiplicative_compound(B, 2);
            r.multiplicative_error = std::max(r.multiplicative_error, (lhs - rhs).cwiseAbs().maxCoeff() / (1.0 + rhs.cwiseAbs().maxCoeff()));
            r.trace_error = std::max(r.trace_error, std::abs(ad.trace() - (d - 1) * A.trace()));
        }
    if (!m.glued()) {
        RealVector w0 = RealVector::Zero(m.dim());
        for (int i = 0; i < m.dim(); ++i) w0(i) = 0.3 + 0.1 * i;
        const VariationalState st = integrate_variational(m, w0, std::min(T, 20.0), cfg);
        const RealMatrix W = multiplicative_compound(st.cocycle(), 2);
        const RealMatrix C = st.compound_cocycle();
        r.cocycle_rel_error = (W - C).norm() / C.norm();
    }
    return r;
}

inline RunOutput run_compound_check(const ExperimentConfig& c)
{
    RunOutput o;
    const CompoundChecks k = compound_checks(c.model, c.integrator, c.seed, c.horizon);
    o.report["fd_rel_error"] = k.fd_rel_error;
    o.report["multiplicative_error"] = k.multiplicative_error;
    o.report["trace_error"] = k.trace_error;
    o.report["cocycle_rel_error"] = k.cocycle_rel_error;
    std::ostringstream csv;
    CsvWriter w(csv);
    w.row("check", "value");
    w.row("fd_rel_error", k.fd_rel_error);
    w.row("multiplicative_error", k.multiplicative_error);
    w.row("trace_error", k.trace_error);
    w.row("cocycle_rel_error", k.cocycle_rel_error);
    o.tables.push_back({"compound.csv", csv.str()});
    return o;
}

/// One orbit per seed (seed, seed + 1, ...) from a Lebesgue-sampled start.
inline std::vector<OrbitResult> run_orbits(const ExperimentConfig& c, int threads, OrbitOptions base = {})
{
    std::vector<OrbitResult> out(c.n_orbits);
    const SolenoidSpec sp = c.effective_solenoid();
    parallel_for(c.n_orbits, threads, [&](int i) {
        const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
        std::mt19937_64 rng(seed);
        const SolenoidPoint s0 = sample_section(sp, rng);
        OrbitOptions opt = base;
        opt.seed = seed;
        opt.deltas = c.deltas;
        opt.radii = c.radii;
        out[i] = orbit_generate(sp, c.model, s0, c.n_returns, c.integrator, opt);
    });
    return out;
}

inline RunOutput run_birkhoff(const ExperimentConfig& c, int threads)
{
    RunOutput o;
    const auto orbits = run_orbits(c, threads);
    std::ostringstream csv;
    CsvWriter w(csv);
    w.row("seed", "n", "returns", "crossings", "psi_cu_avg", "nu2se_margin", "wase_rate", "psi3_avg",
          "rate_accounting_avg", "nu2se", "wase", "p3", "implication_ok");
    json reps = json::array();
    for (const auto& r : orbits) {
        ErgodicReport e = condition_verdicts(r.acc, c.model.dim(), r.seed);
        if (r.ledger.entries.size() >= kLogLawMinCrossings) e.tau_loglaw_slope = tau_loglaw_fit(r.ledger).slope;
        json j = to_json(e);
        if (r.terminated) j["terminated"] = r.reason;
        reps.push_back(j);
        o.withheld |= r.terminated || e.nu2se == Verdict::Inconclusive || e.wase == Verdict::Inconclusive ||
                      (e.has_p3 && e.p3 == Verdict::Inconclusive);
        w.row(r.seed, e.n, e.returns, e.crossings, e.psi_cu_avg, e.nu2se_margin, e.wase_rate, e.psi3_avg,
              e.rate_accounting_avg, to_string(e.nu2se), to_string(e.wase), e.has_p3 ? to_string(e.p3) : "n/a",
              e.implication_ok() ? 1 : 0);
    }
    o.report["orbits"] = reps;
    o.tables.push_back({"birkhoff.csv", csv.str()});
    if (!orbits.empty()) {
        std::ostringstream lc;
        write_ledger_csv(lc, orbits.front().ledger);
        o.tables.push_back({"ledger.csv", lc.str()});
    }
    return o;
}

/// Order-p margins -(1/n) sum log ||wedge^p (D f)^{-1}|| for p = 2 and 3.
inline RunOutput run_psectional(const ExperimentConfig& c, int threads)
{
    RunOutput o = run_birkhoff(c, threads);
    std::ostringstream csv;
    CsvWriter w(csv);
    w.row("seed", "p", "margin", "verdict");
    for (const auto& j : o.report["orbits"]) {
        w.row(j["seed"].get<std::uint64_t>(), 2, j["nu2se_margin"].is_number() ? j["nu2se_margin"].get<double>() : NAN,
              j["verdicts"]["nu2se"].get<std::string>());
        if (j.contains("p3_margin"))
            w.row(j["seed"].get<std::uint64_t>(), 3, j["p3_margin"].is_number() ? j["p3_margin"].get<double>() : NAN,
                  j["verdicts"]["p3"].get<std::string>());
    }
    o.tables.push_back({"psectional.csv", csv.str()});
    return o;
}

/// Crossing times over the entry ladder d = 2^{-j/2}, j = 10..44, in base
/// distance to p along the first torus axis.
inline std::pair<std::vector<double>, std::vector<double>> tau_ladder(const ModelSpec& m, const IntegratorConfig& cfg)
{
    PassObservers obs;
    obs.deltas.clear();
    obs.radii.clear();
    obs.variational = false;
    obs.quadrature = false;
    CylinderIntegrator cyl(m, cfg, obs);
    std::vector<double> taus, dists;
    for (int j = 10; j <= 44; ++j) {
        const double dd = std::pow(2.0, -0.5 * j);
        RealVector h = RealVector::Zero(m.dim() - 1);
        h(0) = 3.0 * dd / m.u_radius;
        if (!chart_in_u(m, h)) continue;
        const CylinderPass P = cyl.run(chart_point(m, h, -2.0));
        if (!P.found) continue;
        taus.push_back(P.tau);
        dists.push_back(dd);
    }
    return {taus, dists};
}

inline RunOutput run_recurrence(const ExperimentConfig& c, int threads)
{
    RunOutput o;
    QuadratureOptions qo;
    qo.deltas = c.deltas;
    qo.radii = c.radii;
    const SectionQuadrature Q = section_quadrature(c.model, c.integrator, qo);
    std::ostringstream csv;
    CsvWriter w(csv);
    w.row("scale", "sr_quadrature", "ball_avg", "ball_freq", "lebesgue_bound", "ball_to_bound");
    json sr = json::array();
    for (size_t i = 0; i < Q.deltas.size(); ++i) {
        const double r = i < Q.radii.size() ? Q.radii[i] : std::numeric_limits<double>::quiet_NaN();
        const double L = i < Q.radii.size() ? lebesgue_ball_bound(r) : std::numeric_limits<double>::quiet_NaN();
        const double ba = i < Q.radii.size() ? Q.ball_avg[i] : std::numeric_limits<double>::quiet_NaN();
        const double bf = i < Q.radii.size() ? Q.ball_freq[i] : std::numeric_limits<double>::quiet_NaN();
        w.row(Q.deltas[i], Q.sr[i], ba, bf, L, ba / L);
        sr.push_back({{"delta", Q.deltas[i]}, {"sr", Q.sr[i]}, {"ball_avg", ba}, {"ball_to_bound", ba / L}});
    }
    double worst = 0.0;
    std::ostringstream vcsv;
    CsvWriter vw(vcsv);
    vw.row("entry_rho", "sigma", "radius", "x0", "integral", "duration", "S", "ratio");
    for (size_t i = 0; i < Q.visits.size(); ++i) {
        const auto& v = Q.visits[i];
        const double r = Q.radii[v.radius_index];
        if (!(v.x0 > 0.0 && v.x0 < r)) continue;
        const RecurrenceBound b = recurrence_bound_oracle(v.x0, r);
        const double ratio = v.integral / b.S;
        worst = std::max(worst, ratio);
        vw.row(Q.visit_node[i], v.sigma, r, v.x0, v.integral, v.duration, b.S, ratio);
    }
    o.report["e_tau"] = Q.e_tau;
    o.report["sr_quadrature"] = sr;
    o.report["worst_ball_ratio"] = worst;
    const auto [taus, dists] = tau_ladder(c.model, c.integrator);
    if (taus.size() >= kLogLawMinCrossings) {
        const LogLawFit f = tau_loglaw_fit(taus, dists);
        o.report["tau_loglaw"] = {{"slope", f.slope},
                                  {"intercept", f.intercept},
                                  {"r_squared", f.r_squared},
                                  {"max_envelope_excess", f.max_envelope_excess},
                                  {"count", f.count}};
    }
    if (c.n_returns > 0) {
        ExperimentConfig oc = c;
        oc.n_orbits = 1;
        const auto orb = run_orbits(oc, threads);
        const ErgodicReport e = condition_verdicts(orb.front().acc, c.model.dim(), c.seed);
        o.report["orbit"] = {{"seed", c.seed},
                             {"n", e.n},
                             {"sr_values", grid_map_json(e.sr_values)},
                             {"sr_continuous", grid_map_json(e.sr_continuous)},
                             {"wsr_frequencies", grid_map_json(e.wsr_frequencies)}};
        o.withheld |= orb.front().terminated;
    }
    o.tables.push_back({"recurrence.csv", csv.str()});
    o.tables.push_back({"ball_visits.csv", vcsv.str()});
    std::ostringstream tc;
    CsvWriter tw(tc);
    tw.row("d", "tau");
    for (size_t i = 0; i < taus.size(); ++i) tw.row(dists[i], taus[i]);
    o.tables.push_back({"tau_ladder.csv", tc.str()});
    return o;
}

/// Two orbits (seed, seed + 1) of the return map, base marginal histograms.
inline std::pair<EmpiricalMeasure, EmpiricalMeasure> measure_pair(const ExperimentConfig& c, int threads)
{
    const SolenoidSpec sp = c.effective_solenoid();
    std::vector<EmpiricalMeasure> M(2, EmpiricalMeasure(sp.k, c.measure_nx, c.measure_ny));
    std::vector<std::string> fail(2);
    parallel_for(2, threads, [&](int i) {
        const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
        std::mt19937_64 rng(seed);
        const SolenoidPoint s0 = sample_section(sp, rng);
        OrbitOptions opt;
        opt.seed = seed;
        opt.deltas = c.deltas;
        opt.radii = c.radii;
        opt.variational = false;
        opt.quadrature = false;
        opt.on_lap = [&M, i](const SolenoidPoint& s, double tau) { M[i].update(s, tau); };
        const OrbitResult r = orbit_generate(sp, c.model, s0, c.n_returns, c.integrator, opt);
        if (r.terminated) fail[i] = r.reason;
    });
    for (const auto& f : fail)
        if (!f.empty()) throw std::runtime_error("measure: " + f);
    return {M[0], M[1]};
}

inline RunOutput run_measure(const ExperimentConfig& c, int threads)
{
    RunOutput o;
    const auto [a, b] = measure_pair(c, threads);
    const double tv = tv_distance(a, b);
    o.report["tv_distance"] = tv;
    o.report["seeds"] = {c.seed, c.seed + 1};
    o.report["total_time"] = {a.total_time(), b.total_time()};
    std::ostringstream csv;
    CsvWriter w(csv);
    w.row("cell", "mass_a", "mass_b");
    const auto pa = a.normalized(), pb = b.normalized();
    for (size_t i = 0; i < pa.size(); ++i) w.row(i, pa[i], pb[i]);
    o.tables.push_back({"measure.csv", csv.str()});
    return o;
}

/// Bare-rate crossing integral at zeta0 relative to zeta0 = 0, times (1 - zeta0).
inline double slowdown_scaling(const ModelSpec& templ, double zeta0, double rho, const IntegratorConfig& cfg)
{
    ModelSpec a = templ, b = templ;
    a.gluing = b.gluing = Gluing::Slowed;
    a.zeta0 = 0.0;
    b.zeta0 = zeta0;
    RealVector h = RealVector::Zero(a.dim() - 1);
    h(0) = rho;
    return crossing_rate_integral(b, h, cfg) / crossing_rate_integral(a, h, cfg) * (1.0 - zeta0);
}

inline RunOutput run_slowdown_sweep(const ExperimentConfig& c, int threads)
{
    RunOutput o;
    std::vector<SweepRow> rows(c.zeta_grid.size());
    parallel_for(static_cast<int>(rows.size()), threads, [&](int i) {
        rows[i] = slowdown_sweep(c.model, {c.zeta_grid[i]}, c.n_returns, c.seed, c.integrator).front();
    });
    std::ostringstream csv;
    CsvWriter w(csv);
    w.row("zeta0", "psi_cu_avg", "psi3_avg", "rate_accounting_avg", "crossing_rate_mean", "tau_crossing_mean",
          "crossings", "n", "bare_rate_scaling_rho1");
    json arr = json::array();
    for (const auto& r : rows) {
        const double sc = slowdown_scaling(c.model, r.zeta0, 1.0, c.integrator);
        w.row(r.zeta0, r.psi_cu_avg, r.psi3_avg, r.rate_accounting_avg, r.crossing_rate_mean, r.tau_crossing_mean,
              r.crossings, r.n, sc);
        arr.push_back({{"zeta0", r.zeta0},
                       {"psi_cu_avg", r.psi_cu_avg},
                       {"psi3_avg", r.psi3_avg},
                       {"p3_margin", -r.psi3_avg},
                       {"crossings", r.crossings},
                       {"n", r.n},
                       {"bare_rate_scaling", sc}});
    }
    o.report["rows"] = arr;
    o.tables.push_back({"slowdown.csv", csv.str()});
    return o;
}

inline RunOutput run_experiment(const ExperimentConfig& c, int threads = 1)
{
    c.validate();
    RunOutput o;
    switch (c.experiment) {
    case Experiment::Equilibria: o = run_equilibria(c); break;
    case Experiment::Transition: o = run_transition(c); break;
    case Experiment::Symmetry: o = run_symmetry(c); break;
    case Experiment::CompoundCheck: o = run_compound_check(c); break;
    case Experiment::Birkhoff: o = run_birkhoff(c, threads); break;
    case Experiment::Recurrence: o = run_recurrence(c, threads); break;
    case Experiment::Measure: o = run_measure(c, threads); break;
    case Experiment::SlowdownSweep: o = run_slowdown_sweep(c, threads); break;
    case Experiment::PSectional: o = run_psectional(c, threads); break;
    }
    json rep;
    rep["config"] = to_json(c);
    rep["seed"] = c.seed;
    rep["results"] = o.report;
    rep["withheld"] = o.withheld;
    o.report = rep;
    return o;
}

} // namespace seclab
