#include "seclab/ergodic.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <catch_amalgamated.hpp>

#include <random>

using namespace seclab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

/// First seed whose G0 orbit of n returns never enters U.
OrbitResult g0_orbit_avoiding_u(long n)
{
    ModelSpec m = ModelSpec::from_name("G0");
    m.u_radius = 1e-5;
    const SolenoidSpec s = SolenoidSpec::for_model(m);
    for (std::uint64_t seed = 1;; ++seed) {
        std::mt19937_64 rng(seed);
        OrbitOptions opt;
        opt.seed = seed;
        OrbitResult o = orbit_generate(s, m, sample_section(s, rng), n, {}, opt);
        if (o.ledger.entries.empty()) return o;
    }
}

OrbitResult g_orbit(const char* name, long n, std::uint64_t seed, bool quadrature = true)
{
    const ModelSpec m = ModelSpec::from_name(name);
    const SolenoidSpec s = SolenoidSpec::for_model(m);
    std::mt19937_64 rng(seed);
    OrbitOptions opt;
    opt.seed = seed;
    opt.quadrature = quadrature;
    return orbit_generate(s, m, sample_section(s, rng), n, {}, opt);
}

} // namespace

TEST_CASE("truncated_distance branches")
{
    for (double delta : {1e-2, 1e-3, 0.3}) {
        CHECK(truncated_distance(delta / 2, delta) == delta / 2);
        CHECK(truncated_distance(3 * delta, delta) == 1.0);
        CHECK_THAT(truncated_distance(1.5 * delta, delta), WithinAbs(0.5 + 0.5 * delta, 1e-15));
        // Continuity at both breakpoints.
        CHECK_THAT(truncated_distance(delta * (1 + 1e-15), delta), WithinAbs(delta, 1e-12));
        CHECK_THAT(truncated_distance(2 * delta * (1 - 1e-15), delta), WithinAbs(1.0, 1e-12));
        double prev = 0.0;
        for (double d = delta / 100; d < 4 * delta; d += delta / 100) {
            const double v = truncated_distance(d, delta);
            CHECK(v > prev);
            CHECK(v <= 1.0);
            prev = v < 1.0 ? v : prev;
        }
    }
    for (double d = 1e-5; d < 1.0; d *= 1.1)
        for (size_t i = 1; i < 40; ++i) CHECK(truncated_distance(d, 0.01 * i) <= truncated_distance(d, 0.01 * (i - 1) + 1e-4));
    CHECK_THROWS_AS(truncated_distance(0.0, 1e-2), std::domain_error);
    CHECK_THROWS_AS(truncated_distance(0.1, 0.5), std::invalid_argument);
}

TEST_CASE("sr_average examples")
{
    BirkhoffAccumulator far;
    for (int i = 0; i < 100; ++i) far.add_step(0, 0, 0, kInf);
    for (double d : default_scale_grid()) CHECK(sr_average(far, d) == 0.0);

    for (double delta : default_scale_grid()) {
        BirkhoffAccumulator one;
        one.add_step(0, 0, 0, delta / std::exp(1.0));
        CHECK_THAT(sr_average(one, delta), WithinRel(1.0 - std::log(delta), 1e-14));
    }
    CHECK_THROWS_AS(sr_average(BirkhoffAccumulator{}, 1e-2), EmptyAccumulatorError);
    BirkhoffAccumulator a;
    a.add_step(0, 0, 0, 1.0);
    CHECK_THROWS_AS(sr_average(a, 0.25), std::invalid_argument);
}

TEST_CASE("property: sr_average and wsr_frequency are nondecreasing in the scale")
{
    const std::vector<double> grid{1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.1};
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> L(-12.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        BirkhoffAccumulator a(grid, grid);
        for (int i = 0; i < 500; ++i) a.add_step(0, 0, 0, i % 3 ? kInf : std::exp(L(rng)));
        for (size_t i = 1; i < grid.size(); ++i) {
            // d_delta is pointwise nonincreasing in delta, so -log d_delta grows.
            CHECK(sr_average(a, grid[i]) >= sr_average(a, grid[i - 1]));
            CHECK(wsr_frequency(a, grid[i]) >= wsr_frequency(a, grid[i - 1]));
        }
    }
}

TEST_CASE("wsr_frequency examples")
{
    BirkhoffAccumulator far;
    for (int i = 0; i < 10; ++i) far.add_step(0, 0, 0, kInf);
    CHECK(wsr_frequency(far, 1e-2) == 0.0);
    BirkhoffAccumulator big({1e-2}, {100.0});
    for (int i = 0; i < 10; ++i) big.add_step(0, 0, 0, 5.0 + i);
    CHECK(wsr_frequency(big, 100.0) == 1.0);
    CHECK_THROWS_AS(wsr_frequency(BirkhoffAccumulator{}, 1e-2), EmptyAccumulatorError);
}

TEST_CASE("recurrence_bound_oracle examples")
{
    const double r = 1e-3;
    CHECK_THAT(recurrence_bound_oracle(r / std::exp(1.0), r).t0, WithinAbs(5.0, 1e-12));
    const RecurrenceBound b = recurrence_bound_oracle(r / 2, r);
    CHECK_THAT(b.S, WithinRel(2.5 * (std::pow(std::log(5e-4), 2) - std::pow(std::log(1e-3), 2)), 1e-14));
    // Same value written as -t0 (t0/10 + log x0).
    for (double x0 : {1e-9, 1e-6, 3e-4}) {
        const RecurrenceBound c = recurrence_bound_oracle(x0, r);
        CHECK_THAT(c.S, WithinRel(-c.t0 * (c.t0 / 10 + std::log(x0)), 1e-12));
    }
    CHECK_THROWS_AS(recurrence_bound_oracle(2e-3, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(recurrence_bound_oracle(0.0, 1e-3), std::invalid_argument);
}

TEST_CASE("linearised passage integral stays below S")
{
    // Oracle: -log || (x0 e^{t/5}, r e^{-t/5}) || integrated over [0, t0].
    boost::math::quadrature::tanh_sinh<double> q;
    for (auto [x0, r] : std::vector<std::pair<double, double>>{{1e-5, 1e-3}, {1e-8, 1e-2}, {5e-4, 1e-3}, {1e-12, 1e-4}}) {
        const RecurrenceBound b = recurrence_bound_oracle(x0, r);
        const double I = q.integrate([&](double t) { return -std::log(std::hypot(x0 * std::exp(t / 5), r * std::exp(-t / 5))); },
                                     0.0, b.t0);
        INFO("x0=" << x0 << " r=" << r);
        CHECK(I <= b.S);
        CHECK(I > 0.5 * b.S);
    }
}

TEST_CASE("lebesgue_ball_bound matches the radial integral")
{
    boost::math::quadrature::tanh_sinh<double> q;
    for (double r : {1e-2, 1e-3, 1e-4}) {
        const double lr = std::log(r);
        const double I = q.integrate(
            [&](double rho) { return rho > 0 ? 2 * std::acos(-1.0) * rho * (std::log(rho) * std::log(rho) - lr * lr) : 0.0; },
            0.0, r);
        CHECK_THAT(lebesgue_ball_bound(r), WithinRel(I, 1e-9));
    }
}

TEST_CASE("window check and verdicts on synthetic sums")
{
    BirkhoffAccumulator a;
    for (int i = 0; i < 8192; ++i) a.add_step(-0.5, -0.2, 0.3, kInf);
    a.total_time = 8192;
    const ErgodicReport r = condition_verdicts(a, 3, 42);
    CHECK(r.seed == 42);
    CHECK(r.n == 8192);
    CHECK(r.psi_window.converged);
    CHECK_THAT(r.nu2se_margin, WithinAbs(0.5, 1e-12));
    CHECK(r.nu2se == Verdict::Holds);
    CHECK(r.wase == Verdict::Holds);
    CHECK(r.p3 == Verdict::Holds);
    CHECK(r.implication_ok());

    // A drifting average does not converge, so the verdict is withheld.
    BirkhoffAccumulator d;
    for (int i = 0; i < 8192; ++i) d.add_step(i < 4096 ? -1.0 : 1.0, 0, 0, kInf);
    d.total_time = 8192;
    CHECK(condition_verdicts(d, 2).nu2se == Verdict::Inconclusive);

    const ErgodicReport e = condition_verdicts(BirkhoffAccumulator{}, 2);
    CHECK(e.nu2se == Verdict::Inconclusive);
    CHECK(e.wase == Verdict::Inconclusive);
    CHECK_FALSE(e.has_p3);
}

TEST_CASE("G0 orbit avoiding U: nu2se margin is log 2")
{
    const OrbitResult o = g0_orbit_avoiding_u(5000);
    const ErgodicReport r = condition_verdicts(o.acc, 2, o.seed);
    CHECK(r.nu2se_margin >= std::log(2.0) - 1e-3);
    CHECK(r.nu2se == Verdict::Holds);
    CHECK(r.wase == Verdict::Holds);
    CHECK(r.implication_ok());
    for (double d : default_scale_grid()) CHECK(r.sr_values.at(d) == 0.0);
    for (double x : default_scale_grid()) CHECK(r.wsr_frequencies.at(x) == 0.0);
}

TEST_CASE("tau_loglaw_fit on synthetic ledgers")
{
    std::vector<double> t, d, c;
    for (int j = 0; j < 40; ++j) {
        d.push_back(std::ldexp(1.0, -(j + 2)));
        t.push_back(5.0 * std::abs(std::log(d.back())));
        c.push_back(3.0);
    }
    const LogLawFit f = tau_loglaw_fit(t, d);
    CHECK_THAT(f.slope, WithinAbs(5.0, 1e-9));
    CHECK_THAT(f.intercept, WithinAbs(0.0, 1e-8));
    CHECK_THAT(f.r_squared, WithinAbs(1.0, 1e-12));
    CHECK(f.count == 40);
    const LogLawFit g = tau_loglaw_fit(c, d);
    CHECK_THAT(g.slope, WithinAbs(0.0, 1e-12));
    CHECK_THAT(g.intercept, WithinAbs(3.0, 1e-12));
    t.resize(29);
    d.resize(29);
    CHECK_THROWS_AS(tau_loglaw_fit(t, d), std::invalid_argument);
}

TEST_CASE("tau_loglaw_fit on a G3 entry ladder")
{
    // Chart offsets rho = 2^{-j}, j = 3..20 in half steps; base distance is
    // rho u_radius / 3.
    const ModelSpec m = ModelSpec::from_name("G3");
    PassObservers obs;
    obs.variational = false;
    obs.quadrature = false;
    CylinderIntegrator cyl(m, {}, obs);
    std::vector<double> t, d;
    for (double j = 3; j <= 20; j += 0.5) {
        const double rho = std::exp2(-j);
        RealVector h = RealVector::Zero(2);
        h(0) = rho;
        const CylinderPass P = cyl.run(chart_point(m, h, -2.0));
        REQUIRE(P.found);
        t.push_back(P.tau);
        d.push_back(rho * m.u_radius / 3.0);
    }
    const LogLawFit f = tau_loglaw_fit(t, d);
    CHECK(f.slope > 0.0);
    CHECK(f.max_envelope_excess <= 0.25);
    CHECK(f.r_squared > 0.99);
}

TEST_CASE("EmpiricalMeasure examples and invariants")
{
    SolenoidPoint p{{0x1234'5678'9ABC'DEF0ULL}, {}}, q = p;
    q.theta[0] += 1;
    EmpiricalMeasure M;
    M = empirical_measure_update(M, p, 1.0);
    auto n = M.normalized();
    CHECK(n[M.cell_of(p)] == 1.0);
    M = empirical_measure_update(M, q, 1.0);
    CHECK(M.cell_of(p) == M.cell_of(q));
    n = M.normalized();
    CHECK(n[M.cell_of(p)] == 1.0);

    std::mt19937_64 rng(3);
    std::exponential_distribution<double> E(1.0);
    EmpiricalMeasure A, B;
    for (int i = 0; i < 10000; ++i) A.update(SolenoidPoint{{rng()}, {}}, 0.1 + E(rng));
    double s = 0.0;
    for (double w : A.weights()) s += w;
    CHECK_THAT(s, WithinRel(A.total_time(), 1e-12));
    double t = 0.0;
    for (double w : A.normalized()) t += w;
    CHECK_THAT(t, WithinAbs(1.0, 1e-12));
    CHECK(tv_distance(A, A) == 0.0);

    EmpiricalMeasure X, Y;
    X.update(SolenoidPoint{{0}, {}}, 1.0);
    Y.update(SolenoidPoint{{~std::uint64_t{0}}, {}}, 1.0);
    CHECK(tv_distance(X, Y) == 1.0);
    CHECK_THROWS_AS(X.update(SolenoidPoint{{0, 0}, {}}, 1.0), std::out_of_range);
    CHECK_THROWS_AS(X.update(SolenoidPoint{{0}, {}}, 0.0), std::invalid_argument);

    // k = 2 uses an nx x ny grid on the first two torus coordinates.
    EmpiricalMeasure K(2, 4, 8);
    CHECK(K.cell_of(SolenoidPoint{{std::uint64_t{3} << 62, std::uint64_t{7} << 61}, {}}) == 3 * 8 + 7);

    B.merge(A);
    CHECK(tv_distance(A, B) == 0.0);
}

TEST_CASE("accumulator merge is associative up to reassociation")
{
    std::vector<BirkhoffAccumulator> parts;
    std::mt19937_64 rng(8);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int p = 0; p < 3; ++p) {
        BirkhoffAccumulator a;
        for (int i = 0; i < 3000; ++i) a.add_step(N(rng), N(rng), N(rng), std::exp(-8.0 * std::abs(N(rng))));
        a.total_time = 3000;
        parts.push_back(a);
    }
    BirkhoffAccumulator l = parts[0], bc = parts[1], r = parts[0];
    l.merge(parts[1]);
    l.merge(parts[2]);
    bc.merge(parts[2]);
    r.merge(bc);
    CHECK(l.n == r.n);
    CHECK_THAT(l.sum_psi_cu, WithinAbs(r.sum_psi_cu, 1e-9));
    for (size_t i = 0; i < l.deltas.size(); ++i) CHECK_THAT(l.sum_trunc[i], WithinAbs(r.sum_trunc[i], 1e-9));
    CHECK(l.visits == r.visits);
    CHECK(l.snapshots_valid);
    CHECK_THAT(l.snapshots.back().psi_cu, WithinAbs(r.snapshots.back().psi_cu, 1e-9));
    BirkhoffAccumulator other({1e-2}, {1e-2});
    CHECK_THROWS_AS(l.merge(other), std::invalid_argument);
}

TEST_CASE("G3 orbit: SR values shrink with delta; discrete and continuous SR agree")
{
    const OrbitResult o = g_orbit("G3", 20000, 5);
    REQUIRE_FALSE(o.terminated);
    const ErgodicReport r = condition_verdicts(o.acc, 3, 5);
    const auto g = default_scale_grid();
    for (size_t i = 1; i < g.size(); ++i) {
        CHECK(r.sr_values.at(g[i]) <= r.sr_values.at(g[i - 1]));
        CHECK(r.sr_continuous.at(g[i]) <= r.sr_continuous.at(g[i - 1]));
        CHECK(r.wsr_frequencies.at(g[i]) <= r.wsr_frequencies.at(g[i - 1]));
    }
    // Consistency at the coarsest scale, where both averages are well sampled.
    const double a = r.sr_values.at(g[0]), b = r.sr_continuous.at(g[0]);
    CHECK(std::abs(a - b) <= 0.2 * std::max(a, b));
    CHECK(r.implication_ok());
}

TEST_CASE("psi_cu cancels across symmetric crossings")
{
    for (const char* n : {"G0", "G1"}) {
        const OrbitResult o = g_orbit(n, 5000, 2, false);
        REQUIRE(o.ledger.entries.size() > 10);
        for (const auto& e : o.ledger.entries) CHECK_THAT(e.psi_cu, WithinAbs(0.0, 1e-4));
    }
}

TEST_CASE("slowed crossing: bare rate integral scales with (1 - zeta0)^{-1}")
{
    // Oracle: the same crossing integrated at both speeds.
    ModelSpec m = ModelSpec::from_name("Ghat3");
    for (double rho : {0.05, 0.3, 1.2}) {
        RealVector h = RealVector::Zero(2);
        h(0) = rho;
        m.zeta0 = 0.0;
        const double base = crossing_rate_integral(m, h);
        m.zeta0 = 0.5;
        const double slow = crossing_rate_integral(m, h);
        INFO("rho=" << rho);
        CHECK_THAT(slow / base, WithinRel(2.0, 0.1));
    }
}

TEST_CASE("slowdown_sweep rejects grids outside [0, 0.95]")
{
    CHECK_THROWS_AS(slowdown_sweep(ModelSpec::from_name("Ghat3"), {0.0, 0.99}, 10, 1), ConfigError);
}
