#pragma once

// RFC-4180 CSV (CRLF records, quoted fields when needed, 17 significant
// digits) and JSON report helpers.

#include "seclab/config.hpp"
#include "seclab/ergodic.hpp"
#include "seclab/flow.hpp"
#include "seclab/suspension.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

namespace seclab {

inline std::string format_double(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    CsvWriter& field(const std::string& s)
    {
        sep();
        if (s.find_first_of(",\"\r\n") == std::string::npos) {
            os_ << s;
        } else {
            os_ << '"';
            for (char c : s) {
                if (c == '"') os_ << '"';
                os_ << c;
            }
            os_ << '"';
        }
        return *this;
    }
    CsvWriter& field(const char* s) { return field(std::string(s)); }
    CsvWriter& field(double x) { return field(format_double(x)); }
    template <class I>
        requires std::is_integral_v<I>
    CsvWriter& field(I x)
    {
        return field(std::to_string(x));
    }

    template <class... Ts>
    CsvWriter& row(const Ts&... xs)
    {
        (field(xs), ...);
        return end();
    }

    CsvWriter& end()
    {
        os_ << "\r\n";
        first_ = true;
        return *this;
    }

private:
    void sep()
    {
        if (!first_) os_ << ',';
        first_ = false;
    }
    std::ostream& os_;
    bool first_ = true;
};

/// Ledger CSV: i, n_i, m_i, tau_i, lap, then the per-crossing extras.
inline void write_ledger_csv(std::ostream& os, const CrossingLedger& L)
{
    CsvWriter w(os);
    w.row("i", "n_i", "m_i", "tau_i", "lap", "lap_counting", "entry_lap", "entry_distance", "transition_error",
          "psi_cu", "log_det", "rate_glued", "rate_bare");
    for (size_t i = 0; i < L.entries.size(); ++i) {
        const auto& e = L.entries[i];
        w.row(i, e.n, e.m, e.tau, L.lap_number(i), L.lap_number_counting(i), e.lap, e.entry_distance,
              e.transition_error, e.psi_cu, e.log_det, e.rate_glued, e.rate_bare);
    }
}

/// Trajectory samples: t, coordinates, log ||wedge^2 cocycle^{-1}||, H where defined.
inline void write_trajectory_csv(std::ostream& os, const ModelSpec& m, const RealVector& w0, double T, int samples,
                                 const IntegratorConfig& cfg)
{
    const Trajectory tr = integrate(m, w0, T, cfg);
    const bool planar = m.family == Family::Y0 || m.family == Family::Y1 || m.family == Family::Yperturbed;
    CsvWriter w(os);
    w.field("t");
    for (int i = 0; i < m.dim(); ++i) w.field("w" + std::to_string(i));
    w.field("log_wedge2_inv");
    if (planar) w.field("H");
    w.end();
    for (int s = 0; s <= samples; ++s) {
        const double t = T * s / samples;
        const RealVector p = tr.at(t);
        w.field(t);
        for (int i = 0; i < m.dim(); ++i) w.field(p(i));
        w.field(t > 0.0 ? psi_cu_over_segment(m, w0, t, cfg) : 0.0);
        if (planar) w.field(hamiltonian_eval(m, p(0), p(1)).first);
        w.end();
    }
}

inline json to_json(const WindowCheck& w)
{
    return {{"early", w.early}, {"late", w.late}, {"converged", w.converged}};
}

inline json grid_map_json(const std::map<double, double>& m)
{
    json a = json::array();
    for (const auto& [k, v] : m) a.push_back({{"scale", k}, {"value", v}});
    return a;
}

inline json to_json(const ErgodicReport& r)
{
    json j = {{"seed", r.seed},
              {"n", r.n},
              {"returns", r.returns},
              {"crossings", r.crossings},
              {"total_time", r.total_time},
              {"psi_cu_avg", r.psi_cu_avg},
              {"nu2se_margin", r.nu2se_margin},
              {"wase_rate", r.wase_rate},
              {"rate_accounting_avg", r.rate_accounting_avg},
              {"sr_values", grid_map_json(r.sr_values)},
              {"sr_continuous", grid_map_json(r.sr_continuous)},
              {"wsr_frequencies", grid_map_json(r.wsr_frequencies)},
              {"tau_mean", r.tau_mean},
              {"tau_crossing_mean", r.tau_crossing_mean},
              {"tau_loglaw_slope", r.tau_loglaw_slope},
              {"psi_window", to_json(r.psi_window)},
              {"logj_window", to_json(r.logj_window)},
              {"verdicts", {{"nu2se", to_string(r.nu2se)}, {"wase", to_string(r.wase)}}},
              {"implication_ok", r.implication_ok()}};
    if (r.has_p3) {
        j["psi3_avg"] = r.psi3_avg;
        j["p3_margin"] = r.p3_margin;
        j["psi3_window"] = to_json(r.psi3_window);
        j["verdicts"]["p3"] = to_string(r.p3);
    }
    return j;
}

/// JSON dump with non-finite numbers written as null (JSON has no NaN).
inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

inline void write_text(const std::filesystem::path& p, const std::string& s)
{
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    out << s;
}

} // namespace seclab
