#pragma once

// Experiment configuration: JSON with a fixed schema. Unknown keys are
// rejected by field path; every default is written back by to_json so a
// report carries the full effective config.

#include "seclab/flow.hpp"
#include "seclab/model.hpp"
#include "seclab/solenoid.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace seclab {

using json = nlohmann::ordered_json;

enum class Experiment {
    Equilibria,
    Transition,
    Symmetry,
    CompoundCheck,
    Birkhoff,
    Recurrence,
    Measure,
    SlowdownSweep,
    PSectional,
};

inline const std::vector<std::pair<Experiment, std::string>>& experiment_names()
{
    static const std::vector<std::pair<Experiment, std::string>> v = {
        {Experiment::Equilibria, "equilibria"},     {Experiment::Transition, "transition"},
        {Experiment::Symmetry, "symmetry"},         {Experiment::CompoundCheck, "compound-check"},
        {Experiment::Birkhoff, "birkhoff"},         {Experiment::Recurrence, "recurrence"},
        {Experiment::Measure, "measure"},           {Experiment::SlowdownSweep, "slowdown-sweep"},
        {Experiment::PSectional, "psectional"},
    };
    return v;
}

inline std::string to_string(Experiment e)
{
    for (const auto& [k, n] : experiment_names())
        if (k == e) return n;
    return "?";
}

inline Experiment experiment_from_string(const std::string& s)
{
    for (const auto& [k, n] : experiment_names())
        if (n == s) return k;
    throw ConfigError("experiment: unknown experiment '" + s + "'");
}

struct ExperimentConfig {
    ModelSpec model;
    bool has_solenoid = false; ///< false: SolenoidSpec::for_model(model)
    SolenoidSpec solenoid;
    IntegratorConfig integrator;
    Experiment experiment = Experiment::Equilibria;
    long n_returns = 10000;
    double horizon = 50.0; ///< T for fixed-horizon experiments
    int n_orbits = 1;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::vector<double> deltas = {1e-2, 1e-3, 1e-4};
    std::vector<double> radii = {1e-2, 1e-3, 1e-4};
    std::vector<double> zeta_grid = {0.0, 0.25, 0.5, 0.75, 0.9};
    std::vector<double> entry_grid = {-2.5, -1.7, -1.0, -0.5, 0.5, 1.0, 1.7, 2.5};
    int measure_nx = 64;
    int measure_ny = 64;

    SolenoidSpec effective_solenoid() const { return has_solenoid ? solenoid : SolenoidSpec::for_model(model); }

    void validate() const
    {
        model.validate();
        integrator.validate();
        if (has_solenoid) {
            solenoid.validate();
            if (model.glued() && solenoid.k != model.dim() - 1)
                throw ConfigError("solenoid.k: must equal the number of horizontal chart coordinates of the model");
        }
        if (n_returns < 0) throw ConfigError("n_returns: must be nonnegative");
        if (!(horizon > 0.0)) throw ConfigError("horizon: must be positive");
        if (n_orbits < 1) throw ConfigError("n_orbits: must be at least 1");
        for (double d : deltas)
            if (!(d > 0.0 && d < 0.5)) throw ConfigError("deltas: every delta must lie in (0, 1/2)");
        for (double r : radii)
            if (!(r > 0.0)) throw ConfigError("radii: every radius must be positive");
        for (double z : zeta_grid)
            if (!(z >= 0.0 && z <= 0.95)) throw ConfigError("zeta_grid: values must lie in [0, 0.95]");
        if (measure_nx < 1 || measure_ny < 1) throw ConfigError("measure_grid: cells must be positive");
        const bool needs_glued = experiment == Experiment::Birkhoff || experiment == Experiment::Recurrence ||
                                 experiment == Experiment::Measure || experiment == Experiment::SlowdownSweep ||
                                 experiment == Experiment::PSectional;
        if (needs_glued && !model.glued())
            throw ConfigError("model.family: experiment '" + to_string(experiment) + "' needs a glued family (G*/Ghat*)");
        if (!needs_glued && model.glued())
            throw ConfigError("model.family: experiment '" + to_string(experiment) + "' needs a bare family (Y*)");
    }
};

namespace detail {

inline void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> allowed)
{
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw ConfigError((path.empty() ? "" : path + ".") + k + ": unknown key");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& path)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError((path.empty() ? "" : path + ".") + key + ": wrong type");
    }
}

inline BumpSpec read_bump(const json& j, const std::string& path, BumpSpec b)
{
    reject_unknown(j, path, {"plateau_end", "support_end"});
    read(j, "plateau_end", b.plateau_end, path);
    read(j, "support_end", b.support_end, path);
    return b;
}

inline json bump_json(const BumpSpec& b) { return {{"plateau_end", b.plateau_end}, {"support_end", b.support_end}}; }

} // namespace detail

inline ModelSpec model_from_json(const json& j)
{
    detail::reject_unknown(j, "model",
                           {"family", "omega", "ell", "zeta0", "epsilon", "outer_level", "u_radius", "xi0", "xi1"});
    if (!j.contains("family")) throw ConfigError("model.family: required");
    std::string fam;
    detail::read(j, "family", fam, "model");
    ModelSpec m = ModelSpec::from_name(fam);
    detail::read(j, "omega", m.omega, "model");
    detail::read(j, "ell", m.ell, "model");
    detail::read(j, "zeta0", m.zeta0, "model");
    detail::read(j, "epsilon", m.epsilon, "model");
    detail::read(j, "outer_level", m.outer_level, "model");
    detail::read(j, "u_radius", m.u_radius, "model");
    if (j.contains("xi0")) m.xi0 = detail::read_bump(j["xi0"], "model.xi0", m.xi0);
    if (j.contains("xi1")) m.xi1 = detail::read_bump(j["xi1"], "model.xi1", m.xi1);
    return m;
}

inline json to_json(const ModelSpec& m)
{
    return {{"family", m.name()},        {"omega", m.omega},       {"ell", m.ell},
            {"zeta0", m.zeta0},          {"epsilon", m.epsilon},   {"outer_level", m.outer_level},
            {"u_radius", m.u_radius},    {"xi0", detail::bump_json(m.xi0)}, {"xi1", detail::bump_json(m.xi1)}};
}

inline SolenoidSpec solenoid_from_json(const json& j, const ModelSpec& m)
{
    detail::reject_unknown(j, "solenoid", {"k", "expansion", "alpha", "beta", "disk_radius"});
    int k = m.dim() - 1;
    detail::read(j, "k", k, "solenoid");
    if (k < 1) throw ConfigError("solenoid.k: must be positive");
    SolenoidSpec s = SolenoidSpec::doubling(k);
    if (j.contains("expansion")) {
        std::vector<std::vector<int>> e;
        detail::read(j, "expansion", e, "solenoid");
        if (static_cast<int>(e.size()) != k) throw ConfigError("solenoid.expansion: must be a k x k integer matrix");
        for (int r = 0; r < k; ++r) {
            if (static_cast<int>(e[r].size()) != k)
                throw ConfigError("solenoid.expansion: must be a k x k integer matrix");
            for (int c = 0; c < k; ++c) s.expansion(r, c) = e[r][c];
        }
    }
    detail::read(j, "alpha", s.alpha, "solenoid");
    detail::read(j, "beta", s.beta, "solenoid");
    s.disk_radius = std::max(1.0, s.beta * s.weight_sum() / (1.0 - s.alpha));
    detail::read(j, "disk_radius", s.disk_radius, "solenoid");
    return s;
}

inline json to_json(const SolenoidSpec& s)
{
    std::vector<std::vector<int>> e(s.k, std::vector<int>(s.k));
    for (int r = 0; r < s.k; ++r)
        for (int c = 0; c < s.k; ++c) e[r][c] = s.expansion(r, c);
    return {{"k", s.k}, {"expansion", e}, {"alpha", s.alpha}, {"beta", s.beta}, {"disk_radius", s.disk_radius}};
}

inline IntegratorConfig integrator_from_json(const json& j)
{
    detail::reject_unknown(j, "integrator",
                           {"rel_tol", "abs_tol", "max_time", "renorm_interval", "fixed_step", "fixed_h"});
    IntegratorConfig c;
    detail::read(j, "rel_tol", c.rel_tol, "integrator");
    detail::read(j, "abs_tol", c.abs_tol, "integrator");
    detail::read(j, "max_time", c.max_time, "integrator");
    detail::read(j, "renorm_interval", c.renorm_interval, "integrator");
    detail::read(j, "fixed_step", c.fixed_step, "integrator");
    detail::read(j, "fixed_h", c.fixed_h, "integrator");
    return c;
}

inline json to_json(const IntegratorConfig& c)
{
    return {{"rel_tol", c.rel_tol},   {"abs_tol", c.abs_tol},       {"max_time", c.max_time},
            {"renorm_interval", c.renorm_interval}, {"fixed_step", c.fixed_step}, {"fixed_h", c.fixed_h}};
}

/// Parses and validates; throws ConfigError naming the offending field.
inline ExperimentConfig config_from_json(const json& j)
{
    detail::reject_unknown(j, "",
                           {"model", "solenoid", "integrator", "experiment", "n_returns", "horizon", "n_orbits",
                            "seed", "output_dir", "deltas", "radii", "zeta_grid", "entry_grid", "measure_grid"});
    ExperimentConfig c;
    if (!j.contains("model")) throw ConfigError("model: required");
    c.model = model_from_json(j["model"]);
    if (j.contains("solenoid")) {
        c.has_solenoid = true;
        c.solenoid = solenoid_from_json(j["solenoid"], c.model);
    }
    if (j.contains("integrator")) c.integrator = integrator_from_json(j["integrator"]);
    if (j.contains("experiment")) {
        std::string e;
        detail::read(j, "experiment", e, "");
        c.experiment = experiment_from_string(e);
    }
    detail::read(j, "n_returns", c.n_returns, "");
    detail::read(j, "horizon", c.horizon, "");
    detail::read(j, "n_orbits", c.n_orbits, "");
    detail::read(j, "seed", c.seed, "");
    detail::read(j, "output_dir", c.output_dir, "");
    detail::read(j, "deltas", c.deltas, "");
    detail::read(j, "radii", c.radii, "");
    detail::read(j, "zeta_grid", c.zeta_grid, "");
    detail::read(j, "entry_grid", c.entry_grid, "");
    if (j.contains("measure_grid")) {
        detail::reject_unknown(j["measure_grid"], "measure_grid", {"nx", "ny"});
        detail::read(j["measure_grid"], "nx", c.measure_nx, "measure_grid");
        detail::read(j["measure_grid"], "ny", c.measure_ny, "measure_grid");
    }
    c.validate();
    return c;
}

inline ExperimentConfig config_from_string(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_string(ss.str());
}

/// The effective config with all defaults filled in.
inline json to_json(const ExperimentConfig& c)
{
    json j;
    j["model"] = to_json(c.model);
    if (c.model.glued() || c.has_solenoid) j["solenoid"] = to_json(c.effective_solenoid());
    j["integrator"] = to_json(c.integrator);
    j["experiment"] = to_string(c.experiment);
    j["n_returns"] = c.n_returns;
    j["horizon"] = c.horizon;
    j["n_orbits"] = c.n_orbits;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["deltas"] = c.deltas;
    j["radii"] = c.radii;
    j["zeta_grid"] = c.zeta_grid;
    j["entry_grid"] = c.entry_grid;
    j["measure_grid"] = {{"nx", c.measure_nx}, {"ny", c.measure_ny}};
    return j;
}

} // namespace seclab
