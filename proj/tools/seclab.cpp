// seclab: experiment runner.
//
//   seclab <experiment> --config cfg.json [--seed N] [--out DIR] [--threads N] [--strict]
//   seclab validate --config cfg.json
//
// The subcommand overrides the config's "experiment" field. SECLAB_OUT_DIR
// overrides the output directory (and only that); --out beats both.
// Writes report.json plus one or more CSV tables into the output directory.
// Exit status: 0 ok, 1 runtime failure, 2 config error, 3 withheld verdict
// under --strict.

#include "seclab/runner.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

struct Flags {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    int threads = 1;
    bool strict = false;
};

int run(const std::string& name, const Flags& f)
{
    using namespace seclab;
    ExperimentConfig cfg;
    try {
        cfg = load_config(f.config);
        if (name != "validate") cfg.experiment = experiment_from_string(name);
        if (f.seed_set) cfg.seed = f.seed;
        if (const char* env = std::getenv("SECLAB_OUT_DIR"); env && *env) cfg.output_dir = env;
        if (!f.out.empty()) cfg.output_dir = f.out;
        cfg.validate();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    if (name == "validate") {
        std::cout << dump_json(to_json(cfg));
        return 0;
    }
    RunOutput o;
    try {
        o = run_experiment(cfg, f.threads);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    const std::filesystem::path dir(cfg.output_dir);
    write_text(dir / "report.json", dump_json(o.report));
    for (const auto& [file, body] : o.tables) write_text(dir / file, body);
    std::cout << dump_json(o.report["results"]);
    if (o.withheld) std::cerr << "note: some verdicts are withheld (inconclusive or failed orbits)\n";
    return f.strict && o.withheld ? 3 : 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sectional-expansion laboratory"};
    app.require_subcommand(1);
    Flags f;
    std::string chosen;
    std::vector<std::string> names = {"validate"};
    for (const auto& [k, n] : seclab::experiment_names()) names.push_back(n);
    for (const auto& n : names) {
        auto* sub = app.add_subcommand(n, n == "validate" ? "check a config and echo it with defaults" : "run the " + n + " experiment");
        sub->add_option("--config", f.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        if (n != "validate") {
            sub->add_option("--seed", f.seed, "override the config seed")->each([&](const std::string&) { f.seed_set = true; });
            sub->add_option("--out", f.out, "output directory");
            sub->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
            sub->add_flag("--strict", f.strict, "nonzero exit when a verdict is withheld");
        }
        sub->callback([&chosen, n] { chosen = n; });
    }
    CLI11_PARSE(app, argc, argv);
    return run(chosen, f);
}
