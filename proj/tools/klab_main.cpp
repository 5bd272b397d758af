#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "klab/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"klab - kinetic regularization-by-noise laboratory"};

    std::string experiment;
    std::string config_path;
    std::string out_dir;
    std::string scheme;
    long long seed = -1;
    bool plot = false;
    bool list = false;

    app.add_option("experiment", experiment, "experiment name (see --list)");
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed", seed, "override the MC seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--scheme", scheme, "integrator scheme: em|split|zvonkin");
    app.add_flag("--plot", plot, "emit static SVG plots next to the CSVs");
    app.add_flag("--list", list, "list registered experiments");

    CLI11_PARSE(app, argc, argv);

    if (list) {
        for (const auto& name : klab::experiment_registry()) std::cout << name << '\n';
        return 0;
    }
    if (experiment.empty()) {
        std::cerr << "usage: klab <experiment> [--config file] [--seed N] [--out DIR] "
                     "[--scheme em|split|zvonkin] [--plot]\n";
        return 1;
    }

    std::string text = "{}";
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
            std::cerr << "error: cannot open config " << config_path << '\n';
            return 1;
        }
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }

    klab::ParseResult parsed = klab::parse_config(text);
    parsed.config.name = experiment;
    if (seed >= 0) parsed.config.seed = static_cast<std::uint64_t>(seed);
    if (!out_dir.empty()) parsed.config.out_dir = out_dir;
    if (!scheme.empty()) parsed.config.scheme = scheme;
    parsed.config.plot = plot;

    const auto& reg = klab::experiment_registry();
    if (std::find(reg.begin(), reg.end(), experiment) == reg.end())
        parsed.errors.push_back({"experiment", "unknown experiment '" + experiment + "'"});

    if (!parsed.ok()) {
        std::cerr << "configuration errors:\n";
        for (const auto& e : parsed.errors) std::cerr << "  " << e.field << ": " << e.message << '\n';
        return 1;
    }

    try {
        const klab::RunReport report = klab::run_experiment(parsed.config);
        for (const auto& v : report.verdicts)
            std::cout << (v.pass ? "PASS" : "FAIL") << "  " << v.name << "  (" << v.details << ")\n";
        return report.all_pass() ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
