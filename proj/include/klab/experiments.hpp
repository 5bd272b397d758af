#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "klab/drift.hpp"

namespace klab {

/// Validated experiment description; every field is echoed into every output
/// artifact so runs are traceable.
struct ExperimentConfig {
    std::string name = "ou-check";
    DriftSpec drift;
    // numeric
    int d = 1;
    double L = 8.0;
    int n = 256;
    double dt = 1e-3;
    double T = 1.0;
    std::vector<double> lambda_sweep = {5.0, 10.0, 20.0, 40.0, 80.0};
    // mc
    int n_paths = 1000;
    std::uint64_t seed = 42;
    // outputs
    std::string out_dir = "out";
    std::string format = "csv";
    std::string scheme = "em";
    bool plot = false;

    std::string canonical_json() const;
    std::uint64_t config_hash() const;
};

struct ConfigError {
    std::string field;
    std::string message;
};

struct ParseResult {
    ExperimentConfig config;
    std::vector<ConfigError> errors;  // empty iff valid

    bool ok() const { return errors.empty(); }
};

/// Parse + validate a JSON config document; all violations are aggregated,
/// never just the first.
ParseResult parse_config(const std::string& text);

struct Verdict {
    std::string name;
    bool pass = false;
    std::string details;
};

struct RunReport {
    std::vector<Verdict> verdicts;
    std::vector<std::string> artifacts;  // files written

    bool all_pass() const {
        for (const auto& v : verdicts)
            if (!v.pass) return false;
        return true;
    }
};

const std::vector<std::string>& experiment_registry();

/// Execute one experiment; artifacts land in cfg.out_dir. Identical
/// (config, seed) produce byte-identical CSV/JSON.
RunReport run_experiment(const ExperimentConfig& cfg);

}  // namespace klab
