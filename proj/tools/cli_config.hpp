#pragma once

// Experiment config: flat INI-style sections of key = value pairs.
// Unknown sections or keys are rejected; every run writes back a resolved
// copy (all effective values, canonical order) next to its outputs, and that
// copy re-parses to the identical configuration.

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <dode/dode.h>

struct CliError {
    int exit_code;
    std::string message;
};

inline CliError config_error(const std::string& msg) {
    return CliError{2, msg};
}

struct ExperimentConfig {
    // [schedule]
    std::string schedule_kind = "vp-linear";
    double beta_min = 0.1, beta_max = 20.0, t_epsilon = 1e-3;
    double sigma_min = 0.002, sigma_max = 80.0, rho = 7.0;

    // [oracle]
    std::string oracle_kind = "gmm";
    std::vector<double> gaussian_mean = {0.0, 0.0};
    double gaussian_stddev = 1.0;
    std::vector<double> gmm_weights;
    std::vector<std::vector<double>> gmm_means;
    std::vector<double> gmm_stddevs;
    std::string points_csv;

    // [solver]
    std::string solver_kind = "ddim-noise";

    // [grid]
    int steps = 10;
    std::string spacing = "uniform-t";

    // [distill]
    std::string teacher = "auto";
    int scale_c = 10;
    int distill_batch = 100;
    int fit_batches = 1;
    int eval_batches = 5;

    // [ablate]
    std::vector<double> ablate_values;  // empty: per-axis defaults
    int ablate_seeds = 3;
    int ablate_eval_batch = 512;

    // [metrics]
    int projections = 128;
    uint64_t metric_seed = 99;
    int reference_samples = 2048;
    uint64_t reference_seed = 1234;

    // [run]
    uint64_t seed = 7;
    int run_batch = 100;
    bool record = false;
};

namespace cli_detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<double> parse_numbers(const std::string& s, const std::string& key) {
    std::vector<double> out;
    std::istringstream ss(s);
    std::string tok;
    while (ss >> tok) {
        try {
            size_t pos = 0;
            out.push_back(std::stod(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw config_error("key '" + key + "': cannot parse number '" + tok + "'");
        }
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& key) {
    std::vector<double> v = parse_numbers(s, key);
    if (v.size() != 1) throw config_error("key '" + key + "' expects one number");
    return v[0];
}

inline long parse_int(const std::string& s, const std::string& key) {
    double v = parse_double(s, key);
    if (v != double(long(v))) throw config_error("key '" + key + "' expects an integer");
    return long(v);
}

inline bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw config_error("key '" + key + "' expects true or false");
}

}  // namespace cli_detail

// Raw sections; parse errors carry exit code 2.
std::map<std::string, std::map<std::string, std::string>> read_config_file(
    const std::string& path);

ExperimentConfig resolve_config(
    const std::map<std::string, std::map<std::string, std::string>>& raw);

// Canonical text form; parsing it back yields the same resolved config.
std::string render_config(const ExperimentConfig& cfg);

ExperimentConfig load_config(const std::string& path);
