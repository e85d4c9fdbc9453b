#include "cli_config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

using cli_detail::parse_bool;
using cli_detail::parse_double;
using cli_detail::parse_int;
using cli_detail::parse_numbers;
using cli_detail::trim;

std::map<std::string, std::map<std::string, std::string>> read_config_file(
    const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open config file: " + path);
    std::map<std::string, std::map<std::string, std::string>> raw;
    std::string line, section;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw config_error(path + ":" + std::to_string(lineno) + ": malformed section");
            section = trim(line.substr(1, line.size() - 2));
            raw[section];
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos || section.empty())
            throw config_error(path + ":" + std::to_string(lineno) +
                               ": expected 'key = value' inside a section");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw config_error(path + ":" + std::to_string(lineno) + ": empty key");
        if (raw[section].count(key))
            throw config_error(path + ":" + std::to_string(lineno) + ": duplicate key " + key);
        raw[section][key] = value;
    }
    return raw;
}

namespace {

// benchmark default: 8 modes of stddev 1 on a circle of radius 2.5 at (1.5, -1)
void default_gmm(ExperimentConfig& cfg) {
    cfg.gmm_weights.assign(8, 0.125);
    cfg.gmm_stddevs.assign(8, 1.0);
    cfg.gmm_means.clear();
    for (int k = 0; k < 8; ++k) {
        double ang = 2.0 * M_PI * double(k) / 8.0;
        cfg.gmm_means.push_back({1.5 + 2.5 * std::cos(ang), -1.0 + 2.5 * std::sin(ang)});
    }
}

struct KeyReader {
    const std::map<std::string, std::string>& kv;
    std::set<std::string> seen{};

    const std::string* find(const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) return nullptr;
        seen.insert(key);
        return &it->second;
    }
    void take_string(const std::string& key, std::string& out) {
        if (const std::string* v = find(key)) out = *v;
    }
    void take_double(const std::string& key, double& out) {
        if (const std::string* v = find(key)) out = parse_double(*v, key);
    }
    void take_int(const std::string& key, int& out) {
        if (const std::string* v = find(key)) out = int(parse_int(*v, key));
    }
    void take_u64(const std::string& key, uint64_t& out) {
        if (const std::string* v = find(key)) out = uint64_t(parse_int(*v, key));
    }
    void take_bool(const std::string& key, bool& out) {
        if (const std::string* v = find(key)) out = parse_bool(*v, key);
    }
    void take_numbers(const std::string& key, std::vector<double>& out) {
        if (const std::string* v = find(key)) out = parse_numbers(*v, key);
    }
    void take_points(const std::string& key, std::vector<std::vector<double>>& out) {
        if (const std::string* v = find(key)) {
            out.clear();
            std::string part;
            std::istringstream ss(*v);
            while (std::getline(ss, part, ';')) {
                part = trim(part);
                if (part.empty()) continue;
                out.push_back(parse_numbers(part, key));
            }
        }
    }
    void finish(const std::string& section) {
        for (const auto& [key, value] : kv)
            if (!seen.count(key))
                throw config_error("unknown key '" + key + "' in section [" + section + "]");
    }
};

const std::set<std::string> kKnownSections = {"schedule", "oracle", "solver", "grid",
                                              "distill",  "ablate", "metrics", "run"};

}  // namespace

ExperimentConfig resolve_config(
    const std::map<std::string, std::map<std::string, std::string>>& raw) {
    for (const auto& [section, kv] : raw)
        if (!kKnownSections.count(section))
            throw config_error("unknown section [" + section + "]");

    ExperimentConfig cfg;
    default_gmm(cfg);
    static const std::map<std::string, std::string> empty;
    auto section = [&](const char* name) -> const std::map<std::string, std::string>& {
        auto it = raw.find(name);
        return it == raw.end() ? empty : it->second;
    };

    {
        KeyReader r{section("schedule")};
        r.take_string("kind", cfg.schedule_kind);
        r.take_double("beta_min", cfg.beta_min);
        r.take_double("beta_max", cfg.beta_max);
        r.take_double("t_epsilon", cfg.t_epsilon);
        r.take_double("sigma_min", cfg.sigma_min);
        r.take_double("sigma_max", cfg.sigma_max);
        r.take_double("rho", cfg.rho);
        r.finish("schedule");
        if (cfg.schedule_kind != "vp-linear" && cfg.schedule_kind != "ve-karras")
            throw config_error("schedule kind must be vp-linear or ve-karras");
    }
    {
        KeyReader r{section("oracle")};
        r.take_string("kind", cfg.oracle_kind);
        r.take_numbers("mean", cfg.gaussian_mean);
        r.take_double("stddev", cfg.gaussian_stddev);
        r.take_numbers("weights", cfg.gmm_weights);
        r.take_points("means", cfg.gmm_means);
        r.take_numbers("stddevs", cfg.gmm_stddevs);
        r.take_string("csv", cfg.points_csv);
        r.finish("oracle");
        if (cfg.oracle_kind != "gaussian" && cfg.oracle_kind != "gmm" &&
            cfg.oracle_kind != "point-cloud")
            throw config_error("oracle kind must be gaussian, gmm or point-cloud");
        if (cfg.oracle_kind == "point-cloud" && cfg.points_csv.empty())
            throw config_error("point-cloud oracle needs a csv path");
        if (cfg.oracle_kind == "gmm") {
            if (cfg.gmm_weights.size() != cfg.gmm_means.size() ||
                cfg.gmm_weights.size() != cfg.gmm_stddevs.size() || cfg.gmm_weights.empty())
                throw config_error("gmm oracle needs matching weights, means and stddevs");
            for (const auto& m : cfg.gmm_means)
                if (m.size() != cfg.gmm_means[0].size())
                    throw config_error("gmm means must all have the same dimension");
        }
    }
    {
        KeyReader r{section("solver")};
        r.take_string("kind", cfg.solver_kind);
        r.finish("solver");
    }
    {
        KeyReader r{section("grid")};
        r.take_int("steps", cfg.steps);
        r.take_string("spacing", cfg.spacing);
        r.finish("grid");
    }
    {
        KeyReader r{section("distill")};
        r.take_string("teacher", cfg.teacher);
        r.take_int("scale_c", cfg.scale_c);
        r.take_int("batch", cfg.distill_batch);
        r.take_int("fit_batches", cfg.fit_batches);
        r.take_int("eval_batches", cfg.eval_batches);
        r.finish("distill");
    }
    {
        KeyReader r{section("ablate")};
        r.take_numbers("values", cfg.ablate_values);
        r.take_int("seeds", cfg.ablate_seeds);
        r.take_int("eval_batch", cfg.ablate_eval_batch);
        r.finish("ablate");
    }
    {
        KeyReader r{section("metrics")};
        r.take_int("projections", cfg.projections);
        r.take_u64("metric_seed", cfg.metric_seed);
        r.take_int("reference_samples", cfg.reference_samples);
        r.take_u64("reference_seed", cfg.reference_seed);
        r.finish("metrics");
    }
    {
        KeyReader r{section("run")};
        r.take_u64("seed", cfg.seed);
        r.take_int("batch", cfg.run_batch);
        r.take_bool("record", cfg.record);
        r.finish("run");
    }
    return cfg;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_list(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += " ";
        out += fmt(v[i]);
    }
    return out;
}

}  // namespace

std::string render_config(const ExperimentConfig& cfg) {
    std::ostringstream f;
    f << "[schedule]\n";
    f << "kind = " << cfg.schedule_kind << "\n";
    if (cfg.schedule_kind == "vp-linear") {
        f << "beta_min = " << fmt(cfg.beta_min) << "\n";
        f << "beta_max = " << fmt(cfg.beta_max) << "\n";
        f << "t_epsilon = " << fmt(cfg.t_epsilon) << "\n";
    } else {
        f << "sigma_min = " << fmt(cfg.sigma_min) << "\n";
        f << "sigma_max = " << fmt(cfg.sigma_max) << "\n";
        f << "rho = " << fmt(cfg.rho) << "\n";
    }
    f << "\n[oracle]\n";
    f << "kind = " << cfg.oracle_kind << "\n";
    if (cfg.oracle_kind == "gaussian") {
        f << "mean = " << fmt_list(cfg.gaussian_mean) << "\n";
        f << "stddev = " << fmt(cfg.gaussian_stddev) << "\n";
    } else if (cfg.oracle_kind == "gmm") {
        f << "weights = " << fmt_list(cfg.gmm_weights) << "\n";
        f << "means = ";
        for (size_t i = 0; i < cfg.gmm_means.size(); ++i) {
            if (i) f << "; ";
            f << fmt_list(cfg.gmm_means[i]);
        }
        f << "\n";
        f << "stddevs = " << fmt_list(cfg.gmm_stddevs) << "\n";
    } else {
        f << "csv = " << cfg.points_csv << "\n";
    }
    f << "\n[solver]\nkind = " << cfg.solver_kind << "\n";
    f << "\n[grid]\nsteps = " << cfg.steps << "\nspacing = " << cfg.spacing << "\n";
    f << "\n[distill]\n";
    f << "teacher = " << cfg.teacher << "\n";
    f << "scale_c = " << cfg.scale_c << "\n";
    f << "batch = " << cfg.distill_batch << "\n";
    f << "fit_batches = " << cfg.fit_batches << "\n";
    f << "eval_batches = " << cfg.eval_batches << "\n";
    f << "\n[ablate]\n";
    if (!cfg.ablate_values.empty()) f << "values = " << fmt_list(cfg.ablate_values) << "\n";
    f << "seeds = " << cfg.ablate_seeds << "\n";
    f << "eval_batch = " << cfg.ablate_eval_batch << "\n";
    f << "\n[metrics]\n";
    f << "projections = " << cfg.projections << "\n";
    f << "metric_seed = " << cfg.metric_seed << "\n";
    f << "reference_samples = " << cfg.reference_samples << "\n";
    f << "reference_seed = " << cfg.reference_seed << "\n";
    f << "\n[run]\n";
    f << "seed = " << cfg.seed << "\n";
    f << "batch = " << cfg.run_batch << "\n";
    f << "record = " << (cfg.record ? "true" : "false") << "\n";
    return f.str();
}

ExperimentConfig load_config(const std::string& path) {
    return resolve_config(read_config_file(path));
}
