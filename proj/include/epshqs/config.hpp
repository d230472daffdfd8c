#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "al_loop.hpp"
#include "errors.hpp"
#include "oracle.hpp"
#include "strategies.hpp"

namespace epshqs {

struct ExperimentConfig {
    LoopConfig loop;
    std::vector<std::string> strategies;
    std::vector<std::uint64_t> seeds;
    std::size_t test_set_size = 10000;
    std::filesystem::path output_dir = "out";
    std::optional<std::filesystem::path> pool_path;
    double overhead_seconds = 0.0;

    void validate() const {
        loop.validate();
        if (strategies.empty()) throw ConfigError("config: at least one strategy is required");
        for (const auto& s : strategies) {
            LoopConfig per_strategy = loop;
            per_strategy.strategy = parse_strategy(s, loop.batch_size);
            per_strategy.validate();
        }
        if (std::set<std::string>(strategies.begin(), strategies.end()).size() != strategies.size())
            throw ConfigError("config: strategies must be distinct");
        if (seeds.empty()) throw ConfigError("config: seeds must be nonempty");
        if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
            throw ConfigError("config: seeds must be distinct");
        if (test_set_size < 100) throw ConfigError("config: test_set_size must be >= 100");
        if (!(overhead_seconds >= 0.0)) throw ConfigError("config: overhead_seconds must be non-negative");
    }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for " + where + "." + key + ": " + e.what());
    }
}

inline OracleSpec parse_oracle(const json& j) {
    reject_unknown(j, {"kind", "dim", "sim_cost_seconds"}, "oracle");
    if (!j.contains("kind")) throw ConfigError("config: oracle.kind is required");
    const auto name = get_or<std::string>(j, "kind", "", "oracle");
    const auto kind = parse_oracle_kind(name);
    if (!kind) throw ConfigError("config: unknown oracle '" + name + "'");
    OracleSpec spec;
    switch (*kind) {
        case OracleKind::Branin2: spec = OracleSpec::branin(); break;
        case OracleKind::Hartmann6: spec = OracleSpec::hartmann6(); break;
        case OracleKind::StyblinskiTangD: spec = OracleSpec::styblinski_tang(2); break;
        case OracleKind::VesselStress4: spec = OracleSpec::vessel_stress(); break;
    }
    spec.dim = get_or<std::size_t>(j, "dim", spec.dim, "oracle");
    spec.sim_cost_seconds = get_or<double>(j, "sim_cost_seconds", spec.sim_cost_seconds, "oracle");
    spec.validate();
    return spec;
}

inline MlpConfig parse_network(const json& j, MlpConfig base, const std::string& where) {
    reject_unknown(j,
                   {"hidden", "lr", "learning_rate", "epochs_initial", "epochs_warm", "minibatch", "adam_beta1",
                    "adam_beta2", "adam_eps"},
                   where);
    base.hidden = get_or<std::vector<std::size_t>>(j, "hidden", base.hidden, where);
    base.learning_rate = get_or<double>(j, "learning_rate", base.learning_rate, where);
    base.learning_rate = get_or<double>(j, "lr", base.learning_rate, where);
    base.epochs_initial = get_or<std::size_t>(j, "epochs_initial", base.epochs_initial, where);
    base.epochs_warm = get_or<std::size_t>(j, "epochs_warm", base.epochs_warm, where);
    base.minibatch = get_or<std::size_t>(j, "minibatch", base.minibatch, where);
    base.adam_beta1 = get_or<double>(j, "adam_beta1", base.adam_beta1, where);
    base.adam_beta2 = get_or<double>(j, "adam_beta2", base.adam_beta2, where);
    base.adam_eps = get_or<double>(j, "adam_eps", base.adam_eps, where);
    return base;
}

}  // namespace detail

// JSON experiment description. Unknown keys anywhere are errors.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& root) {
    using detail::get_or;
    detail::reject_unknown(root,
                           {"oracle", "loop", "student", "teacher", "strategies", "seeds", "test_set_size",
                            "output_dir", "pool", "overhead_seconds"},
                           "config");
    if (!root.contains("oracle")) throw ConfigError("config: 'oracle' is required");
    if (!root.contains("strategies")) throw ConfigError("config: 'strategies' is required");
    if (!root.contains("seeds")) throw ConfigError("config: 'seeds' is required");

    ExperimentConfig cfg;
    auto& loop = cfg.loop;
    loop.oracle = detail::parse_oracle(root.at("oracle"));

    const auto loop_json = root.value("loop", nlohmann::json::object());
    detail::reject_unknown(loop_json,
                           {"iterations", "batch_size", "tol", "proposal_size", "max_rounds", "seed", "cold_start"},
                           "loop");
    loop.iterations = get_or<std::size_t>(loop_json, "iterations", loop.iterations, "loop");
    loop.batch_size = get_or<std::size_t>(loop_json, "batch_size", loop.batch_size, "loop");
    loop.tol = get_or<double>(loop_json, "tol", loop.tol, "loop");
    loop.proposal_size = get_or<std::size_t>(loop_json, "proposal_size", loop.proposal_size, "loop");
    loop.max_rounds = get_or<std::size_t>(loop_json, "max_rounds", loop.max_rounds, "loop");
    loop.seed = get_or<std::uint64_t>(loop_json, "seed", loop.seed, "loop");
    loop.cold_start = get_or<bool>(loop_json, "cold_start", loop.cold_start, "loop");

    loop.student_cfg = detail::parse_network(root.value("student", nlohmann::json::object()),
                                             MlpConfig::student(loop.oracle.dim), "student");
    loop.teacher_cfg = detail::parse_network(root.value("teacher", nlohmann::json::object()),
                                             MlpConfig::teacher(loop.oracle.dim), "teacher");

    cfg.strategies = get_or<std::vector<std::string>>(root, "strategies", {}, "config");
    cfg.seeds = get_or<std::vector<std::uint64_t>>(root, "seeds", {}, "config");
    cfg.test_set_size = get_or<std::size_t>(root, "test_set_size", cfg.test_set_size, "config");
    cfg.output_dir = get_or<std::string>(root, "output_dir", cfg.output_dir.string(), "config");
    if (root.contains("pool")) cfg.pool_path = get_or<std::string>(root, "pool", "", "config");
    cfg.overhead_seconds = get_or<double>(root, "overhead_seconds", cfg.overhead_seconds, "config");
    loop.strategy = parse_strategy(cfg.strategies.front(), loop.batch_size);
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    auto cfg = parse_experiment_config(root);
    // relative pool paths resolve against the config file's directory
    if (cfg.pool_path && cfg.pool_path->is_relative()) cfg.pool_path = path.parent_path() / *cfg.pool_path;
    return cfg;
}

// EPSHQS_SEED replaces loop.seed (smoke tests).
inline void apply_env_overrides(ExperimentConfig& cfg) {
    if (const char* s = std::getenv("EPSHQS_SEED"); s && *s) {
        char* end = nullptr;
        const auto v = std::strtoull(s, &end, 10);
        if (*end != '\0') throw ConfigError("EPSHQS_SEED must be an unsigned integer");
        cfg.loop.seed = v;
    }
}

}  // namespace epshqs
