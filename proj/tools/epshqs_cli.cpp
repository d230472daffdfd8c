// epshqs: run active-learning experiments, describe oracles, export curves.

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "epshqs/epshqs.hpp"

namespace {

int cmd_run(const std::string& config_path, std::size_t jobs, const std::string& checkpoint_dir) {
    auto cfg = epshqs::load_experiment_config(config_path);
    epshqs::apply_env_overrides(cfg);
    epshqs::ExperimentOptions opt;
    opt.jobs = jobs;
    if (!checkpoint_dir.empty()) opt.checkpoint_dir = checkpoint_dir;

    const auto start = std::chrono::steady_clock::now();
    const auto result = epshqs::run_experiment(cfg, opt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::cout << std::left << std::setw(16) << "strategy" << std::setw(12) << "final_mean" << std::setw(12)
              << "final_std" << std::setw(14) << "savings" << "hours_saved\n";
    for (const auto& row : result.summary) {
        auto show = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("-"); };
        std::cout << std::left << std::setw(16) << row.strategy << std::setw(12) << show(row.final_mean)
                  << std::setw(12) << show(row.final_std) << std::setw(14) << show(row.savings_vs_random)
                  << show(row.time_saved_hours) << '\n';
    }
    std::size_t failed = 0;
    for (const auto& r : result.runs) {
        if (r.error) {
            ++failed;
            std::cerr << "run " << r.strategy << " seed " << r.seed << " failed: " << *r.error << '\n';
        }
    }
    std::cout << "wrote " << cfg.output_dir.string() << " in " << std::fixed << std::setprecision(1) << secs << " s\n";
    return failed == 0 ? 0 : 2;
}

int cmd_describe(const std::string& name, std::size_t dim) {
    const auto kind = epshqs::parse_oracle_kind(name);
    if (!kind) {
        std::cerr << "unknown oracle '" << name << "' (branin2, hartmann6, styblinski_tang, vessel_stress4)\n";
        return 1;
    }
    epshqs::OracleSpec spec;
    switch (*kind) {
        case epshqs::OracleKind::Branin2: spec = epshqs::OracleSpec::branin(); break;
        case epshqs::OracleKind::Hartmann6: spec = epshqs::OracleSpec::hartmann6(); break;
        case epshqs::OracleKind::StyblinskiTangD: spec = epshqs::OracleSpec::styblinski_tang(dim == 0 ? 2 : dim); break;
        case epshqs::OracleKind::VesselStress4: spec = epshqs::OracleSpec::vessel_stress(); break;
    }
    std::cout << epshqs::describe_oracle(spec);
    return 0;
}

int cmd_plot_data(const std::string& curve_path) {
    std::ifstream in(curve_path);
    if (!in) {
        std::cerr << "cannot open " << curve_path << '\n';
        return 1;
    }
    epshqs::curve_to_plot_data(in, std::cout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active learning for regression surrogates with epsilon-weighted hybrid queries"};
    app.require_subcommand(1);

    std::string config_path;
    std::size_t jobs = 1;
    std::string checkpoint_dir;
    auto* run = app.add_subcommand("run", "run an experiment described by a JSON config");
    run->add_option("--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
    run->add_option("--jobs", jobs, "parallel (strategy, seed) runs")->check(CLI::PositiveNumber);
    run->add_option("--checkpoint-dir", checkpoint_dir, "write per-iteration student/teacher checkpoints here");

    std::string oracle;
    std::size_t dim = 0;
    auto* describe = app.add_subcommand("describe", "print an oracle's box and formula");
    describe->add_option("--oracle", oracle, "branin2 | hartmann6 | styblinski_tang | vessel_stress4")->required();
    describe->add_option("--dim", dim, "dimension for styblinski_tang");

    std::string curve;
    auto* plot = app.add_subcommand("plot-data", "re-emit a curve CSV as two gnuplot columns");
    plot->add_option("--curve", curve, "curve CSV written by `run`")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, jobs, checkpoint_dir);
        if (*describe) return cmd_describe(oracle, dim);
        if (*plot) return cmd_plot_data(curve);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
