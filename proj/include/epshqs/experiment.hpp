#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "al_loop.hpp"
#include "config.hpp"
#include "design_space.hpp"
#include "metrics.hpp"
#include "random.hpp"

namespace epshqs {

struct RunOutcome {
    std::string strategy;
    std::uint64_t seed = 0;
    std::vector<IterationRecord> records;
    std::vector<SampleId> train_ids;
    std::optional<std::string> error;
};

struct StrategyCurve {
    std::string strategy;
    std::size_t seed_count = 0;
    std::vector<CurvePoint> points;
    std::vector<double> mean_cost;
    std::vector<double> fallback_rate;
    std::vector<std::optional<double>> mean_eps;
};

struct SummaryRow {
    std::string strategy;
    std::optional<double> final_mean;
    std::optional<double> final_std;
    std::optional<double> savings_vs_random;
    std::optional<double> time_saved_hours;
};

struct ExperimentResult {
    std::vector<RunOutcome> runs;  // ordered by (strategy, seed) as configured
    std::vector<StrategyCurve> curves;
    std::vector<SummaryRow> summary;
    std::vector<SampleId> test_ids;
};

struct ExperimentOptions {
    std::size_t jobs = 1;
    std::optional<std::filesystem::path> checkpoint_dir;
    bool write_files = true;
};

// Per-run seed derived from the experiment seed and the listed run seed.
inline std::uint64_t run_seed(std::uint64_t experiment_seed, std::uint64_t seed) {
    return mix_seeds({experiment_seed, seed});
}

inline std::uint64_t test_set_seed(std::uint64_t experiment_seed) {
    return mix_seeds({experiment_seed, 0x68656c646f7574ull});
}

inline std::string file_stem(const std::string& strategy) {
    std::string out = strategy;
    std::replace(out.begin(), out.end(), ':', '_');
    return out;
}

// Mean/std across successful runs at each iteration index.
inline StrategyCurve aggregate_curve(const std::string& strategy, const std::vector<const RunOutcome*>& runs) {
    StrategyCurve c;
    c.strategy = strategy;
    std::vector<const RunOutcome*> ok;
    for (const auto* r : runs)
        if (!r->error) ok.push_back(r);
    c.seed_count = ok.size();
    if (ok.empty()) return c;
    std::size_t len = ok.front()->records.size();
    for (const auto* r : ok) len = std::min(len, r->records.size());
    for (std::size_t t = 0; t < len; ++t) {
        std::vector<double> hits, costs, eps;
        std::size_t fallbacks = 0;
        for (const auto* r : ok) {
            const auto& rec = r->records[t];
            hits.push_back(rec.test_hit_rate);
            costs.push_back(rec.cumulative_cost_seconds);
            fallbacks += rec.fallback_used ? 1 : 0;
            if (rec.eps_used) eps.push_back(*rec.eps_used);
        }
        const auto h = mean_std(hits);
        c.points.push_back(
            CurvePoint{static_cast<double>(ok.front()->records[t].budget_used), h.mean, h.std});
        c.mean_cost.push_back(mean_std(costs).mean);
        c.fallback_rate.push_back(static_cast<double>(fallbacks) / static_cast<double>(ok.size()));
        c.mean_eps.push_back(eps.empty() ? std::nullopt : std::optional<double>(mean_std(eps).mean));
    }
    return c;
}

inline std::vector<SummaryRow> summarize(const std::vector<StrategyCurve>& curves, double sim_cost_seconds,
                                         double overhead_seconds) {
    const StrategyCurve* random = nullptr;
    for (const auto& c : curves)
        if (c.strategy == "random" && !c.points.empty()) random = &c;
    std::vector<SummaryRow> rows;
    for (const auto& c : curves) {
        SummaryRow row;
        row.strategy = c.strategy;
        if (!c.points.empty()) {
            row.final_mean = c.points.back().mean_hit_rate;
            row.final_std = c.points.back().std_hit_rate;
            if (random) {
                row.savings_vs_random = sample_savings(c.points, random->points);
                if (row.savings_vs_random && *row.savings_vs_random >= 0.0) {
                    row.time_saved_hours = time_saved(*row.savings_vs_random, random->points.back().budget_used,
                                                      sim_cost_seconds, overhead_seconds);
                }
            }
        }
        rows.push_back(row);
    }
    return rows;
}

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace detail

inline constexpr const char* kCurveHeader =
    "strategy,seed_count,budget_used,mean_hit_rate,std_hit_rate,mean_cumulative_cost_seconds,fallback_rate,"
    "mean_eps_used";
inline constexpr const char* kSummaryHeader =
    "strategy,final_mean_hit_rate,final_std,savings_vs_random,time_saved_hours";

inline void write_curve_csv(const StrategyCurve& c, std::ostream& os) {
    os << kCurveHeader << '\n';
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        os << c.strategy << ',' << c.seed_count << ',' << detail::fmt(c.points[i].budget_used) << ','
           << detail::fmt(c.points[i].mean_hit_rate) << ',' << detail::fmt(c.points[i].std_hit_rate) << ','
           << detail::fmt(c.mean_cost[i]) << ',' << detail::fmt(c.fallback_rate[i]) << ','
           << detail::fmt(c.mean_eps[i]) << '\n';
    }
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& os) {
    os << kSummaryHeader << '\n';
    for (const auto& r : rows) {
        os << r.strategy << ',' << detail::fmt(r.final_mean) << ',' << detail::fmt(r.final_std) << ','
           << detail::fmt(r.savings_vs_random) << ',' << detail::fmt(r.time_saved_hours) << '\n';
    }
}

// Raw per-iteration audit rows of every run.
inline void write_runs_csv(const std::vector<RunOutcome>& runs, std::ostream& os) {
    os << "strategy,seed,t,budget_used,test_hit_rate,student_loss,teacher_loss,cumulative_cost_seconds,"
          "fallback_used,resample_rounds,eps_used,selected_ids\n";
    for (const auto& run : runs) {
        for (const auto& r : run.records) {
            os << run.strategy << ',' << run.seed << ',' << r.t << ',' << r.budget_used << ','
               << detail::fmt(r.test_hit_rate) << ',' << detail::fmt(r.student_loss) << ','
               << detail::fmt(r.teacher_loss) << ',' << detail::fmt(r.cumulative_cost_seconds) << ','
               << (r.fallback_used ? 1 : 0) << ',' << r.resample_rounds << ',' << detail::fmt(r.eps_used) << ',';
            for (std::size_t i = 0; i < r.selected_ids.size(); ++i) os << (i ? " " : "") << r.selected_ids[i];
            os << '\n';
        }
    }
}

// Runs every (strategy, seed) pair against one shared held-out set, then
// aggregates in configuration order so the output does not depend on which
// worker finished first.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opt = {}) {
    cfg.validate();
    const TestSet test = make_test_set(cfg.loop.oracle, cfg.test_set_size, test_set_seed(cfg.loop.seed));

    std::optional<CandidatePool> pool;
    if (cfg.pool_path) pool = load_pool(cfg.pool_path->string(), oracle_space(cfg.loop.oracle));

    ExperimentResult result;
    result.test_ids = test.ids;
    for (const auto& s : cfg.strategies)
        for (auto seed : cfg.seeds) result.runs.push_back(RunOutcome{s, seed, {}, {}, std::nullopt});

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < result.runs.size(); i = next++) {
            auto& out = result.runs[i];
            try {
                LoopConfig loop = cfg.loop;
                loop.strategy = parse_strategy(out.strategy, loop.batch_size);
                loop.seed = run_seed(cfg.loop.seed, out.seed);
                RunOptions ro;
                if (pool) ro.pool = &*pool;
                if (opt.checkpoint_dir)
                    ro.checkpoint_dir = *opt.checkpoint_dir / file_stem(out.strategy) / ("seed_" + std::to_string(out.seed));
                RunResult rr = run(loop, test, ro);
                out.records = std::move(rr.records);
                for (const auto& s : rr.labeled.samples) out.train_ids.push_back(s.id);
            } catch (const std::exception& e) {
                out.error = e.what();
            }
        }
    };
    const std::size_t jobs = std::clamp<std::size_t>(opt.jobs, 1, result.runs.size());
    std::vector<std::thread> threads;
    for (std::size_t j = 1; j < jobs; ++j) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    for (const auto& s : cfg.strategies) {
        std::vector<const RunOutcome*> mine;
        for (const auto& r : result.runs)
            if (r.strategy == s) mine.push_back(&r);
        result.curves.push_back(aggregate_curve(s, mine));
    }
    result.summary = summarize(result.curves, cfg.loop.oracle.sim_cost_seconds, cfg.overhead_seconds);

    if (opt.write_files) {
        std::filesystem::create_directories(cfg.output_dir);
        for (const auto& c : result.curves) {
            std::ofstream f(cfg.output_dir / ("curve_" + file_stem(c.strategy) + ".csv"));
            write_curve_csv(c, f);
        }
        std::ofstream summary(cfg.output_dir / "summary.csv");
        write_summary_csv(result.summary, summary);
        std::ofstream runs(cfg.output_dir / "runs.csv");
        write_runs_csv(result.runs, runs);
        const bool any_error =
            std::any_of(result.runs.begin(), result.runs.end(), [](const RunOutcome& r) { return r.error.has_value(); });
        const auto errors_path = cfg.output_dir / "errors.csv";
        if (any_error) {
            std::ofstream errors(errors_path);
            errors << "strategy,seed,error\n";
            for (const auto& r : result.runs)
                if (r.error) errors << r.strategy << ',' << r.seed << ",\"" << *r.error << "\"\n";
        } else {
            std::filesystem::remove(errors_path);
        }
    }
    return result;
}

// Two whitespace-separated columns (budget_used mean_hit_rate) from a curve CSV.
inline void curve_to_plot_data(std::istream& csv, std::ostream& out) {
    std::string line;
    if (!std::getline(csv, line) || detail::trim(line) != kCurveHeader)
        throw SchemaError("plot-data: input is not a curve CSV");
    bool first = true;
    std::size_t line_no = 1;
    while (std::getline(csv, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
        if (cols.size() < 4) throw ParseError(line_no, "curve row has too few columns");
        if (first) {
            out << "# " << cols[0] << "\n# budget_used mean_hit_rate\n";
            first = false;
        }
        out << cols[2] << ' ' << cols[3] << '\n';
    }
}

}  // namespace epshqs
