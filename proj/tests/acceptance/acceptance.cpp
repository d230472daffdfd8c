// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "epshqs/epshqs.hpp"
#include "support/oracles.hpp"

using namespace epshqs;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// 1. analytic gradients against central differences
Outcome gradient_oracle() {
    const auto start = Clock::now();
    Rng rng(20240601);
    std::uniform_int_distribution<std::size_t> depth(1, 3), width(1, 16), in_dim(1, 6), batch(1, 12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    std::size_t params = 0;
    for (int k = 0; k < 20; ++k) {
        for (OutputHead head : {OutputHead::Linear, OutputHead::Sigmoid}) {
            MlpConfig cfg = head == OutputHead::Linear ? MlpConfig::student(in_dim(rng)) : MlpConfig::teacher(in_dim(rng));
            cfg.hidden.assign(depth(rng), 0);
            for (auto& h : cfg.hidden) h = width(rng);
            Mlp net = init(cfg, rng);
            for (auto& l : net.layers)
                for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = 0.1 * u(rng);
            const auto n = static_cast<Eigen::Index>(batch(rng));
            Matrix x(n, static_cast<Eigen::Index>(cfg.input_dim));
            for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
            Vector y(n);
            for (Eigen::Index i = 0; i < n; ++i) y(i) = head == OutputHead::Linear ? u(rng) : (u(rng) > 0 ? 1.0 : 0.0);
            const auto analytic = flatten_gradients(compute_gradients(net, x, y, nullptr));
            const auto numeric = testing::finite_difference_gradient(net, x, y, 1e-5);
            for (std::size_t i = 0; i < analytic.size(); ++i)
                worst = std::max(worst, testing::relative_error(analytic[i], numeric[i]));
            params += analytic.size();
        }
    }
    const double secs = seconds_since(start);
    std::ostringstream d;
    d << "40 nets, " << params << " partials, worst relative error " << worst << ", " << std::setprecision(3) << secs
      << " s";
    return {worst <= 1e-4 && secs < 30.0, d.str()};
}

// 2. top-B, DBAL(B=2) and eps-HQS composition against independent oracles
Outcome strategy_oracles() {
    Rng rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t topb_bad = 0;
    for (int k = 0; k < 1000; ++k) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 10000)(rng);
        SampleStream s(static_cast<std::uint64_t>(k));
        ScoredPool sp{sample_uniform(DesignSpace::unit_cube(2), n, s), {}};
        const int levels = k % 2 ? 1000000 : 10;  // half the pools carry heavy ties
        for (std::size_t i = 0; i < n; ++i) sp.fail_prob.push_back(std::floor(u(rng) * levels) / levels);
        std::shuffle(sp.pool.samples.begin(), sp.pool.samples.end(), rng);
        const std::size_t b = std::uniform_int_distribution<std::size_t>(1, n)(rng);
        if (select_top_b(sp, b).selected_ids() != testing::brute_force_top_b(sp, b)) ++topb_bad;
    }

    std::size_t dbal_bad = 0;
    const auto unit2 = DesignSpace::unit_cube(2);
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(4, 12)(rng);
        std::vector<std::vector<double>> pts;
        ScoredPool sp;
        for (std::size_t i = 0; i < n; ++i) {
            pts.push_back({u(rng), u(rng)});
            sp.pool.samples.push_back(Sample{static_cast<SampleId>(i), pts.back()});
            sp.fail_prob.push_back(0.05 + 0.95 * u(rng));
        }
        // beta = floor(n/2) keeps all points, or all but the least likely one when n is odd
        const std::size_t beta = n / 2;
        const auto sel = select_dbal(sp, unit2, 2, beta, rng);
        const auto kept = testing::brute_force_top_b(sp, 2 * beta);
        std::vector<std::vector<double>> kpts;
        std::vector<double> kw;
        for (auto id : kept) {
            kpts.push_back(pts[static_cast<std::size_t>(id)]);
            kw.push_back(sp.fail_prob[static_cast<std::size_t>(id)]);
        }
        const auto want = testing::nearest_points_to(testing::exhaustive_weighted_two_means(kpts, kw), kpts, kept);
        const auto got = sel.selected_ids();
        if (std::set<SampleId>(got.begin(), got.end()) != std::set<SampleId>(want.begin(), want.end())) ++dbal_bad;
    }

    std::size_t eps_bad = 0, eps_cases = 0, fallbacks = 0;
    const auto unit3 = DesignSpace::unit_cube(3);
    for (double eps : {0.25, 0.5, 0.75, 1.0}) {
        for (std::size_t b : {1, 7, 20, 50}) {
            for (std::uint64_t seed = 0; seed < 50; ++seed) {
                // alternate a learned-looking random teacher with a half-space one
                Rng trng(seed);
                const Mlp teacher = seed % 2 ? init(MlpConfig::teacher(3), trng) : testing::half_space_teacher(3);
                SampleStream s(mix_seeds({seed, b}));
                const auto r = select_eps_hqs(teacher, unit3, b, eps, s, 2000, 20);
                ++eps_cases;
                bool ok = r.selected.size() == b && r.fail_portion_ids.size() == failure_quota(eps, b);
                const auto ids = r.selected_ids();
                ok = ok && std::set<SampleId>(ids.begin(), ids.end()).size() == b;
                if (r.fallback_used) {
                    ++fallbacks;
                } else {
                    std::vector<Sample> quota;
                    const std::set<SampleId> q(r.fail_portion_ids.begin(), r.fail_portion_ids.end());
                    for (const auto& x : r.selected)
                        if (q.contains(x.id)) quota.push_back(x);
                    if (!quota.empty()) {
                        const auto scored = score_pool(teacher, unit3, CandidatePool{quota, PoolOrigin::OnTheFly});
                        for (double f : scored.fail_prob) ok = ok && f >= kFailureThreshold;
                    }
                }
                if (!ok) ++eps_bad;
            }
        }
    }
    std::ostringstream d;
    d << "top-B mismatches " << topb_bad << "/1000, DBAL mismatches " << dbal_bad << "/100, eps-HQS violations "
      << eps_bad << "/" << eps_cases << " (" << fallbacks << " fallback batches)";
    return {topb_bad == 0 && dbal_bad == 0 && eps_bad == 0, d.str()};
}

ExperimentConfig tiny_config(std::size_t iterations, std::size_t batch, const fs::path& out) {
    ExperimentConfig cfg;
    cfg.loop.oracle = OracleSpec::branin();
    cfg.loop.iterations = iterations;
    cfg.loop.batch_size = batch;
    cfg.loop.proposal_size = 100;
    cfg.loop.seed = 3;
    cfg.loop.student_cfg = MlpConfig::student(2);
    cfg.loop.student_cfg.hidden = {4};
    cfg.loop.student_cfg.epochs_initial = 2;
    cfg.loop.student_cfg.epochs_warm = 1;
    cfg.loop.teacher_cfg = MlpConfig::teacher(2);
    cfg.loop.teacher_cfg.hidden = {4};
    cfg.loop.teacher_cfg.epochs_initial = 2;
    cfg.loop.teacher_cfg.epochs_warm = 1;
    cfg.strategies = {"random", "eps_hqs:0.5"};
    cfg.seeds = {1};
    cfg.test_set_size = 100;
    cfg.output_dir = out;
    cfg.loop.strategy = parse_strategy(cfg.strategies.front(), batch);
    return cfg;
}

// 3. fixed labelling budgets and byte-identical reruns
Outcome budget_and_determinism(const fs::path& out) {
    std::ostringstream d;
    bool pass = true;
    for (auto [t, b] : {std::pair<std::size_t, std::size_t>{50, 50}, {400, 20}}) {
        ExperimentOptions opt;
        opt.write_files = false;
        const auto r = run_experiment(tiny_config(t, b, out), opt);
        for (const auto& run : r.runs) {
            const bool ok = !run.error && run.train_ids.size() == t * b &&
                            std::set<SampleId>(run.train_ids.begin(), run.train_ids.end()).size() == t * b;
            pass = pass && ok;
            d << run.strategy << " T=" << t << " B=" << b << " -> " << run.train_ids.size() << "; ";
        }
    }
    const auto a = out / "rerun_a", c = out / "rerun_b";
    run_experiment(tiny_config(10, 10, a));
    run_experiment(tiny_config(10, 10, c));
    bool same = true;
    for (const auto& entry : fs::directory_iterator(a))
        same = same && fs::exists(c / entry.path().filename()) && slurp(entry.path()) == slurp(c / entry.path().filename());
    d << (same ? "rerun CSVs identical" : "rerun CSVs differ");
    return {pass && same, d.str()};
}

// 4. termination under a teacher that never predicts failure
Outcome adversarial_termination() {
    const Mlp teacher = testing::constant_teacher(4, -20.0);
    const auto space = DesignSpace::unit_cube(4);
    const std::size_t max_rounds = 5, b = 20;
    std::size_t bad = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SampleStream s(seed);
        const auto r = select_eps_hqs(teacher, space, b, 0.5, s, 500, max_rounds);
        const auto ids = r.selected_ids();
        const bool ok = r.resample_rounds <= max_rounds && r.fallback_used && r.selected.size() == b &&
                        std::set<SampleId>(ids.begin(), ids.end()).size() == b;
        if (!ok) ++bad;
    }
    return {bad == 0, std::to_string(100 - bad) + "/100 seeds terminated with a full fallback batch"};
}

// 5. metric suite
Outcome metric_suite() {
    bool ok = true;
    const std::vector<double> ones{1.0, 1.0};
    ok = ok && hit_rate(ones, ones, 0.05) == 1.0;
    ok = ok && hit_rate(std::vector<double>{1.04, 1.06}, ones, 0.05) == 0.5;
    ok = ok && hit_rate(std::vector<double>(3, 0.0), std::vector<double>(3, 100.0), 0.05) == 0.0;
    const std::vector<CurvePoint> c{{50, 0.3, 0}, {100, 0.6, 0}, {150, 0.8, 0}};
    ok = ok && sample_savings(c, c) == 0.0;
    const double h = time_saved(0.575, 8000, 202.0, 0.0);
    ok = ok && std::abs(h - 258.1) <= 0.1;
    std::ostringstream d;
    d << "hit_rate examples, zero self-savings, time_saved = " << std::setprecision(6) << h << " h";
    return {ok, d.str()};
}

double pooled_std(double a, double b) { return std::sqrt(0.5 * (a * a + b * b)); }

// 6. strategy comparison on the vessel oracle
Outcome vessel_comparison(const fs::path& out) {
    const auto start = Clock::now();
    ExperimentConfig cfg;
    cfg.loop.oracle = OracleSpec::vessel_stress();
    cfg.loop.iterations = 40;
    cfg.loop.batch_size = 20;
    cfg.loop.student_cfg = MlpConfig::student(4);
    cfg.loop.teacher_cfg = MlpConfig::teacher(4);
    cfg.strategies = {"random", "top_b", "dbal:10", "dbal:50", "eps_hqs:0.5", "eps_hqs:log"};
    cfg.seeds = {1, 2, 3, 4, 5};
    cfg.output_dir = out / "vessel";
    cfg.loop.strategy = parse_strategy("random", 20);
    ExperimentOptions opt;
    opt.jobs = jobs();
    const auto r = run_experiment(cfg, opt);
    const double secs = seconds_since(start);

    std::cout << "  strategy        final_mean  final_std  savings_vs_random  time_saved_h\n";
    const StrategyCurve* random = nullptr;
    const StrategyCurve* eps = nullptr;
    for (std::size_t i = 0; i < r.curves.size(); ++i) {
        const auto& row = r.summary[i];
        std::cout << "  " << std::left << std::setw(16) << row.strategy << std::right << std::fixed
                  << std::setprecision(4) << std::setw(10) << row.final_mean.value_or(NAN) << std::setw(11)
                  << row.final_std.value_or(NAN) << std::setw(19) << row.savings_vs_random.value_or(NAN)
                  << std::setw(14) << std::setprecision(2) << row.time_saved_hours.value_or(NAN) << '\n'
                  << std::defaultfloat;
        if (r.curves[i].strategy == "random") random = &r.curves[i];
        if (r.curves[i].strategy == "eps_hqs:0.5") eps = &r.curves[i];
    }
    bool errors = false;
    for (const auto& run : r.runs) errors = errors || run.error.has_value();
    if (!random || !eps || random->points.empty() || eps->points.empty() || errors)
        return {false, "runs failed; see errors.csv"};
    const auto& rf = random->points.back();
    const auto& ef = eps->points.back();
    const double margin = pooled_std(rf.std_hit_rate, ef.std_hit_rate);
    std::ostringstream d;
    d << "eps_hqs:0.5 " << ef.mean_hit_rate << " vs random " << rf.mean_hit_rate << " (pooled std " << margin
      << "), " << std::setprecision(4) << secs << " s, table in " << (cfg.output_dir / "summary.csv").string();
    return {ef.mean_hit_rate >= rf.mean_hit_rate - margin && secs < 900.0, d.str()};
}

// 7. the student learns a smooth surface from uniform data
Outcome learnability(const fs::path& out) {
    const auto start = Clock::now();
    ExperimentConfig cfg;
    cfg.loop.oracle = OracleSpec::styblinski_tang(2);
    cfg.loop.iterations = 30;
    cfg.loop.batch_size = 20;
    cfg.loop.student_cfg = MlpConfig::student(2);
    cfg.loop.teacher_cfg = MlpConfig::teacher(2);
    cfg.strategies = {"random"};
    cfg.seeds = {1, 2, 3};
    cfg.output_dir = out / "styblinski";
    cfg.loop.strategy = parse_strategy("random", 20);
    ExperimentOptions opt;
    opt.jobs = jobs();
    const auto r = run_experiment(cfg, opt);
    const double secs = seconds_since(start);
    if (r.curves.front().points.empty()) return {false, "runs failed"};
    const double final_mean = r.curves.front().points.back().mean_hit_rate;
    double worst = 1.0;
    for (const auto& run : r.runs) worst = std::min(worst, run.records.back().test_hit_rate);
    std::ostringstream d;
    d << "final mean hit-rate " << final_mean << " (lowest seed " << worst << "), " << std::setprecision(4) << secs
      << " s";
    return {final_mean >= 0.6 && secs < 180.0, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    fs::path out = "acceptance_out";
    std::vector<int> only;
    app.add_option("--out", out, "directory for generated curves and tables");
    app.add_option("--only", only, "run only these criterion numbers");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(out);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient oracle", gradient_oracle},
        {"strategy oracles", strategy_oracles},
        {"budget and determinism", [&] { return budget_and_determinism(out); }},
        {"eps-HQS termination under adversarial teacher", adversarial_termination},
        {"metric suite", metric_suite},
        {"vessel strategy comparison", [&] { return vessel_comparison(out); }},
        {"end-to-end learnability", [&] { return learnability(out); }},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i + 1);
        if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << number << " (" << criteria[i].first
                  << "): " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
