#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "design_space.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "neural.hpp"
#include "oracle.hpp"
#include "random.hpp"
#include "strategies.hpp"

namespace epshqs {

// Held-out ids start here so they can never collide with training ids.
inline constexpr SampleId kTestIdBase = SampleId{1} << 48;

// Student network plus the target standardisation it was trained under.
struct Surrogate {
    Mlp net;
    double y_mean = 0.0;
    double y_scale = 1.0;

    Vector predict(const Matrix& x_normalized) const {
        return (forward(net, x_normalized).array() * y_scale + y_mean).matrix();
    }
};

inline void save_surrogate(const Surrogate& s, std::ostream& os) {
    const auto flags = os.flags();
    os << std::hexfloat << "target_scaling " << s.y_mean << ' ' << s.y_scale << '\n';
    os.flags(flags);
    save_checkpoint(s.net, os);
}

inline Surrogate load_surrogate(std::istream& is) {
    detail::TokenReader in(is);
    in.expect("target_scaling");
    Surrogate s;
    s.y_mean = in.real();
    s.y_scale = in.real();
    s.net = load_checkpoint(is);
    return s;
}

// D_train: samples, oracle labels, current indicator labels and the iteration
// each sample was added in (1 is the initial design).
struct LabeledSet {
    std::vector<Sample> samples;
    std::vector<double> y_star;
    std::vector<int> c_labels;
    std::vector<std::size_t> added_at;

    std::size_t size() const noexcept { return samples.size(); }
    bool is_initial(std::size_t i) const { return added_at.at(i) == 1; }

    void append(std::span<const Sample> batch, std::span<const Evaluation> evals, std::size_t iteration) {
        if (batch.size() != evals.size()) throw ShapeError("labeled set: one evaluation per sample");
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (batch[i].id != evals[i].sample_id) throw ShapeError("labeled set: evaluation order mismatch");
            samples.push_back(batch[i]);
            y_star.push_back(evals[i].y_star);
            c_labels.push_back(0);
            added_at.push_back(iteration);
        }
    }
};

struct TestSet {
    std::vector<SampleId> ids;
    Matrix x_normalized;
    std::vector<double> y_star;

    std::size_t size() const noexcept { return y_star.size(); }
};

// Uniform held-out set with ids from kTestIdBase upward.
inline TestSet make_test_set(const OracleSpec& oracle, std::size_t n, std::uint64_t seed) {
    const DesignSpace space = oracle_space(oracle);
    SampleStream stream(make_rng(seed, 0x74657374ull), kTestIdBase);
    const CandidatePool pool = sample_uniform(space, n, stream);
    TestSet t;
    for (const auto& s : pool.samples) t.ids.push_back(s.id);
    t.x_normalized = normalized_matrix(space, pool.samples);
    for (const auto& e : evaluate_batch(oracle, pool)) t.y_star.push_back(e.y_star);
    return t;
}

struct LoopConfig {
    std::size_t iterations = 50;
    std::size_t batch_size = 50;
    StrategySpec strategy{RandomQuery{}, 50, "random"};
    MlpConfig student_cfg = MlpConfig::student(2);
    MlpConfig teacher_cfg = MlpConfig::teacher(2);
    OracleSpec oracle = OracleSpec::branin();
    double tol = 0.05;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> teacher_seed;
    std::size_t proposal_size = 20000;
    std::size_t max_rounds = 20;
    bool cold_start = false;

    void validate() const {
        if (iterations == 0) throw ConfigError("loop: iterations must be >= 1");
        if (batch_size == 0) throw ConfigError("loop: batch_size must be >= 1");
        if (!(tol > 0.0)) throw ConfigError("loop: tol must be positive");
        if (proposal_size == 0 || max_rounds == 0) throw ConfigError("loop: proposal_size and max_rounds must be >= 1");
        oracle.validate();
        strategy.validate();
        student_cfg.validate();
        teacher_cfg.validate();
        if (student_cfg.input_dim != oracle.dim || teacher_cfg.input_dim != oracle.dim)
            throw ConfigError("loop: network input_dim must equal the oracle dimension");
        if (student_cfg.output != OutputHead::Linear) throw ConfigError("loop: student needs a linear head");
        if (teacher_cfg.output != OutputHead::Sigmoid) throw ConfigError("loop: teacher needs a sigmoid head");
        if (const auto* d = std::get_if<DbalQuery>(&strategy.kind); d && d->beta * batch_size > proposal_size)
            throw ConfigError("loop: proposal_size is smaller than beta * batch_size");
        if (!std::holds_alternative<RandomQuery>(strategy.kind) && !std::holds_alternative<EpsHqsQuery>(strategy.kind) &&
            batch_size > proposal_size)
            throw ConfigError("loop: proposal_size is smaller than batch_size");
    }
};

struct IterationRecord {
    std::size_t t = 0;
    std::size_t budget_used = 0;
    std::vector<SampleId> selected_ids;
    bool fallback_used = false;
    std::size_t resample_rounds = 0;
    double student_loss = 0.0;
    std::optional<double> teacher_loss;
    double test_hit_rate = 0.0;
    double cumulative_cost_seconds = 0.0;
    std::optional<double> eps_used;
};

struct RunResult {
    std::vector<IterationRecord> records;
    LabeledSet labeled;
    Surrogate student;
    std::optional<Mlp> teacher;
};

struct RunOptions {
    std::optional<std::filesystem::path> checkpoint_dir;
    // Finite unlabeled pool; when absent candidates are generated on the fly.
    const CandidatePool* pool = nullptr;
    // Called after each iteration's record is complete.
    std::function<void(const IterationRecord&, const LabeledSet&, const Surrogate&, const Mlp*)> on_iteration;
};

// C_i = 1 when the student's prediction is inside the tolerance band.
inline std::vector<int> indicator_labels(const Surrogate& student, const DesignSpace& space, const LabeledSet& set,
                                         double tol) {
    if (set.size() == 0) return {};
    const Vector pred = student.predict(normalized_matrix(space, set.samples));
    std::vector<int> c(set.size());
    for (std::size_t i = 0; i < set.size(); ++i)
        c[i] = within_band(pred(static_cast<Eigen::Index>(i)), set.y_star[i], tol) ? 1 : 0;
    return c;
}

struct TeacherData {
    Matrix x;
    Vector failure;  // 1 - C
    std::vector<int> c_labels;
};

// Every labeled sample, normalized, with C recomputed under the current student.
inline TeacherData teacher_training_set(const LabeledSet& labeled, const Surrogate& student, const DesignSpace& space,
                                        double tol) {
    if (labeled.size() == 0) throw ShapeError("teacher_training_set: labeled set is empty");
    TeacherData d;
    d.x = normalized_matrix(space, labeled.samples);
    d.c_labels = indicator_labels(student, space, labeled, tol);
    d.failure.resize(static_cast<Eigen::Index>(labeled.size()));
    for (std::size_t i = 0; i < labeled.size(); ++i)
        d.failure(static_cast<Eigen::Index>(i)) = d.c_labels[i] == 1 ? 0.0 : 1.0;
    return d;
}

// Inverse class-frequency weights n / (2 n_c), clamped to [0.1, 10].
inline Vector class_balance_weights(const Vector& labels) {
    const double n = static_cast<double>(labels.size());
    const double positives = labels.sum();
    const double negatives = n - positives;
    auto weight = [&](double count) { return count > 0.0 ? std::clamp(n / (2.0 * count), 0.1, 10.0) : 1.0; };
    const double w_pos = weight(positives);
    const double w_neg = weight(negatives);
    return labels.unaryExpr([&](double y) { return y > 0.5 ? w_pos : w_neg; });
}

namespace detail {

inline void fit_standardized(Surrogate& student, const Matrix& x, std::span<const double> y, std::size_t epochs,
                             Rng& rng, double* final_loss) {
    const MeanStd stats = mean_std(y);
    student.y_mean = stats.mean;
    student.y_scale = stats.std > 0.0 ? stats.std : 1.0;
    Vector target(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i)
        target(static_cast<Eigen::Index>(i)) = (y[i] - student.y_mean) / student.y_scale;
    *final_loss = fit(student.net, x, target, epochs, rng).final_loss;
}

inline std::string checkpoint_name(const char* who, std::size_t t) {
    std::ostringstream os;
    os << who << "_t" << std::setw(4) << std::setfill('0') << t << ".ckpt";
    return os.str();
}

}  // namespace detail

// Student-teacher active learning. Iteration 1 labels B uniform samples and
// trains the student; every later iteration relabels D_train with C, refines
// the teacher on the failure indicator, queries B new samples with the
// configured strategy, labels them and refines the student. |D_train| = T * B.
inline RunResult run(const LoopConfig& cfg, const TestSet& test, const RunOptions& options = {}) {
    cfg.validate();
    if (test.size() == 0) throw ConfigError("run: empty test set");
    const DesignSpace space = oracle_space(cfg.oracle);
    const std::size_t B = cfg.batch_size;

    StrategySpec strategy = cfg.strategy;
    strategy.batch_size = B;
    if (auto* q = std::get_if<EpsHqsQuery>(&strategy.kind);
        q && q->schedule.kind == EpsSchedule::Kind::LogIncreasing && q->schedule.total_iters == 0) {
        q->schedule.total_iters = std::max<std::size_t>(cfg.iterations - 1, 1);
    }

    SampleStream selection(make_rng(cfg.seed, 1), 0);
    Rng student_rng = make_rng(cfg.seed, 2);
    Rng teacher_rng = make_rng(cfg.teacher_seed.value_or(cfg.seed), 3);

    std::optional<CandidatePool> unlabeled;
    if (options.pool) {
        for (const auto& s : options.pool->samples)
            if (!space.contains(s.coords)) throw DomainError("run: pool sample " + std::to_string(s.id) + " outside the oracle box");
        if (!ids_unique(options.pool->samples)) throw ConfigError("run: pool ids are not unique");
        if (options.pool->size() < cfg.iterations * B)
            throw CapacityError("run: pool smaller than the labelling budget T*B");
        unlabeled = *options.pool;
    }

    if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);

    RunResult result;
    result.student.net = init(cfg.student_cfg, student_rng);
    std::optional<Mlp> teacher;
    double cumulative_cost = 0.0;

    auto write_checkpoints = [&](std::size_t t) {
        if (!options.checkpoint_dir) return;
        std::ofstream s(*options.checkpoint_dir / detail::checkpoint_name("student", t));
        save_surrogate(result.student, s);
        if (teacher) {
            std::ofstream f(*options.checkpoint_dir / detail::checkpoint_name("teacher", t));
            save_checkpoint(*teacher, f);
        }
    };

    auto remove_from_pool = [&](const std::vector<Sample>& taken) {
        if (!unlabeled) return;
        std::unordered_set<SampleId> ids;
        for (const auto& s : taken) ids.insert(s.id);
        std::erase_if(unlabeled->samples, [&](const Sample& s) { return ids.contains(s.id); });
    };

    for (std::size_t t = 1; t <= cfg.iterations; ++t) {
        IterationRecord rec;
        rec.t = t;
        SelectionResult sel;

        if (t == 1) {
            sel = unlabeled ? select_random(*unlabeled, B, selection.engine) : select_random(space, B, selection);
        } else {
            TeacherData td = teacher_training_set(result.labeled, result.student, space, cfg.tol);
            result.labeled.c_labels = td.c_labels;
            const bool first_teacher = !teacher.has_value();
            if (first_teacher) teacher = init(cfg.teacher_cfg, teacher_rng);
            const Vector weights = class_balance_weights(td.failure);
            rec.teacher_loss = fit(*teacher, td.x, td.failure,
                                   first_teacher ? cfg.teacher_cfg.epochs_initial : cfg.teacher_cfg.epochs_warm,
                                   teacher_rng, &weights)
                                   .final_loss;

            std::visit(
                [&](const auto& q) {
                    using Q = std::decay_t<decltype(q)>;
                    auto scored_candidates = [&] {
                        return score_pool(*teacher, space,
                                          unlabeled ? *unlabeled : sample_uniform(space, cfg.proposal_size, selection));
                    };
                    if constexpr (std::is_same_v<Q, RandomQuery>) {
                        sel = unlabeled ? select_random(*unlabeled, B, selection.engine) : select_random(space, B, selection);
                    } else if constexpr (std::is_same_v<Q, TopBQuery>) {
                        sel = select_top_b(scored_candidates(), B);
                    } else if constexpr (std::is_same_v<Q, DbalQuery>) {
                        sel = select_dbal(scored_candidates(), space, B, q.beta, selection.engine);
                    } else {
                        const double eps = eps_value(q.schedule, t - 1);
                        rec.eps_used = eps;
                        sel = unlabeled ? select_eps_hqs(*teacher, space, *unlabeled, B, eps, selection.engine)
                                        : select_eps_hqs(*teacher, space, B, eps, selection, cfg.proposal_size,
                                                         cfg.max_rounds);
                    }
                },
                strategy.kind);
        }

        if (sel.selected.size() != B) throw CapacityError("run: strategy returned a short batch");
        remove_from_pool(sel.selected);

        std::vector<Evaluation> evals;
        try {
            evals = evaluate_batch(cfg.oracle, sel.selected);
        } catch (const std::exception& e) {
            throw std::runtime_error("iteration " + std::to_string(t) + ": " + e.what());
        }
        cumulative_cost += total_cost(evals);
        result.labeled.append(sel.selected, evals, t);

        const Matrix x = normalized_matrix(space, result.labeled.samples);
        std::size_t epochs = cfg.student_cfg.epochs_warm;
        if (t == 1 || cfg.cold_start) {
            if (t > 1) result.student.net = init(cfg.student_cfg, student_rng);
            epochs = cfg.student_cfg.epochs_initial;
        }
        detail::fit_standardized(result.student, x, result.labeled.y_star, epochs, student_rng, &rec.student_loss);

        const Vector pred = result.student.predict(test.x_normalized);
        rec.test_hit_rate = hit_rate(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                                     test.y_star, cfg.tol);
        rec.budget_used = result.labeled.size();
        rec.selected_ids = sel.selected_ids();
        rec.fallback_used = sel.fallback_used;
        rec.resample_rounds = sel.resample_rounds;
        rec.cumulative_cost_seconds = cumulative_cost;

        write_checkpoints(t);
        if (options.on_iteration) options.on_iteration(rec, result.labeled, result.student, teacher ? &*teacher : nullptr);
        result.records.push_back(std::move(rec));
    }
    // C for the final student, so the returned set satisfies the labeling invariant.
    result.labeled.c_labels = indicator_labels(result.student, space, result.labeled, cfg.tol);
    result.teacher = std::move(teacher);
    return result;
}

}  // namespace epshqs
