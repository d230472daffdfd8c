#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "design_space.hpp"
#include "errors.hpp"
#include "neural.hpp"
#include "random.hpp"

namespace epshqs {

// Teacher output at or above this value marks a predicted student failure.
inline constexpr double kFailureThreshold = 0.5;

struct ScoredPool {
    CandidatePool pool;
    std::vector<double> fail_prob;

    void validate() const {
        if (fail_prob.size() != pool.size()) throw ShapeError("scored pool: one probability per sample required");
        for (double p : fail_prob)
            if (!(p >= 0.0 && p <= 1.0)) throw DomainError("scored pool: probabilities must lie in [0,1]");
    }
};

struct EpsSchedule {
    enum class Kind { Fixed, LogIncreasing };
    Kind kind = Kind::Fixed;
    double eps = 1.0;
    // 0 means "one per query iteration of the loop"; resolved by the loop.
    std::size_t total_iters = 0;

    static EpsSchedule fixed(double e) {
        if (!(e > 0.0 && e <= 1.0)) throw ConfigError("fixed epsilon must satisfy 0 < eps <= 1");
        return {Kind::Fixed, e, 0};
    }
    static EpsSchedule log_increasing(std::size_t total) { return {Kind::LogIncreasing, 1.0, total}; }
};

// Fixed: eps. LogIncreasing: ln(1+t) / ln(1+T) for 1 <= t <= T.
inline double eps_value(const EpsSchedule& schedule, std::size_t t) {
    if (schedule.kind == EpsSchedule::Kind::Fixed) {
        if (!(schedule.eps > 0.0 && schedule.eps <= 1.0)) throw DomainError("fixed epsilon outside (0,1]");
        return schedule.eps;
    }
    const std::size_t total = schedule.total_iters;
    if (total == 0) throw DomainError("log-increasing schedule has no horizon");
    if (t < 1 || t > total)
        throw DomainError("schedule index " + std::to_string(t) + " outside [1, " + std::to_string(total) + "]");
    const double v = std::log1p(static_cast<double>(t)) / std::log1p(static_cast<double>(total));
    return std::clamp(v, std::numeric_limits<double>::min(), 1.0);
}

struct RandomQuery {};
struct TopBQuery {};
struct DbalQuery {
    std::size_t beta = 10;
};
struct EpsHqsQuery {
    EpsSchedule schedule;
};

using QueryKind = std::variant<RandomQuery, TopBQuery, DbalQuery, EpsHqsQuery>;

struct StrategySpec {
    QueryKind kind;
    std::size_t batch_size = 1;
    std::string label;

    bool needs_teacher() const { return !std::holds_alternative<RandomQuery>(kind); }

    void validate() const {
        if (batch_size == 0) throw ConfigError("batch size must be >= 1");
        if (const auto* d = std::get_if<DbalQuery>(&kind); d && d->beta == 0)
            throw ConfigError("dbal beta must be >= 1");
    }
};

// Parses `random`, `top_b`, `dbal:<beta>`, `eps_hqs:<eps>` or `eps_hqs:log`.
inline StrategySpec parse_strategy(const std::string& text, std::size_t batch_size) {
    StrategySpec spec;
    spec.batch_size = batch_size;
    spec.label = text;
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? std::string() : text.substr(colon + 1);
    auto no_arg = [&] {
        if (colon != std::string::npos) throw ConfigError("strategy '" + head + "' takes no argument");
    };
    if (head == "random") {
        no_arg();
        spec.kind = RandomQuery{};
    } else if (head == "top_b") {
        no_arg();
        spec.kind = TopBQuery{};
    } else if (head == "dbal") {
        std::size_t beta = 0;
        auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), beta);
        if (arg.empty() || ec != std::errc() || p != arg.data() + arg.size() || beta == 0)
            throw ConfigError("dbal needs a positive integer beta, got '" + arg + "'");
        spec.kind = DbalQuery{beta};
    } else if (head == "eps_hqs") {
        if (arg == "log") {
            spec.kind = EpsHqsQuery{EpsSchedule::log_increasing(0)};
        } else {
            double e = 0.0;
            auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), e);
            if (arg.empty() || ec != std::errc() || p != arg.data() + arg.size())
                throw ConfigError("eps_hqs needs a number in (0,1] or 'log', got '" + arg + "'");
            spec.kind = EpsHqsQuery{EpsSchedule::fixed(e)};
        }
    } else {
        throw ConfigError("unknown strategy '" + text + "'");
    }
    spec.validate();
    return spec;
}

struct SelectionResult {
    std::vector<Sample> selected;
    std::vector<SampleId> fail_portion_ids;
    bool fallback_used = false;
    std::size_t resample_rounds = 0;

    std::vector<SampleId> selected_ids() const {
        std::vector<SampleId> ids;
        ids.reserve(selected.size());
        for (const auto& s : selected) ids.push_back(s.id);
        return ids;
    }
};

// round-half-up(eps * B)
inline std::size_t failure_quota(double eps, std::size_t batch) {
    return static_cast<std::size_t>(std::floor(eps * static_cast<double>(batch) + 0.5));
}

namespace detail {

// Descending probability, ascending id on ties.
inline std::vector<std::size_t> rank_by_probability(const ScoredPool& scored) {
    std::vector<std::size_t> idx(scored.pool.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scored.fail_prob[a] != scored.fail_prob[b]) return scored.fail_prob[a] > scored.fail_prob[b];
        return scored.pool.samples[a].id < scored.pool.samples[b].id;
    });
    return idx;
}

// k distinct indices of [0, n), uniformly without replacement (partial Fisher-Yates).
inline std::vector<std::size_t> choose_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace detail

// Teacher failure probability of every pool sample, in pool order.
inline ScoredPool score_pool(const Mlp& teacher, const DesignSpace& space, const CandidatePool& pool) {
    if (teacher.config.output != OutputHead::Sigmoid)
        throw ConfigError("score_pool: teacher must have a sigmoid head");
    if (teacher.config.input_dim != space.dim()) throw ShapeError("score_pool: teacher/space dimension mismatch");
    ScoredPool scored;
    scored.pool = pool;
    scored.fail_prob.reserve(pool.size());
    constexpr std::size_t chunk = 8192;
    for (std::size_t start = 0; start < pool.size(); start += chunk) {
        const std::size_t n = std::min(chunk, pool.size() - start);
        const Matrix x = normalized_matrix(space, std::span<const Sample>(pool.samples).subspan(start, n));
        const Vector p = forward(teacher, x);
        for (Eigen::Index i = 0; i < p.size(); ++i) scored.fail_prob.push_back(p(i));
    }
    return scored;
}

// Uniform draws without replacement from a finite pool.
inline SelectionResult select_random(const CandidatePool& pool, std::size_t batch, Rng& rng) {
    if (batch == 0) throw ConfigError("select_random: batch must be >= 1");
    if (pool.size() < batch)
        throw CapacityError("select_random: pool of " + std::to_string(pool.size()) + " cannot supply " +
                            std::to_string(batch));
    SelectionResult r;
    for (auto i : detail::choose_without_replacement(pool.size(), batch, rng)) r.selected.push_back(pool.samples[i]);
    return r;
}

// Fresh uniform samples over the whole design space.
inline SelectionResult select_random(const DesignSpace& space, std::size_t batch, SampleStream& stream) {
    if (batch == 0) throw ConfigError("select_random: batch must be >= 1");
    SelectionResult r;
    r.selected = sample_uniform(space, batch, stream).samples;
    return r;
}

inline SelectionResult select_top_b(const ScoredPool& scored, std::size_t batch) {
    scored.validate();
    if (batch == 0) throw ConfigError("select_top_b: batch must be >= 1");
    if (scored.pool.size() < batch)
        throw CapacityError("select_top_b: pool of " + std::to_string(scored.pool.size()) + " cannot supply " +
                            std::to_string(batch));
    const auto order = detail::rank_by_probability(scored);
    SelectionResult r;
    for (std::size_t k = 0; k < batch; ++k) {
        r.selected.push_back(scored.pool.samples[order[k]]);
        r.fail_portion_ids.push_back(r.selected.back().id);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Weighted k-means (k-means++ seeding, Lloyd iterations, best of several restarts)
// ---------------------------------------------------------------------------

struct KMeansOptions {
    std::size_t max_iterations = 100;
    double tolerance = 1e-6;
    std::size_t restarts = 10;
};

struct KMeansResult {
    Matrix centroids;                  // k x d
    std::vector<std::size_t> assignment;
    std::vector<double> cluster_weight;
    double inertia = 0.0;
};

inline std::size_t count_distinct_rows(const Matrix& points) {
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index r = 0; r < points.rows(); ++r)
        rows.emplace_back(points.row(r).data(), points.row(r).data() + points.cols());
    std::sort(rows.begin(), rows.end());
    return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

namespace detail {

inline std::size_t nearest_centroid(const Matrix& centroids, const Eigen::RowVectorXd& x, double* dist2 = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double d = (centroids.row(c) - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::size_t>(c);
        }
    }
    if (dist2) *dist2 = best_d;
    return best;
}

inline std::size_t draw_proportional(const std::vector<double>& mass, Rng& rng) {
    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        if (mass[i] <= 0.0) continue;
        last_positive = i;
        if (target < mass[i]) return i;
        target -= mass[i];
    }
    return last_positive;
}

inline Matrix kmeans_plus_plus(const Matrix& points, const std::vector<double>& w, std::size_t k, Rng& rng) {
    const auto n = static_cast<std::size_t>(points.rows());
    Matrix centroids(static_cast<Eigen::Index>(k), points.cols());
    centroids.row(0) = points.row(static_cast<Eigen::Index>(draw_proportional(w, rng)));
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::vector<double> mass(n);
    for (std::size_t c = 1; c < k; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            d2[i] = std::min(d2[i], (points.row(row) - centroids.row(static_cast<Eigen::Index>(c - 1))).squaredNorm());
            mass[i] = w[i] * d2[i];
        }
        if (std::accumulate(mass.begin(), mass.end(), 0.0) <= 0.0) mass = d2;  // only zero-weight points left uncovered
        centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(draw_proportional(mass, rng)));
    }
    return centroids;
}

inline KMeansResult lloyd(const Matrix& points, const std::vector<double>& w, Matrix centroids,
                          const KMeansOptions& opt) {
    const auto n = static_cast<std::size_t>(points.rows());
    const auto k = static_cast<std::size_t>(centroids.rows());
    KMeansResult r;
    r.assignment.assign(n, 0);
    for (std::size_t iter = 0; iter < opt.max_iterations; ++iter) {
        for (std::size_t i = 0; i < n; ++i)
            r.assignment[i] = nearest_centroid(centroids, points.row(static_cast<Eigen::Index>(i)));
        Matrix next = Matrix::Zero(centroids.rows(), centroids.cols());
        Matrix plain = Matrix::Zero(centroids.rows(), centroids.cols());
        std::vector<double> mass(k, 0.0);
        std::vector<std::size_t> members(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<Eigen::Index>(r.assignment[i]);
            next.row(c) += w[i] * points.row(static_cast<Eigen::Index>(i));
            plain.row(c) += points.row(static_cast<Eigen::Index>(i));
            mass[r.assignment[i]] += w[i];
            ++members[r.assignment[i]];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const auto row = static_cast<Eigen::Index>(c);
            if (mass[c] > 0.0) next.row(row) /= mass[c];
            else if (members[c] > 0) next.row(row) = plain.row(row) / static_cast<double>(members[c]);
            else next.row(row) = centroids.row(row);  // empty cluster keeps its centre
            shift = std::max(shift, (next.row(row) - centroids.row(row)).norm());
        }
        centroids = std::move(next);
        if (shift <= opt.tolerance) break;
    }
    r.cluster_weight.assign(k, 0.0);
    r.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d2 = 0.0;
        r.assignment[i] = nearest_centroid(centroids, points.row(static_cast<Eigen::Index>(i)), &d2);
        r.cluster_weight[r.assignment[i]] += w[i];
        r.inertia += w[i] * d2;
    }
    r.centroids = std::move(centroids);
    return r;
}

}  // namespace detail

// Requires at least k distinct points. All-zero weights are treated as uniform.
inline KMeansResult weighted_kmeans(const Matrix& points, std::vector<double> weights, std::size_t k, Rng& rng,
                                    const KMeansOptions& opt = {}) {
    if (static_cast<std::size_t>(points.rows()) != weights.size()) throw ShapeError("weighted_kmeans: one weight per point");
    if (k == 0 || count_distinct_rows(points) < k) throw DomainError("weighted_kmeans: fewer distinct points than clusters");
    if (std::accumulate(weights.begin(), weights.end(), 0.0) <= 0.0) std::fill(weights.begin(), weights.end(), 1.0);
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (std::size_t run = 0; run < std::max<std::size_t>(opt.restarts, 1); ++run) {
        auto candidate = detail::lloyd(points, weights, detail::kmeans_plus_plus(points, weights, k, rng), opt);
        if (candidate.inertia < best.inertia) best = std::move(candidate);
    }
    return best;
}

// Centroids are visited by decreasing cluster weight (lower index on ties); each
// takes its nearest not-yet-taken point (lower id on ties).
inline std::vector<std::size_t> pick_nearest_distinct(const Matrix& points, std::span<const SampleId> ids,
                                                      const KMeansResult& km) {
    const auto k = static_cast<std::size_t>(km.centroids.rows());
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return km.cluster_weight[a] > km.cluster_weight[b]; });
    std::vector<bool> taken(static_cast<std::size_t>(points.rows()), false);
    std::vector<std::size_t> picks;
    for (std::size_t c : order) {
        std::size_t best = points.rows();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < taken.size(); ++i) {
            if (taken[i]) continue;
            const double d = (points.row(static_cast<Eigen::Index>(i)) - km.centroids.row(static_cast<Eigen::Index>(c))).squaredNorm();
            if (d < best_d || (d == best_d && ids[i] < ids[best])) {
                best_d = d;
                best = i;
            }
        }
        taken[best] = true;
        picks.push_back(best);
    }
    return picks;
}

// Diverse batch: keep the beta*B most probable failures, cluster them with
// failure-probability-weighted k-means (k = B) in normalized coordinates and
// take the candidate nearest each centroid.
inline SelectionResult select_dbal(const ScoredPool& scored, const DesignSpace& space, std::size_t batch,
                                   std::size_t beta, Rng& rng, const KMeansOptions& opt = {}) {
    scored.validate();
    if (batch == 0 || beta == 0) throw ConfigError("select_dbal: batch and beta must be >= 1");
    const std::size_t keep = batch * beta;
    if (scored.pool.size() < keep)
        throw CapacityError("select_dbal: pool of " + std::to_string(scored.pool.size()) + " cannot supply beta*B = " +
                            std::to_string(keep));
    const auto order = detail::rank_by_probability(scored);

    std::vector<Sample> filtered;
    std::vector<SampleId> ids;
    std::vector<double> weights;
    for (std::size_t k = 0; k < keep; ++k) {
        filtered.push_back(scored.pool.samples[order[k]]);
        ids.push_back(filtered.back().id);
        weights.push_back(scored.fail_prob[order[k]]);
    }
    const Matrix points = normalized_matrix(space, filtered);

    SelectionResult r;
    if (count_distinct_rows(points) < batch) {
        // degenerate geometry: plain top-B within the filtered set
        r.fallback_used = true;
        for (std::size_t k = 0; k < batch; ++k) r.selected.push_back(filtered[k]);
    } else {
        const auto km = weighted_kmeans(points, weights, batch, rng, opt);
        for (auto i : pick_nearest_distinct(points, ids, km)) r.selected.push_back(filtered[i]);
    }
    for (const auto& s : r.selected) r.fail_portion_ids.push_back(s.id);
    return r;
}

// ---------------------------------------------------------------------------
// Epsilon-weighted hybrid query
// ---------------------------------------------------------------------------

namespace detail {

struct ScoredSample {
    double prob;
    Sample sample;
};

inline bool more_likely_to_fail(const ScoredSample& a, const ScoredSample& b) {
    if (a.prob != b.prob) return a.prob > b.prob;
    return a.sample.id < b.sample.id;
}

// Shared core. `propose(round)` yields the next proposal pool or nullopt when
// the source is exhausted; `draw_rest(n, chosen)` yields n uniform samples
// whose ids avoid `chosen`.
template <class Propose, class DrawRest>
SelectionResult eps_hqs_core(const Mlp& teacher, const DesignSpace& space, std::size_t batch, double eps, Rng& rng,
                             std::size_t max_rounds, Propose&& propose, DrawRest&& draw_rest) {
    if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("select_eps_hqs: eps must satisfy 0 < eps <= 1");
    if (batch == 0) throw ConfigError("select_eps_hqs: batch must be >= 1");
    if (max_rounds == 0) throw ConfigError("select_eps_hqs: max_rounds must be >= 1");

    const std::size_t quota = failure_quota(eps, batch);
    SelectionResult r;
    std::unordered_set<SampleId> chosen;
    std::vector<ScoredSample> runners_up;  // best non-selected proposals, at most `quota`

    while (r.selected.size() < quota && r.resample_rounds < max_rounds) {
        std::optional<CandidatePool> proposals = propose(r.resample_rounds);
        if (!proposals) break;
        ++r.resample_rounds;
        const ScoredPool scored = score_pool(teacher, space, *proposals);

        std::vector<std::size_t> failing;
        for (std::size_t i = 0; i < scored.pool.size(); ++i) {
            if (scored.fail_prob[i] >= kFailureThreshold && !chosen.contains(scored.pool.samples[i].id))
                failing.push_back(i);
        }
        const std::size_t need = quota - r.selected.size();
        for (auto j : choose_without_replacement(failing.size(), std::min(need, failing.size()), rng)) {
            const Sample& s = scored.pool.samples[failing[j]];
            chosen.insert(s.id);
            r.selected.push_back(s);
            r.fail_portion_ids.push_back(s.id);
        }

        std::vector<ScoredSample> round_best;
        for (std::size_t i = 0; i < scored.pool.size(); ++i) {
            if (!chosen.contains(scored.pool.samples[i].id))
                round_best.push_back({scored.fail_prob[i], scored.pool.samples[i]});
        }
        const std::size_t keep_round = std::min(quota, round_best.size());
        std::partial_sort(round_best.begin(), round_best.begin() + static_cast<std::ptrdiff_t>(keep_round),
                          round_best.end(), more_likely_to_fail);
        round_best.resize(keep_round);
        runners_up.insert(runners_up.end(), std::make_move_iterator(round_best.begin()),
                          std::make_move_iterator(round_best.end()));
        std::sort(runners_up.begin(), runners_up.end(), more_likely_to_fail);
        std::erase_if(runners_up, [&](const ScoredSample& c) { return chosen.contains(c.sample.id); });
        if (runners_up.size() > quota) runners_up.resize(quota);
    }

    if (r.selected.size() < quota) {
        r.fallback_used = true;
        for (auto& c : runners_up) {
            if (r.selected.size() == quota) break;
            chosen.insert(c.sample.id);
            r.fail_portion_ids.push_back(c.sample.id);
            r.selected.push_back(std::move(c.sample));
        }
        if (r.selected.size() < quota)
            throw CapacityError("select_eps_hqs: proposals cannot fill the failure quota");
    }

    for (auto& s : draw_rest(batch - r.selected.size(), chosen)) {
        chosen.insert(s.id);
        r.selected.push_back(std::move(s));
    }
    return r;
}

}  // namespace detail

// Each round draws `proposal_size` uniform candidates, keeps those the teacher
// scores at >= 0.5 and adds random picks from them until round-half-up(eps*B)
// are chosen. After `max_rounds` the quota is topped up with the highest-scored
// proposals seen (fallback_used). The remaining B - quota samples are fresh
// uniform draws over the whole space.
inline SelectionResult select_eps_hqs(const Mlp& teacher, const DesignSpace& space, std::size_t batch, double eps,
                                      SampleStream& stream, std::size_t proposal_size, std::size_t max_rounds) {
    if (proposal_size == 0) throw ConfigError("select_eps_hqs: proposal_size must be >= 1");
    return detail::eps_hqs_core(
        teacher, space, batch, eps, stream.engine, max_rounds,
        [&](std::size_t) -> std::optional<CandidatePool> { return sample_uniform(space, proposal_size, stream); },
        [&](std::size_t n, const std::unordered_set<SampleId>&) {
            return n == 0 ? std::vector<Sample>{} : sample_uniform(space, n, stream).samples;
        });
}

// Finite-pool variant: the whole unlabeled pool is the single proposal and the
// uniform remainder is drawn from the pool minus the chosen samples.
inline SelectionResult select_eps_hqs(const Mlp& teacher, const DesignSpace& space, const CandidatePool& pool,
                                      std::size_t batch, double eps, Rng& rng) {
    if (pool.size() < batch)
        throw CapacityError("select_eps_hqs: pool of " + std::to_string(pool.size()) + " cannot supply " +
                            std::to_string(batch));
    return detail::eps_hqs_core(
        teacher, space, batch, eps, rng, 1,
        [&](std::size_t round) -> std::optional<CandidatePool> {
            if (round > 0) return std::nullopt;
            return pool;
        },
        [&](std::size_t n, const std::unordered_set<SampleId>& chosen) {
            std::vector<const Sample*> rest;
            for (const auto& s : pool.samples)
                if (!chosen.contains(s.id)) rest.push_back(&s);
            std::vector<Sample> out;
            for (auto i : detail::choose_without_replacement(rest.size(), n, rng)) out.push_back(*rest[i]);
            return out;
        });
}

}  // namespace epshqs
