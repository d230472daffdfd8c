#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"

namespace epshqs {

// Below this |target| the relative band collapses, so an absolute one applies.
inline constexpr double kZeroTargetCutoff = 1e-9;
inline constexpr double kZeroTargetAbsFloor = 1e-6;

// |pred - target| <= tol * |target|, or <= 1e-6 when the target is ~0.
inline bool within_band(double pred, double target, double tol) {
    const double err = std::abs(pred - target);
    if (std::abs(target) < kZeroTargetCutoff) return err <= kZeroTargetAbsFloor;
    return err <= tol * std::abs(target);
}

// Fraction of predictions inside the +-tol relative band (higher is better).
// Some descriptions of this metric call it the fraction "out of" acceptable
// accuracy; the quantity computed here is the within-band fraction
// sum_i 1(|y_i - y*_i| <= tol |y*_i|) / T.
inline double hit_rate(std::span<const double> preds, std::span<const double> targets, double tol) {
    if (preds.size() != targets.size() || preds.empty())
        throw ShapeError("hit_rate: predictions and targets must have equal nonzero length");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += within_band(preds[i], targets[i], tol) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

struct CurvePoint {
    double budget_used = 0.0;
    double mean_hit_rate = 0.0;
    double std_hit_rate = 0.0;
};

// Smallest budget at which the curve reaches `level`, interpolating linearly
// between neighbouring points; nullopt if it never does.
inline std::optional<double> budget_to_reach(std::span<const CurvePoint> curve, double level) {
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (curve[i].mean_hit_rate < level) continue;
        if (i == 0) return curve[0].budget_used;
        const auto& a = curve[i - 1];
        const auto& b = curve[i];
        const double frac = (level - a.mean_hit_rate) / (b.mean_hit_rate - a.mean_hit_rate);
        return a.budget_used + frac * (b.budget_used - a.budget_used);
    }
    return std::nullopt;
}

// Relative labelling budget saved by `curve` to match the baseline's final
// accuracy: 1 - b / b_base, where b is when `curve` first reaches that level
// and b_base is when the baseline itself first reaches it (its final budget
// for a monotone baseline).
inline std::optional<double> sample_savings(std::span<const CurvePoint> curve, std::span<const CurvePoint> base) {
    if (curve.empty() || base.empty()) return std::nullopt;
    const double target = base.back().mean_hit_rate;
    const auto b = budget_to_reach(curve, target);
    if (!b) return std::nullopt;
    const double b_base = budget_to_reach(base, target).value_or(base.back().budget_used);
    return 1.0 - *b / b_base;
}

// Hours of simulation avoided net of the teacher's training/inference overhead.
inline double time_saved(double savings, double base_budget, double sim_cost_seconds, double overhead_seconds) {
    if (!(savings >= 0.0 && savings <= 1.0)) throw DomainError("time_saved: savings must lie in [0,1]");
    return (savings * base_budget * sim_cost_seconds - overhead_seconds) / 3600.0;
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

// Population (ddof = 0) statistics.
inline MeanStd mean_std(std::span<const double> xs) {
    MeanStd r;
    if (xs.empty()) return r;
    for (double x : xs) r.mean += x;
    r.mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(xs.size()));
    return r;
}

}  // namespace epshqs
