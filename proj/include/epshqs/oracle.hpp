#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "design_space.hpp"
#include "errors.hpp"

namespace epshqs {

enum class OracleKind { Branin2, Hartmann6, StyblinskiTangD, VesselStress4 };

// Analytic stand-in for an expensive simulator. sim_cost_seconds is only
// accumulated for bookkeeping; nothing sleeps.
struct OracleSpec {
    OracleKind kind = OracleKind::Branin2;
    std::size_t dim = 2;
    double sim_cost_seconds = 1.0;

    static OracleSpec branin() { return {OracleKind::Branin2, 2, 1.0}; }
    static OracleSpec hartmann6() { return {OracleKind::Hartmann6, 6, 1.0}; }
    static OracleSpec styblinski_tang(std::size_t d) { return {OracleKind::StyblinskiTangD, d, 0.5}; }
    static OracleSpec vessel_stress() { return {OracleKind::VesselStress4, 4, 202.0}; }

    void validate() const {
        if (!(sim_cost_seconds >= 0.0) || !std::isfinite(sim_cost_seconds))
            throw ConfigError("oracle sim_cost_seconds must be finite and non-negative");
        switch (kind) {
            case OracleKind::Branin2:
                if (dim != 2) throw ConfigError("branin2 is two-dimensional");
                break;
            case OracleKind::Hartmann6:
                if (dim != 6) throw ConfigError("hartmann6 is six-dimensional");
                break;
            case OracleKind::VesselStress4:
                if (dim != 4) throw ConfigError("vessel_stress4 is four-dimensional");
                break;
            case OracleKind::StyblinskiTangD:
                if (dim < 1) throw ConfigError("styblinski_tang needs dim >= 1");
                break;
        }
    }
};

struct Evaluation {
    SampleId sample_id = 0;
    double y_star = 0.0;
    double cost_charged = 0.0;
};

inline std::string oracle_name(OracleKind kind) {
    switch (kind) {
        case OracleKind::Branin2: return "branin2";
        case OracleKind::Hartmann6: return "hartmann6";
        case OracleKind::StyblinskiTangD: return "styblinski_tang";
        case OracleKind::VesselStress4: return "vessel_stress4";
    }
    return "unknown";
}

inline std::optional<OracleKind> parse_oracle_kind(const std::string& name) {
    if (name == "branin2" || name == "branin") return OracleKind::Branin2;
    if (name == "hartmann6") return OracleKind::Hartmann6;
    if (name == "styblinski_tang" || name == "styblinski_tang_d") return OracleKind::StyblinskiTangD;
    if (name == "vessel_stress4" || name == "vessel_stress") return OracleKind::VesselStress4;
    return std::nullopt;
}

// Canonical input box of each oracle.
inline DesignSpace oracle_space(const OracleSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case OracleKind::Branin2:
            return DesignSpace({-5.0, 0.0}, {10.0, 15.0}, {"x1", "x2"});
        case OracleKind::Hartmann6:
            return DesignSpace(std::vector<double>(6, 0.0), std::vector<double>(6, 1.0));
        case OracleKind::StyblinskiTangD:
            return DesignSpace(std::vector<double>(spec.dim, -5.0), std::vector<double>(spec.dim, 5.0));
        case OracleKind::VesselStress4:
            return DesignSpace({0.2, 0.005, 0.5, 100.0}, {1.0, 0.05, 3.0, 1000.0},
                               {"inner_radius_m", "wall_thickness_m", "length_m", "depth_m"});
    }
    throw ConfigError("unknown oracle kind");
}

namespace functions {

inline double branin(double x1, double x2) {
    constexpr double pi = std::numbers::pi;
    constexpr double b = 5.1 / (4.0 * pi * pi);
    constexpr double c = 5.0 / pi;
    constexpr double t = 1.0 / (8.0 * pi);
    const double q = x2 - b * x1 * x1 + c * x1 - 6.0;
    return q * q + 10.0 * (1.0 - t) * std::cos(x1) + 10.0;
}

inline double hartmann6(std::span<const double> x) {
    static constexpr std::array<double, 4> alpha{1.0, 1.2, 3.0, 3.2};
    static constexpr double a[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                       {0.05, 10, 17, 0.1, 8, 14},
                                       {3, 3.5, 1.7, 10, 17, 8},
                                       {17, 8, 0.05, 10, 0.1, 14}};
    static constexpr double p[4][6] = {{0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
                                       {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
                                       {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
                                       {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}};
    double outer = 0.0;
    for (int i = 0; i < 4; ++i) {
        double inner = 0.0;
        for (int j = 0; j < 6; ++j) inner += a[i][j] * (x[j] - p[i][j]) * (x[j] - p[i][j]);
        outer += alpha[i] * std::exp(-inner);
    }
    return -outer;
}

inline double styblinski_tang(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v * v * v - 16.0 * v * v + 5.0 * v;
    return 0.5 * s;
}

// Thin-wall hoop stress rho*g*D*r/t with a mild radius/length modulation.
inline double vessel_stress(double radius, double thickness, double length, double depth) {
    constexpr double rho = 1025.0;
    constexpr double g = 9.81;
    const double pressure = rho * g * depth;
    return pressure * radius / thickness *
           (1.0 + 0.25 * std::sin(4.0 * std::numbers::pi * radius) * std::exp(-length));
}

}  // namespace functions

inline double oracle_value(const OracleSpec& spec, std::span<const double> x) {
    switch (spec.kind) {
        case OracleKind::Branin2: return functions::branin(x[0], x[1]);
        case OracleKind::Hartmann6: return functions::hartmann6(x);
        case OracleKind::StyblinskiTangD: return functions::styblinski_tang(x);
        case OracleKind::VesselStress4: return functions::vessel_stress(x[0], x[1], x[2], x[3]);
    }
    throw ConfigError("unknown oracle kind");
}

inline Evaluation evaluate(const OracleSpec& spec, const Sample& s) {
    const DesignSpace box = oracle_space(spec);
    if (s.coords.size() != box.dim())
        throw ShapeError("sample " + std::to_string(s.id) + " has wrong dimension for " + oracle_name(spec.kind));
    if (!box.contains(s.coords))
        throw DomainError("sample " + std::to_string(s.id) + " lies outside the " + oracle_name(spec.kind) + " box");
    const double y = oracle_value(spec, s.coords);
    if (!std::isfinite(y)) throw DomainError("oracle produced a non-finite value for sample " + std::to_string(s.id));
    return Evaluation{s.id, y, spec.sim_cost_seconds};
}

// Validates every sample before evaluating any; output order follows input order.
inline std::vector<Evaluation> evaluate_batch(const OracleSpec& spec, std::span<const Sample> samples) {
    const DesignSpace box = oracle_space(spec);
    for (const auto& s : samples) {
        if (s.coords.size() != box.dim() || !box.contains(s.coords))
            throw DomainError("sample " + std::to_string(s.id) + " lies outside the " + oracle_name(spec.kind) + " box");
    }
    std::vector<Evaluation> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(evaluate(spec, s));
    return out;
}

inline std::vector<Evaluation> evaluate_batch(const OracleSpec& spec, const CandidatePool& pool) {
    return evaluate_batch(spec, std::span<const Sample>(pool.samples));
}

inline double total_cost(std::span<const Evaluation> evals) {
    double c = 0.0;
    for (const auto& e : evals) c += e.cost_charged;
    return c;
}

// Human-readable box and formula reference for the `describe` command.
inline std::string describe_oracle(const OracleSpec& spec) {
    const DesignSpace box = oracle_space(spec);
    std::string out = oracle_name(spec.kind) + " (dim " + std::to_string(spec.dim) + ")\n";
    switch (spec.kind) {
        case OracleKind::Branin2:
            out += "  f(x) = (x2 - 5.1/(4 pi^2) x1^2 + 5/pi x1 - 6)^2 + 10 (1 - 1/(8 pi)) cos(x1) + 10\n"
                   "  Branin-Hoo test function; global minimum 0.397887\n";
            break;
        case OracleKind::Hartmann6:
            out += "  f(x) = -sum_i alpha_i exp(-sum_j A_ij (x_j - P_ij)^2)\n"
                   "  six-dimensional Hartmann function; global minimum -3.32237\n";
            break;
        case OracleKind::StyblinskiTangD:
            out += "  f(x) = 0.5 sum_i (x_i^4 - 16 x_i^2 + 5 x_i)\n"
                   "  Styblinski-Tang function; minimum -39.16617 d at x_i = -2.903534\n";
            break;
        case OracleKind::VesselStress4:
            out += "  sigma = (rho g D) r / t * (1 + 0.25 sin(4 pi r) exp(-L)), rho = 1025, g = 9.81\n"
                   "  thin-wall hoop stress proxy for a pressure-vessel FEA study [Pa]\n";
            break;
    }
    for (std::size_t i = 0; i < box.dim(); ++i) {
        out += "  " + box.names()[i] + " in [" + std::to_string(box.lower()[i]) + ", " +
               std::to_string(box.upper()[i]) + "]\n";
    }
    out += "  simulated cost per evaluation: " + std::to_string(spec.sim_cost_seconds) + " s\n";
    return out;
}

}  // namespace epshqs
