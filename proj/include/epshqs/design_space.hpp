#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "random.hpp"

namespace epshqs {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Axis-aligned box [lower, upper] in R^d with a label per axis.
class DesignSpace {
public:
    DesignSpace(std::vector<double> lower, std::vector<double> upper,
                std::vector<std::string> names = {})
        : lower_(std::move(lower)), upper_(std::move(upper)), names_(std::move(names)) {
        if (lower_.empty()) throw ConfigError("design space needs at least one dimension");
        if (lower_.size() != upper_.size())
            throw ConfigError("design space bounds have different lengths");
        if (names_.empty()) {
            for (std::size_t i = 0; i < lower_.size(); ++i) names_.push_back("x" + std::to_string(i));
        }
        if (names_.size() != lower_.size()) throw ConfigError("design space needs one name per axis");
        for (std::size_t i = 0; i < lower_.size(); ++i) {
            if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) || !(lower_[i] < upper_[i]))
                throw ConfigError("design space axis " + names_[i] + " needs finite lower < upper");
        }
    }

    static DesignSpace unit_cube(std::size_t dim) {
        return DesignSpace(std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0));
    }

    std::size_t dim() const noexcept { return lower_.size(); }
    const std::vector<double>& lower() const noexcept { return lower_; }
    const std::vector<double>& upper() const noexcept { return upper_; }
    const std::vector<std::string>& names() const noexcept { return names_; }

    bool contains(std::span<const double> coords) const noexcept {
        if (coords.size() != dim()) return false;
        for (std::size_t i = 0; i < dim(); ++i) {
            if (!(coords[i] >= lower_[i] && coords[i] <= upper_[i])) return false;
        }
        return true;
    }

    friend bool operator==(const DesignSpace&, const DesignSpace&) = default;

private:
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<std::string> names_;
};

struct Sample {
    SampleId id = 0;
    std::vector<double> coords;

    friend bool operator==(const Sample&, const Sample&) = default;
};

enum class PoolOrigin { FiniteFile, OnTheFly };

struct CandidatePool {
    std::vector<Sample> samples;
    PoolOrigin origin = PoolOrigin::OnTheFly;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
};

inline bool ids_unique(std::span<const Sample> samples) {
    std::vector<SampleId> ids;
    ids.reserve(samples.size());
    for (const auto& s : samples) ids.push_back(s.id);
    std::sort(ids.begin(), ids.end());
    return std::adjacent_find(ids.begin(), ids.end()) == ids.end();
}

inline Sample draw_uniform_sample(const DesignSpace& space, SampleStream& stream) {
    Sample s;
    s.id = stream.take_id();
    s.coords.resize(space.dim());
    for (std::size_t i = 0; i < space.dim(); ++i) {
        std::uniform_real_distribution<double> axis(space.lower()[i], space.upper()[i]);
        s.coords[i] = axis(stream.engine);
    }
    return s;
}

// n i.i.d. uniform samples over the box; ids come from the stream's counter.
inline CandidatePool sample_uniform(const DesignSpace& space, std::size_t n, SampleStream& stream) {
    if (n == 0) throw ConfigError("sample_uniform requires n >= 1");
    CandidatePool pool;
    pool.origin = PoolOrigin::OnTheFly;
    pool.samples.reserve(n);
    for (std::size_t k = 0; k < n; ++k) pool.samples.push_back(draw_uniform_sample(space, stream));
    return pool;
}

inline std::vector<double> normalize(const DesignSpace& space, std::span<const double> coords) {
    if (coords.size() != space.dim())
        throw ShapeError("sample has " + std::to_string(coords.size()) + " coordinates, space has " +
                         std::to_string(space.dim()));
    if (!space.contains(coords)) throw DomainError("sample lies outside the design space");
    std::vector<double> out(space.dim());
    for (std::size_t i = 0; i < space.dim(); ++i) {
        out[i] = (coords[i] - space.lower()[i]) / (space.upper()[i] - space.lower()[i]);
    }
    return out;
}

inline std::vector<double> normalize(const DesignSpace& space, const Sample& s) {
    return normalize(space, std::span<const double>(s.coords));
}

inline std::vector<double> denormalize(const DesignSpace& space, std::span<const double> unit) {
    if (unit.size() != space.dim()) throw ShapeError("normalized vector has wrong dimension");
    std::vector<double> out(space.dim());
    for (std::size_t i = 0; i < space.dim(); ++i) {
        out[i] = space.lower()[i] + unit[i] * (space.upper()[i] - space.lower()[i]);
    }
    return out;
}

// Row i = normalize(samples[i]); the layout every network consumes.
inline Matrix normalized_matrix(const DesignSpace& space, std::span<const Sample> samples) {
    Matrix m(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(space.dim()));
    for (std::size_t r = 0; r < samples.size(); ++r) {
        auto row = normalize(space, samples[r]);
        for (std::size_t c = 0; c < row.size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
    return m;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::vector<double> parse_row(std::string_view line, std::size_t line_no) {
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        auto tok = trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                           : comma - start));
        double v = 0.0;
        const auto* first = tok.data();
        const auto* last = tok.data() + tok.size();
        if (!tok.empty() && *first == '+') ++first;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (tok.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
            throw ParseError(line_no, "not a finite number: '" + std::string(tok) + "'");
        row.push_back(v);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return row;
}

}  // namespace detail

// Comma-separated rows, no header; ids are 0-based row indices. Blank lines are skipped.
inline CandidatePool load_pool(const std::string& path,
                               std::optional<std::size_t> expected_dim = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pool file: " + path);
    CandidatePool pool;
    pool.origin = PoolOrigin::FiniteFile;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto row = detail::parse_row(line, line_no);
        const std::size_t width = expected_dim.value_or(pool.empty() ? row.size()
                                                                     : pool.samples.front().coords.size());
        if (row.size() != width)
            throw SchemaError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                              " columns, found " + std::to_string(row.size()));
        pool.samples.push_back(Sample{static_cast<SampleId>(pool.samples.size()), std::move(row)});
    }
    return pool;
}

inline CandidatePool load_pool(const std::string& path, const DesignSpace& space) {
    auto pool = load_pool(path, space.dim());
    for (const auto& s : pool.samples) {
        if (!space.contains(s.coords))
            throw DomainError("pool row " + std::to_string(s.id) + " lies outside the design space");
    }
    return pool;
}

}  // namespace epshqs
