#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "epshqs/design_space.hpp"

using namespace epshqs;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
    auto p = std::filesystem::temp_directory_path() / ("epshqs_" + name);
    std::ofstream(p) << body;
    return p;
}

}  // namespace

TEST(DesignSpace, RejectsDegenerateOrMismatchedBounds) {
    EXPECT_THROW(DesignSpace({1.0, 0.0}, {1.0, 1.0}), ConfigError);
    EXPECT_THROW(DesignSpace({2.0}, {1.0}), ConfigError);
    EXPECT_THROW(DesignSpace({0.0, 0.0}, {1.0}), ConfigError);
    EXPECT_THROW(DesignSpace({0.0}, {1.0}, {"a", "b"}), ConfigError);
    EXPECT_THROW(DesignSpace({}, {}), ConfigError);
    EXPECT_NO_THROW(DesignSpace({-5.0, 0.0}, {10.0, 15.0}));
}

TEST(SampleUniform, DeterministicAndInBounds) {
    const auto space = DesignSpace::unit_cube(2);
    SampleStream a(7), b(7);
    const auto pa = sample_uniform(space, 3, a);
    const auto pb = sample_uniform(space, 3, b);
    ASSERT_EQ(pa.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(pa.samples[i], pb.samples[i]);
        EXPECT_EQ(pa.samples[i].id, static_cast<SampleId>(i));
        EXPECT_TRUE(space.contains(pa.samples[i].coords));
    }
    EXPECT_EQ(pa.origin, PoolOrigin::OnTheFly);
}

TEST(SampleUniform, IdsContinueFromStreamCounter) {
    const auto space = DesignSpace::unit_cube(1);
    SampleStream s(1, 100);
    sample_uniform(space, 4, s);
    const auto next = sample_uniform(space, 2, s);
    EXPECT_EQ(next.samples[0].id, 104);
    EXPECT_EQ(next.samples[1].id, 105);
}

TEST(SampleUniform, RejectsZeroCount) {
    SampleStream s(1);
    EXPECT_THROW(sample_uniform(DesignSpace::unit_cube(1), 0, s), ConfigError);
}

// Mean of U(lo, hi) is (lo+hi)/2 with standard error (hi-lo)/sqrt(12 n).
TEST(SampleUniform, BraninBoxMomentsMatchUniformLaw) {
    const DesignSpace space({-5.0, 0.0}, {5.0, 15.0});
    SampleStream s(2024);
    const std::size_t n = 1000;
    const auto pool = sample_uniform(space, n, s);
    for (std::size_t axis = 0; axis < 2; ++axis) {
        double mean = 0.0, lo = 1e300, hi = -1e300;
        for (const auto& x : pool.samples) {
            mean += x.coords[axis];
            lo = std::min(lo, x.coords[axis]);
            hi = std::max(hi, x.coords[axis]);
        }
        mean /= static_cast<double>(n);
        const double width = space.upper()[axis] - space.lower()[axis];
        const double se = width / std::sqrt(12.0 * static_cast<double>(n));
        EXPECT_GE(lo, space.lower()[axis]);
        EXPECT_LE(hi, space.upper()[axis]);
        EXPECT_NEAR(mean, 0.5 * (space.lower()[axis] + space.upper()[axis]), 3.0 * se);
    }
}

TEST(SampleUniform, PropertyEverySeedStaysInsideAndSeedsDiffer) {
    const DesignSpace space({-1.0, 2.0, 100.0}, {1.0, 3.0, 1000.0});
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        SampleStream s(seed), t(seed + 1);
        const auto p = sample_uniform(space, 25, s);
        const auto q = sample_uniform(space, 25, t);
        bool differs = false;
        for (std::size_t i = 0; i < p.size(); ++i) {
            ASSERT_TRUE(space.contains(p.samples[i].coords)) << "seed " << seed;
            differs = differs || p.samples[i].coords != q.samples[i].coords;
        }
        EXPECT_TRUE(differs) << "seed " << seed;
        EXPECT_TRUE(ids_unique(p.samples));
    }
}

TEST(Normalize, HandValuesAndBoundaries) {
    const DesignSpace space({0.0}, {10.0});
    EXPECT_DOUBLE_EQ(normalize(space, Sample{0, {5.0}})[0], 0.5);
    EXPECT_DOUBLE_EQ(normalize(space, Sample{0, {0.0}})[0], 0.0);
    EXPECT_DOUBLE_EQ(normalize(space, Sample{0, {10.0}})[0], 1.0);
}

TEST(Normalize, OutOfBoundsAndWrongWidthAreErrors) {
    const DesignSpace space({0.0, 0.0}, {1.0, 1.0});
    EXPECT_THROW(normalize(space, Sample{0, {1.5, 0.5}}), DomainError);
    EXPECT_THROW(normalize(space, Sample{0, {0.5}}), ShapeError);
}

TEST(Normalize, RoundTripIsIdentityOnTenThousandSamples) {
    const DesignSpace space({0.2, 0.005, 0.5, 100.0}, {1.0, 0.05, 3.0, 1000.0});
    SampleStream s(99);
    const auto pool = sample_uniform(space, 10000, s);
    for (const auto& x : pool.samples) {
        const auto back = denormalize(space, normalize(space, x));
        for (std::size_t i = 0; i < x.coords.size(); ++i) {
            const double rel = std::abs(back[i] - x.coords[i]) / std::max(std::abs(x.coords[i]), 1e-300);
            ASSERT_LE(rel, 1e-12);
        }
    }
}

TEST(NormalizedMatrix, RowsMatchPerSampleNormalize) {
    const DesignSpace space({-5.0, 0.0}, {10.0, 15.0});
    SampleStream s(3);
    const auto pool = sample_uniform(space, 17, s);
    const Matrix m = normalized_matrix(space, pool.samples);
    ASSERT_EQ(m.rows(), 17);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const auto row = normalize(space, pool.samples[static_cast<std::size_t>(r)]);
        EXPECT_EQ(m(r, 0), row[0]);
        EXPECT_EQ(m(r, 1), row[1]);
    }
}

TEST(LoadPool, ThreeRowsGetRowIndexIds) {
    const auto p = write_temp("three.csv", "0.1,0.2\n0.3, 0.4\n0.5,0.6\n");
    const auto pool = load_pool(p.string(), std::size_t{2});
    ASSERT_EQ(pool.size(), 3u);
    EXPECT_EQ(pool.origin, PoolOrigin::FiniteFile);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(pool.samples[i].id, static_cast<SampleId>(i));
    EXPECT_DOUBLE_EQ(pool.samples[1].coords[1], 0.4);
}

TEST(LoadPool, EmptyFileIsAnEmptyPool) {
    const auto p = write_temp("empty.csv", "");
    const auto pool = load_pool(p.string());
    EXPECT_TRUE(pool.empty());
}

TEST(LoadPool, NonNumericTokenNamesTheLine) {
    const auto p = write_temp("bad.csv", "0.1,0.2\n0.3,abc\n");
    try {
        load_pool(p.string(), std::size_t{2});
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(LoadPool, WidthMismatchIsSchemaError) {
    const auto p = write_temp("wide.csv", "0.1,0.2,0.3\n");
    EXPECT_THROW(load_pool(p.string(), std::size_t{2}), SchemaError);
    const auto q = write_temp("ragged.csv", "0.1,0.2\n0.3\n");
    EXPECT_THROW(load_pool(q.string()), SchemaError);
}

TEST(LoadPool, SpaceOverloadChecksMembership) {
    const auto p = write_temp("outside.csv", "0.1,0.2\n1.3,0.4\n");
    EXPECT_THROW(load_pool(p.string(), DesignSpace::unit_cube(2)), DomainError);
}
