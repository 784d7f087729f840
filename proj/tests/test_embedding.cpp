#include <gtest/gtest.h>

#include <cmath>

#include "sketchlab/embedding.hpp"
#include "sketchlab/geometry.hpp"

using namespace sketchlab;
using core::derive_stream;
using core::make_sketch;
using core::SketchEntries;
using core::SketchMatrix;
using geometry::Vector;
using geometry::VectorSet;

TEST(CheckRip, IdentityAndScaledSketch) {
    const int d = 8;
    const auto set = geometry::random_unit_vectors(d, 5, derive_stream(51, 1));
    const auto eye = SketchMatrix::from_entries(SketchEntries::Identity(d, d));
    const auto report = embedding::check_rip(eye, set, 0.5);
    EXPECT_DOUBLE_EQ(report.max_norm_distortion, 0.0);
    EXPECT_TRUE(report.passed);

    // ||2u||^2 = 4 ||u||^2: normalized distortion is exactly 3.
    const auto doubled =
        SketchMatrix::from_entries(SketchEntries(2.0 * SketchEntries::Identity(d, d)));
    const auto bad = embedding::check_rip(doubled, set, 1.0);
    EXPECT_NEAR(bad.max_norm_distortion, 3.0, 1e-12);
    EXPECT_FALSE(bad.passed);
}

TEST(CheckRip, ZeroVectorsSkippedOrRejected) {
    const int d = 4;
    std::vector<Vector> elems = {Vector::Zero(d)};
    const auto eye = SketchMatrix::from_entries(SketchEntries::Identity(d, d));
    EXPECT_THROW(embedding::check_rip(eye, VectorSet(elems), 0.5),
                 std::invalid_argument);
    Vector unit = Vector::Zero(d);
    unit[0] = 1.0;
    elems.push_back(unit);
    const auto report = embedding::check_rip(eye, VectorSet(elems), 0.5);
    EXPECT_EQ(report.n_skipped, 1u);
    EXPECT_TRUE(report.passed);
}

TEST(CheckRip, ScaleInvarianceOfDistortion) {
    const int d = 16;
    const auto s = make_sketch(8, d, derive_stream(51, 2));
    const auto set = geometry::random_unit_vectors(d, 3, derive_stream(51, 3));
    std::vector<Vector> scaled;
    for (const auto& v : set.elements) scaled.push_back(4.0 * v);
    const auto a = embedding::check_rip(s, set, 1.0);
    const auto b = embedding::check_rip(s, VectorSet(scaled), 1.0);
    EXPECT_DOUBLE_EQ(a.max_norm_distortion, b.max_norm_distortion);
}

TEST(CheckRip, EpsValidation) {
    const auto s = make_sketch(4, 4, derive_stream(51, 4));
    const auto set = geometry::random_unit_vectors(4, 2, derive_stream(51, 5));
    EXPECT_THROW(embedding::check_rip(s, set, 0.0), std::invalid_argument);
    EXPECT_THROW(embedding::check_rip(s, set, 1.5), std::invalid_argument);
}

TEST(CheckInnerProducts, IdentityAndDiagonalEqualsRip) {
    const int d = 12;
    const auto eye = SketchMatrix::from_entries(SketchEntries::Identity(d, d));
    const auto set = geometry::random_unit_vectors(d, 4, derive_stream(52, 1));
    const auto report = embedding::check_inner_products(eye, set, set, 0.3);
    EXPECT_DOUBLE_EQ(report.max_inner_distortion, 0.0);
    EXPECT_TRUE(report.passed);

    // With U = V = {u}, the pair distortion is the norm distortion of u.
    const auto s = make_sketch(6, d, derive_stream(52, 2));
    const VectorSet single({set.elements[0]});
    const auto inner = embedding::check_inner_products(s, single, single, 1.0);
    const auto rip = embedding::check_rip(s, single, 1.0);
    EXPECT_DOUBLE_EQ(inner.max_inner_distortion, rip.max_norm_distortion);
}

TEST(CheckInnerProducts, DimensionMismatch) {
    const auto s = make_sketch(4, 8, derive_stream(52, 3));
    const auto u = geometry::random_unit_vectors(8, 2, derive_stream(52, 4));
    const auto v = geometry::random_unit_vectors(6, 2, derive_stream(52, 5));
    EXPECT_THROW(embedding::check_inner_products(s, u, v, 0.5),
                 std::invalid_argument);
}

TEST(JltRequiredDim, ClosedFormValues) {
    EXPECT_EQ(embedding::jlt_required_dim(0.25, 64, 8.0), 533);
    EXPECT_EQ(embedding::jlt_required_dim(1.0, 3, 1.0), 2);  // ceil(ln 3)
    // Halving eps quadruples the requirement (before ceiling).
    const int b1 = embedding::jlt_required_dim(0.5, 1024, 2.0);
    const int b2 = embedding::jlt_required_dim(0.25, 1024, 2.0);
    EXPECT_NEAR(static_cast<double>(b2) / static_cast<double>(b1), 4.0, 0.05);
    EXPECT_THROW(embedding::jlt_required_dim(0.5, 1, 1.0), std::invalid_argument);
}

TEST(InnerRequiredDim, ClosedFormValues) {
    const double w32 = std::sqrt(2.0 * std::log(32.0));
    const int b = embedding::inner_required_dim(0.3, w32, w32, 1.0);
    EXPECT_EQ(b, static_cast<int>(std::ceil((2.0 * w32) * (2.0 * w32) / 0.09)));
    EXPECT_EQ(embedding::inner_required_dim(1.0, 1.0, 0.0, 1.0), 1);
    EXPECT_EQ(embedding::inner_required_dim(0.5, 0.0, 0.0, 1.0), 1);
    // Doubling both widths quadruples the requirement.
    const int b1 = embedding::inner_required_dim(0.5, 1.0, 1.0, 3.0);
    const int b2 = embedding::inner_required_dim(0.5, 2.0, 2.0, 3.0);
    EXPECT_EQ(b2, 4 * b1);
}

TEST(PassRate, NondecreasingInSketchDim) {
    const int d = 64;
    const auto set = geometry::random_unit_vectors(d, 8, derive_stream(53, 1));
    const double eps = 0.5;
    const int trials = 60;
    std::vector<double> rates;
    for (int b : {4, 16, 64, 256}) {
        int passed = 0;
        for (int i = 0; i < trials; ++i) {
            // Shared per-trial seeds across the b grid.
            const auto s = make_sketch(b, d, derive_stream(53, 100 + i));
            passed += embedding::check_rip(s, set, eps).passed ? 1 : 0;
        }
        rates.push_back(static_cast<double>(passed) / trials);
    }
    for (std::size_t i = 1; i < rates.size(); ++i) EXPECT_GE(rates[i], rates[i - 1]);
    EXPECT_GT(rates.back(), 0.9);
}
