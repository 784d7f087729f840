#include <gtest/gtest.h>

#include <cmath>

#include "sketchlab/random.hpp"
#include "sketchlab/stats.hpp"

using namespace sketchlab;
using core::DistributionKind;
using core::derive_stream;
using core::sample_subgaussian;

TEST(DeriveStream, SameInputsSameSequence) {
    const auto a = sample_subgaussian(derive_stream(42, 0),
                                      DistributionKind::gaussian_unit, 100);
    const auto b = sample_subgaussian(derive_stream(42, 0),
                                      DistributionKind::gaussian_unit, 100);
    EXPECT_EQ(a, b);
}

TEST(DeriveStream, DistinctStreamsDecorrelated) {
    const std::size_t n = 10000;
    const auto a =
        sample_subgaussian(derive_stream(42, 0), DistributionKind::gaussian_unit, n);
    const auto b =
        sample_subgaussian(derive_stream(42, 1), DistributionKind::gaussian_unit, n);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    EXPECT_LT(std::abs(dot / std::sqrt(na * nb)), 0.05);
}

TEST(DeriveStream, DifferentMasterSeedDiffers) {
    const auto a = sample_subgaussian(derive_stream(42, 0),
                                      DistributionKind::gaussian_unit, 16);
    const auto b = sample_subgaussian(derive_stream(43, 0),
                                      DistributionKind::gaussian_unit, 16);
    EXPECT_NE(a, b);
}

TEST(SampleSubgaussian, RademacherMomentsAndSupport) {
    const std::size_t n = 100000;
    const auto xs =
        sample_subgaussian(derive_stream(7, 3), DistributionKind::rademacher, n);
    for (double x : xs) ASSERT_TRUE(x == 1.0 || x == -1.0);
    EXPECT_LT(std::abs(stats::mean(xs)), 3.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(stats::sample_variance(xs), 1.0, 0.05);
}

TEST(SampleSubgaussian, GaussianTailFraction) {
    const std::size_t n = 100000;
    const auto xs =
        sample_subgaussian(derive_stream(7, 4), DistributionKind::gaussian_unit, n);
    std::size_t tail = 0;
    for (double x : xs) tail += std::abs(x) > 3.0 ? 1 : 0;
    const double frac = static_cast<double>(tail) / static_cast<double>(n);
    EXPECT_GE(frac, 0.001);  // 2 Phi(-3) is about 0.0027
    EXPECT_LE(frac, 0.005);
}

TEST(SampleSubgaussian, GaussianMomentsTight) {
    const std::size_t n = 200000;
    const auto xs =
        sample_subgaussian(derive_stream(7, 5), DistributionKind::gaussian_unit, n);
    EXPECT_LT(std::abs(stats::mean(xs)), 4.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(stats::sample_variance(xs), 1.0, 0.02);
}

TEST(SampleSubgaussian, ZeroLengthRejected) {
    EXPECT_THROW(
        sample_subgaussian(derive_stream(1, 1), DistributionKind::rademacher, 0),
        std::invalid_argument);
}

TEST(SampleSubgaussian, RademacherSmall) {
    const auto xs =
        sample_subgaussian(derive_stream(9, 9), DistributionKind::rademacher, 4);
    ASSERT_EQ(xs.size(), 4u);
    for (double x : xs) EXPECT_TRUE(x == 1.0 || x == -1.0);
}

TEST(Substream, SaltSeparatesConsumers) {
    const auto base = derive_stream(11, 2);
    const auto s1 = core::substream(base, core::salt::sketch, 5);
    const auto s2 = core::substream(base, core::salt::env_noise, 5);
    EXPECT_NE(s1.stream_index, s2.stream_index);
    EXPECT_EQ(s1.master_seed, base.master_seed);
    const auto again = core::substream(base, core::salt::sketch, 5);
    EXPECT_EQ(s1.stream_index, again.stream_index);
}

TEST(Ziggurat, QuantileSanity) {
    // Median of |x| for a standard normal is about 0.6745.
    const std::size_t n = 200000;
    const auto xs =
        sample_subgaussian(derive_stream(21, 0), DistributionKind::gaussian_unit, n);
    std::vector<double> abs(xs.size());
    for (std::size_t i = 0; i < n; ++i) abs[i] = std::abs(xs[i]);
    EXPECT_NEAR(stats::median(abs), 0.6745, 0.01);
    std::size_t above2 = 0;
    for (double x : xs) above2 += std::abs(x) > 2.0 ? 1 : 0;
    EXPECT_NEAR(static_cast<double>(above2) / static_cast<double>(n), 0.0455, 0.004);
}
