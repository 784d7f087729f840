#include <gtest/gtest.h>

#include <cmath>

#include "sketchlab/experiments.hpp"
#include "sketchlab/fedsim.hpp"

using namespace sketchlab;
using core::derive_stream;
using core::SketchEntries;
using fedsim::FedConfig;
using fedsim::QuadLossModel;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace {

QuadLossModel simple_model(int d, int clients, double offset_scale,
                           uint64_t seed = 900) {
    return cli::make_fed_model(d, clients, 1.0, 1.2, offset_scale,
                               derive_stream(seed, 0));
}

}  // namespace

TEST(QuadLossModel, MuKappaAndMinimum) {
    const auto model = simple_model(8, 3, 0.2);
    EXPECT_NEAR(model.mu(), 1.0, 1e-12);
    EXPECT_GT(model.kappa(), 1.0);
    const Vector argmin = model.minimizer();
    EXPECT_LT(model.grad(argmin).norm(), 1e-12);
    // PL at a few probe points: ||grad||^2 >= 2 mu (L - L*).
    core::Xoshiro256 gen(derive_stream(901, 0));
    for (int rep = 0; rep < 10; ++rep) {
        Vector theta(8);
        for (int i = 0; i < 8; ++i) theta[i] = gen.next_gaussian();
        const double lhs = model.grad(theta).squaredNorm();
        const double rhs = 2.0 * model.mu() * (model.loss(theta) - model.loss_min());
        EXPECT_GE(lhs, rhs - 1e-9);
    }
}

TEST(RunSketchDl, OneStepConvergenceOnIsotropicLoss) {
    // C=1, K=1, H=I, unit rates, identity sketch: one exact GD step to theta*.
    const int d = 6;
    Vector star(d);
    star << 1, -2, 0.5, 3, -1, 2;
    QuadLossModel model(Matrix::Identity(d, d), star, {Vector::Zero(d)});
    FedConfig cfg;
    cfg.clients = 1;
    cfg.local_steps = 1;
    cfg.rounds = 1;
    cfg.sketch_dim = d;
    cfg.eta_local = 1.0;
    cfg.eta_global = 1.0;
    cfg.master_seed = 1;
    const auto trace =
        fedsim::run_sketch_dl_with(cfg, model, SketchEntries::Identity(d, d));
    ASSERT_EQ(trace.rounds.size(), 2u);  // initial record + one round
    EXPECT_NEAR(trace.rounds.back().loss, 0.0, 1e-24);
}

TEST(RunSketchDl, StationaryAtOptimum) {
    const int d = 5;
    Vector star(d);
    star << 2, 1, 0, -1, 3;
    QuadLossModel model(Matrix::Identity(d, d) * 1.4, star, {Vector::Zero(d)});
    FedConfig cfg;
    cfg.clients = 1;
    cfg.local_steps = 3;
    cfg.rounds = 10;
    cfg.sketch_dim = 3;
    cfg.eta_local = 0.1;
    cfg.eta_global = 1.0;
    cfg.master_seed = 7;
    cfg.theta0 = star;  // all client deltas vanish exactly
    const auto trace = fedsim::run_sketch_dl(cfg, model, false);
    for (const auto& r : trace.rounds) EXPECT_DOUBLE_EQ(r.loss, 0.0);
}

TEST(RunSketchDl, IdentitySketchEqualsRawBitForBit) {
    const int d = 12;
    const auto model = simple_model(d, 4, 0.3);
    FedConfig cfg;
    cfg.clients = 4;
    cfg.local_steps = 5;
    cfg.rounds = 60;
    cfg.sketch_dim = d;
    cfg.eta_local = 0.05;
    cfg.eta_global = 1.0;
    cfg.master_seed = 11;
    const auto sk = fedsim::run_sketch_dl_with(cfg, model, SketchEntries::Identity(d, d));
    const auto raw = fedsim::run_unsketched_dl(cfg, model);
    ASSERT_EQ(sk.rounds.size(), raw.rounds.size());
    for (std::size_t t = 0; t < sk.rounds.size(); ++t) {
        EXPECT_EQ(sk.rounds[t].loss, raw.rounds[t].loss);
        EXPECT_EQ(sk.rounds[t].grad_norm, raw.rounds[t].grad_norm);
    }
}

TEST(RunUnsketchedDl, MatchesClosedFormIteration) {
    // theta_{t+1} - m = (I + eta_g ((I - eta_l H)^K - I)) (theta_t - m).
    const int d = 10, k_steps = 4, rounds = 40;
    const auto model = simple_model(d, 3, 0.25);
    FedConfig cfg;
    cfg.clients = 3;
    cfg.local_steps = k_steps;
    cfg.rounds = rounds;
    cfg.sketch_dim = d;
    cfg.eta_local = 0.07;
    cfg.eta_global = 0.9;
    cfg.master_seed = 13;
    const auto trace = fedsim::run_unsketched_dl(cfg, model);

    Matrix local = Matrix::Identity(d, d) - cfg.eta_local * model.hessian;
    Matrix powk = Matrix::Identity(d, d);
    for (int i = 0; i < k_steps; ++i) powk = powk * local;
    const Matrix step = Matrix::Identity(d, d) +
                        cfg.eta_global * (powk - Matrix::Identity(d, d));
    const Vector m = model.minimizer();
    Vector theta = Vector::Zero(d);
    EXPECT_NEAR(trace.rounds[0].loss, model.loss(theta), 1e-12);
    for (int t = 0; t < rounds; ++t) {
        theta = m + step * (theta - m);
        const double want = model.loss(theta);
        const double got = trace.rounds[static_cast<std::size_t>(t) + 1].loss;
        EXPECT_NEAR(got, want, 1e-8 * std::max(1.0, want));
    }
}

TEST(BytesAccounting, ExactRatio) {
    const int d = 16, b = 4;
    const auto model = simple_model(d, 5, 0.0);
    FedConfig cfg;
    cfg.clients = 5;
    cfg.local_steps = 2;
    cfg.rounds = 7;
    cfg.sketch_dim = b;
    cfg.eta_local = 0.05;
    cfg.eta_global = 1.0;
    cfg.master_seed = 17;
    const auto sk = fedsim::run_sketch_dl(cfg, model, true);
    const auto raw = fedsim::run_unsketched_dl(cfg, model);
    for (std::size_t t = 1; t < sk.rounds.size(); ++t) {
        EXPECT_EQ(sk.rounds[t].bytes_sent, 5 * b * 8);
        EXPECT_EQ(raw.rounds[t].bytes_sent, 5 * d * 8);
        EXPECT_EQ(sk.rounds[t].bytes_sent * d, raw.rounds[t].bytes_sent * b);
    }
    EXPECT_EQ(sk.rounds[0].bytes_sent, 0);  // initial record, no communication
}

TEST(SharedSketch, PlateausAboveRestrictedMinimum) {
    // b < d with one reused sketch: progress confined to a b-dimensional
    // subspace, so the loss stalls strictly above the unsketched limit.
    const int d = 24, b = 6;
    const auto model = simple_model(d, 2, 0.0);
    FedConfig cfg;
    cfg.clients = 2;
    cfg.local_steps = 3;
    cfg.rounds = 400;
    cfg.sketch_dim = b;
    cfg.eta_local = 0.05;
    cfg.eta_global = 1.0;
    cfg.master_seed = 19;
    const auto trace = fedsim::run_sketch_dl(cfg, model, true);
    EXPECT_FALSE(trace.aborted);
    const double tail = trace.rounds.back().loss;
    EXPECT_GT(tail, model.loss_min() + 1e-6);
    // Tail is flat: the last fifty rounds move by a negligible amount.
    const double before = trace.rounds[trace.rounds.size() - 50].loss;
    EXPECT_NEAR(tail, before, 1e-9 * std::max(1.0, before));
}

TEST(FreshSketch, DecaysTowardOptimum) {
    const int d = 24, b = 12;
    const auto model = simple_model(d, 3, 0.1);
    FedConfig cfg;
    cfg.clients = 3;
    cfg.local_steps = 5;
    cfg.rounds = 400;
    cfg.sketch_dim = b;
    cfg.eta_local = 0.02;
    cfg.eta_global = 1.0;
    cfg.master_seed = 23;
    const auto trace = fedsim::run_sketch_dl(cfg, model, false);
    EXPECT_FALSE(trace.aborted);
    const double initial = trace.rounds.front().loss - model.loss_min();
    const double final_gap = trace.rounds.back().loss - model.loss_min();
    EXPECT_LT(final_gap, 1e-6 * initial);
}

TEST(Divergence, AbortsWithPartialTrace) {
    const int d = 4;
    Vector star = Vector::Zero(d);
    QuadLossModel model(Matrix::Identity(d, d) * 3.0, star, {Vector::Zero(d)});
    FedConfig cfg;
    cfg.clients = 1;
    cfg.local_steps = 1;
    cfg.rounds = 500;
    cfg.sketch_dim = d;
    cfg.eta_local = 1.5;  // step size far past 2/L: divergence
    cfg.eta_global = 1.0;
    cfg.master_seed = 29;
    cfg.theta0 = Vector::Ones(d);
    const auto trace = fedsim::run_unsketched_dl(cfg, model);
    EXPECT_TRUE(trace.aborted);
    EXPECT_LT(trace.rounds.size(), 501u);
    EXPECT_GE(trace.rounds.back().loss, 1e12);
}

TEST(SketchGuaranteeBound, HandValuesAndLimit) {
    EXPECT_DOUBLE_EQ(fedsim::sketch_guarantee_bound(0, 0, 0, 0, 4, 0.5), 0.0);
    const auto terms =
        fedsim::sketch_guarantee_terms(1.0, 1.0, 1.0, 1.0, 4, std::exp(-1.0));
    EXPECT_NEAR(terms.a_term, 1.25, 1e-12);
    EXPECT_NEAR(terms.b_term, 1.0, 1e-12);
    EXPECT_NEAR(terms.c_term, 0.25, 1e-12);
    EXPECT_NEAR(terms.z, 2.5, 1e-12);
    EXPECT_LT(fedsim::sketch_guarantee_bound(1, 1, 1, 1, 1 << 20, 0.1), 0.01);
    EXPECT_THROW(fedsim::sketch_guarantee_bound(1, 1, 1, 1, 0, 0.1),
                 std::invalid_argument);
}

TEST(FreshSketch, DecayRateMatchesTheoryAcrossSeeds) {
    // Small-step decay rate within 30% of -2 mu eta_l eta_g K, ten seeds.
    const int d = 48;
    const auto model = simple_model(d, 4, 0.1);
    FedConfig cfg;
    cfg.clients = 4;
    cfg.local_steps = 5;
    cfg.rounds = 250;
    cfg.sketch_dim = 24;
    cfg.eta_local = 0.01;
    cfg.eta_global = 1.0;
    const double target = -2.0 * model.mu() * cfg.eta_local * cfg.eta_global *
                          static_cast<double>(cfg.local_steps);
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        cfg.master_seed = seed;
        const auto trace = fedsim::run_sketch_dl(cfg, model, false);
        std::vector<double> losses;
        for (const auto& r : trace.rounds)
            losses.push_back(r.loss - model.loss_min());
        const auto fit = cli::fit_decay(losses);
        EXPECT_LE(std::abs(fit.slope - target), 0.3 * std::abs(target))
            << "seed " << seed << " slope " << fit.slope;
        EXPECT_GE(fit.r_squared, 0.95) << "seed " << seed;
    }
}

TEST(DecayFit, RecoversPlantedExponential) {
    std::vector<double> losses;
    const double rate = -0.21, plateau = 1e-4;
    for (int t = 0; t < 120; ++t)
        losses.push_back(3.5 * std::exp(rate * t) + plateau);
    const auto fit = cli::fit_decay(losses);
    EXPECT_NEAR(fit.slope, rate, 0.01);
    EXPECT_GT(fit.r_squared, 0.99);
    EXPECT_NEAR(fit.plateau, plateau, 2e-4);
}
