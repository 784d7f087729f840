// Acceptance suite: one test per numbered criterion, each printing a single
// PASS/FAIL line. Statistical checks run on fixed seeds so the whole suite is
// deterministic; tolerances are pinned here, not tuned at run time.

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdio>

#include "sketchlab/bandits.hpp"
#include "sketchlab/chaos.hpp"
#include "sketchlab/embedding.hpp"
#include "sketchlab/experiments.hpp"
#include "sketchlab/fedsim.hpp"
#include "sketchlab/fixtures.hpp"
#include "sketchlab/geometry.hpp"
#include "sketchlab/regression.hpp"
#include "sketchlab/stats.hpp"

using namespace sketchlab;
using core::derive_stream;
using core::DistributionKind;
using geometry::Matrix;
using geometry::MatrixSet;
using geometry::Vector;
using geometry::VectorSet;

namespace {

class Criterion {
public:
    Criterion(int number, std::string name)
        : number_(number), name_(std::move(name)),
          start_(std::chrono::steady_clock::now()) {}

    ~Criterion() {
        const double sec = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start_)
                               .count();
        std::printf("criterion %02d %-28s %s  (%.1f s)\n", number_, name_.c_str(),
                    ::testing::Test::HasFailure() ? "FAIL" : "PASS", sec);
        std::fflush(stdout);
    }

private:
    int number_;
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

const cli::Fixtures& fixtures() {
    static const cli::Fixtures fx = cli::Fixtures::load_default();
    return fx;
}

}  // namespace

// 1. Pointwise decomposition: deviation <= offdiag + diag on sampled triples.
TEST(Acceptance, C01_PointwiseDecomposition) {
    Criterion c(1, "pointwise decomposition");
    const int n_triples = 10000;
    for (int rep = 0; rep < n_triples; ++rep) {
        const auto seed = static_cast<uint64_t>(rep);
        core::Xoshiro256 shape(derive_stream(101, seed));
        const int m = 2 + static_cast<int>(shape.next_u64() % 15);   // <= 16
        const int n = 2 + static_cast<int>(shape.next_u64() % 15);   // <= 16
        const int sm = 1 + static_cast<int>(shape.next_u64() % 8);   // <= 8
        const int sn = 1 + static_cast<int>(shape.next_u64() % 8);
        const auto ms = geometry::random_matrix_set(
            m, n, static_cast<std::size_t>(sm), 0.5, derive_stream(102, seed));
        const auto ns = geometry::random_matrix_set(
            m, n, static_cast<std::size_t>(sn), 0.5, derive_stream(103, seed));
        core::Xoshiro256 gen(derive_stream(104, seed));
        Vector xi(n);
        const bool rademacher = (rep % 2) == 0;
        gen.fill(rademacher ? DistributionKind::rademacher
                            : DistributionKind::gaussian_unit,
                 std::span<double>(xi.data(), static_cast<std::size_t>(n)));
        const double cval = chaos::deviation_cross(ms, ns, xi);
        const double bval = chaos::offdiag_term(ms, ns, xi);
        const double dval = chaos::diag_term(ms, ns, xi);
        ASSERT_LE(cval, bval + dval + 1e-9 * std::max(1.0, cval))
            << "triple " << rep;
    }
}

// 2. Expectation identity: mean quadratic form matches the trace.
TEST(Acceptance, C02_ExpectationIdentity) {
    Criterion c(2, "expectation identity");
    const std::size_t draws = 100000;
    for (int pair = 0; pair < 20; ++pair) {
        const auto seed = static_cast<uint64_t>(pair);
        const auto ms = geometry::random_matrix_set(8, 8, 1, 0.4,
                                                    derive_stream(111, seed));
        const auto ns = geometry::random_matrix_set(8, 8, 1, 0.4,
                                                    derive_stream(112, seed));
        const Matrix& m = ms.elements[0];
        const Matrix& n = ns.elements[0];
        const double expected = chaos::quadratic_mean(m, n);
        for (auto kind :
             {DistributionKind::gaussian_unit, DistributionKind::rademacher}) {
            core::Xoshiro256 gen(derive_stream(
                113, seed * 2 + (kind == DistributionKind::rademacher ? 1 : 0)));
            std::vector<double> vals(draws);
            Vector xi(8);
            for (auto& v : vals) {
                gen.fill(kind, std::span<double>(xi.data(), 8));
                v = (m * xi).dot(n * xi);
            }
            const double se = stats::stderr_of_mean(vals);
            ASSERT_NEAR(stats::mean(vals), expected, 4.0 * se) << "pair " << pair;
        }
    }
}

// 3. sqrt(T) scaling of the summed deviation statistic.
TEST(Acceptance, C03_SqrtTScaling) {
    Criterion c(3, "sqrt(T) scaling");
    const auto root = derive_stream(121, 0);
    const auto ms = geometry::random_matrix_set(6, 6, 2, 1.0 / std::sqrt(6.0),
                                                core::substream(root, 1, 1));
    const auto ns = geometry::random_matrix_set(6, 6, 2, 1.0 / std::sqrt(6.0),
                                                core::substream(root, 1, 2));
    const std::size_t trials = 2000;
    std::vector<double> log_t, log_median;
    for (int t = 1; t <= 256; t *= 2) {
        const auto samples = chaos::sample_deviations(
            ms, ns, DistributionKind::gaussian_unit, trials, t,
            core::substream(root, 2, static_cast<uint64_t>(t)));
        log_t.push_back(std::log(static_cast<double>(t)));
        log_median.push_back(std::log(stats::median(samples)));
    }
    const auto fit = stats::fit_line(log_t, log_median);
    EXPECT_GE(fit.slope, 0.4);
    EXPECT_LE(fit.slope, 0.6);
}

// 4. Tail dominance of the cross-form bound with fixture constants.
TEST(Acceptance, C04_TailDominance) {
    Criterion c(4, "tail dominance");
    const auto [ms, ns] = cli::canonical_tail_sets();
    const auto& fx = fixtures();
    const auto pm = geometry::profile_matrix_set(
        ms, 4000, derive_stream(131, 1), fx.c_width);
    const auto pn = geometry::profile_matrix_set(
        ns, 4000, derive_stream(131, 2), fx.c_width);
    struct Case {
        DistributionKind kind;
        double c1, c2;
    };
    for (const auto& [kind, c1, c2] :
         {Case{DistributionKind::gaussian_unit, fx.gaussian_c1, fx.gaussian_c2},
          Case{DistributionKind::rademacher, fx.rademacher_c1, fx.rademacher_c2}}) {
        const auto bt = chaos::bound_triple(pm, pn, c1, c2);
        const auto samples = chaos::sample_deviations(
            ms, ns, kind, 100000, 1,
            derive_stream(132, kind == DistributionKind::rademacher ? 1 : 0));
        for (double eps : cli::tail_eps_grid(bt)) {
            const double freq = cli::exceedance(samples, bt.c1 * bt.W + eps);
            ASSERT_LE(freq, chaos::tail_bound(bt, eps))
                << "eps " << eps << " kind " << static_cast<int>(kind);
        }
    }
}

// 5. Norm-preservation pass rate at the required sketch dimension.
TEST(Acceptance, C05_JltPassRate) {
    Criterion c(5, "norm preservation rate");
    const int d = 512, n_points = 64, trials = 200;
    const double eps = 0.25;
    const int b = embedding::jlt_required_dim(eps, n_points, 8.0);
    ASSERT_EQ(b, 533);
    const auto set =
        geometry::random_unit_vectors(d, n_points, derive_stream(141, 1));
    int passed = 0;
    for (int i = 0; i < trials; ++i) {
        const auto s =
            core::make_sketch(b, d, derive_stream(141, 100 + static_cast<uint64_t>(i)));
        passed += embedding::check_rip(s, set, eps).passed ? 1 : 0;
    }
    EXPECT_GE(passed, static_cast<int>(0.95 * trials));
}

// 6. Inner-product preservation over two 32-point sets.
TEST(Acceptance, C06_InnerProductPreservation) {
    Criterion c(6, "inner-product preservation");
    const int d = 128, n_points = 32, trials = 200;
    const double eps = 0.3;
    const auto u_set =
        geometry::random_unit_vectors(d, n_points, derive_stream(151, 1));
    const auto v_set =
        geometry::random_unit_vectors(d, n_points, derive_stream(151, 2));
    const int b = embedding::inner_required_dim(
        eps, geometry::finite_width_bound(u_set),
        geometry::finite_width_bound(v_set), 4.0);
    int passed = 0;
    for (int i = 0; i < trials; ++i) {
        const auto s =
            core::make_sketch(b, d, derive_stream(151, 100 + static_cast<uint64_t>(i)));
        passed += embedding::check_inner_products(s, u_set, v_set, eps).passed ? 1 : 0;
    }
    EXPECT_GE(passed, static_cast<int>(0.90 * trials));
}

// 7. Single-matrix quadratic tail never exceeds its calibrated bound.
TEST(Acceptance, C07_HansonWrightSanity) {
    Criterion c(7, "single-matrix tail bound");
    const auto a = cli::canonical_hw_matrix();
    const MatrixSet single({a});
    const auto samples = chaos::sample_deviations(
        single, single, DistributionKind::gaussian_unit, 100000, 1,
        derive_stream(161, 0));
    const Matrix gram = a.transpose() * a;
    const double frob = gram.norm();
    const double op = geometry::operator_radius(MatrixSet({gram}));
    const double ccal = fixtures().hanson_wright_c;
    for (int k = 1; k <= 10; ++k) {
        const double eps = (5.0 * frob + 10.0 * op) * k / 10.0;
        const double freq = cli::exceedance(samples, eps);
        ASSERT_LE(freq, chaos::hanson_wright_tail(a, eps, ccal)) << "eps " << eps;
    }
}

// 8. Bandit reproduction at paper scale plus the fast smoke variant.
TEST(Acceptance, C08_BanditPaperScale) {
    Criterion c(8, "bandit regret and timing");
    auto run_suite = [&](std::int64_t d, std::int64_t k, std::int64_t t,
                         std::int64_t b, std::int64_t s, std::int64_t seeds) {
        cli::ExperimentConfig cfg;
        cfg.experiment = "bandit";
        cfg.seed = 2026;
        cfg.trials = seeds;
        cfg.threads = 1;
        for (const auto& [key, spec] : cli::bandit_schema())
            cfg.params[key] = spec.default_value;
        cfg.params["d"] = d;
        cfg.params["k"] = k;
        cfg.params["t"] = t;
        cfg.params["b"] = b;
        cfg.params["s"] = s;
        return cli::run_bandit_suite(cfg, nullptr);
    };
    auto check = [&](const std::vector<cli::BanditPolicySummary>& sums,
                     const char* tag) {
        auto find = [&](const std::string& name) {
            for (const auto& s : sums)
                if (s.name == name) return &s;
            ADD_FAILURE() << "missing policy " << name;
            return static_cast<const cli::BanditPolicySummary*>(nullptr);
        };
        const auto* linucb = find("linucb");
        const auto* sk_linucb = find("sk_linucb");
        const auto* lints = find("lints");
        const auto* sk_lints = find("sk_lints");
        ASSERT_TRUE(linucb && sk_linucb && lints && sk_lints);
        EXPECT_LE(sk_linucb->mean_final_regret, linucb->mean_final_regret) << tag;
        EXPECT_LE(sk_lints->mean_final_regret, lints->mean_final_regret) << tag;
        EXPECT_LT(sk_linucb->mean_round_ns, linucb->mean_round_ns) << tag;
        EXPECT_LT(sk_lints->mean_round_ns, lints->mean_round_ns) << tag;
        std::printf(
            "  [%s] final regret: linucb %.1f sk %.1f | lints %.1f sk %.1f\n"
            "  [%s] us/round:     linucb %.0f sk %.0f | lints %.0f sk %.0f\n",
            tag, linucb->mean_final_regret, sk_linucb->mean_final_regret,
            lints->mean_final_regret, sk_lints->mean_final_regret, tag,
            linucb->mean_round_ns * 1e-3, sk_linucb->mean_round_ns * 1e-3,
            lints->mean_round_ns * 1e-3, sk_lints->mean_round_ns * 1e-3);
    };
    const auto t0 = std::chrono::steady_clock::now();
    check(run_suite(200, 4, 2000, 32, 20, 5), "smoke");
    const auto t1 = std::chrono::steady_clock::now();
    EXPECT_LT(std::chrono::duration<double>(t1 - t0).count(), 60.0)
        << "smoke variant must finish within a minute";
    check(run_suite(500, 4, 10000, 50, 50, 5), "paper");
    const auto t2 = std::chrono::steady_clock::now();
    EXPECT_LT(std::chrono::duration<double>(t2 - t1).count(), 900.0)
        << "paper-scale run must finish within fifteen minutes";
}

// 9. Identity-sketch equivalences across all sketched algorithms.
TEST(Acceptance, C09_IdentitySketchEquivalence) {
    Criterion c(9, "identity-sketch equivalence");
    const int d = 32, horizon = 200;
    const auto env = bandits::sparse_env(d, 8, 4, 0.8, derive_stream(171, 1));
    const auto policy_src = derive_stream(171, 2);
    bandits::SkOptions identity;
    identity.mode = bandits::SketchMode::injected;
    identity.injected = core::SketchEntries::Identity(d, d);

    const auto sk_ucb = bandits::run_sk_linucb(env, horizon, d, 1.0, 0.05, 2.0,
                                               policy_src, identity);
    const auto ucb = bandits::run_linucb(env, horizon, 1.0, 0.05, policy_src);
    const auto sk_ts =
        bandits::run_sk_lints(env, horizon, d, 0.05, policy_src, identity);
    const auto ts = bandits::run_lints(env, horizon, 0.05, policy_src);
    for (int t = 0; t < horizon; ++t) {
        const auto i = static_cast<std::size_t>(t);
        ASSERT_EQ(sk_ucb.rounds[i].action_index, ucb.rounds[i].action_index);
        ASSERT_EQ(sk_ts.rounds[i].action_index, ts.rounds[i].action_index);
        ASSERT_EQ(sk_ucb.rounds[i].cum_regret, ucb.rounds[i].cum_regret);
        ASSERT_EQ(sk_ts.rounds[i].cum_regret, ts.rounds[i].cum_regret);
    }

    const auto model = cli::make_fed_model(16, 3, 1.0, 1.2, 0.2,
                                           derive_stream(171, 3));
    fedsim::FedConfig fc;
    fc.clients = 3;
    fc.local_steps = 4;
    fc.rounds = 50;
    fc.sketch_dim = 16;
    fc.eta_local = 0.05;
    fc.eta_global = 1.0;
    fc.master_seed = 5;
    const auto sk_dl =
        fedsim::run_sketch_dl_with(fc, model, core::SketchEntries::Identity(16, 16));
    const auto raw_dl = fedsim::run_unsketched_dl(fc, model);
    ASSERT_EQ(sk_dl.rounds.size(), raw_dl.rounds.size());
    for (std::size_t t = 0; t < sk_dl.rounds.size(); ++t) {
        ASSERT_EQ(sk_dl.rounds[t].loss, raw_dl.rounds[t].loss);
        ASSERT_EQ(sk_dl.rounds[t].grad_norm, raw_dl.rounds[t].grad_norm);
    }
}

// 10. Regret-decomposition bookkeeping.
TEST(Acceptance, C10_RegretBookkeeping) {
    Criterion c(10, "regret bookkeeping");
    const auto env = bandits::sparse_env(64, 16, 4, 0.8, derive_stream(181, 1));
    bandits::SkOptions audit;
    audit.audit = true;
    for (int variant = 0; variant < 2; ++variant) {
        const auto trace =
            variant == 0
                ? bandits::run_sk_linucb(env, 300, 16, 1.0, 0.05, 2.0,
                                         derive_stream(181, 2), audit)
                : bandits::run_sk_lints(env, 300, 16, 0.05, derive_stream(181, 3),
                                        audit);
        const auto [sum1, sum2] = bandits::regret_terms(trace);
        const double recomputed = bandits::recompute_term2_sum(trace);
        ASSERT_NEAR(recomputed, sum2, 1e-9 * std::max(1.0, std::abs(sum2)));
    }
    // Forced action, no noise: cumulative regret equals the term-2 sum exactly.
    const auto forced = bandits::sparse_env(48, 12, 1, 0.0, derive_stream(181, 4));
    const auto ucb_trace = bandits::run_sk_linucb(forced, 200, 12, 1.0, 0.05, 2.0,
                                                  derive_stream(181, 5));
    const auto [u1, u2] = bandits::regret_terms(ucb_trace);
    ASSERT_EQ(ucb_trace.final_regret(), u2);
    const auto ts_trace =
        bandits::run_sk_lints(forced, 200, 12, 0.05, derive_stream(181, 6));
    const auto [s1, s2] = bandits::regret_terms(ts_trace);
    ASSERT_EQ(ts_trace.final_regret(), s2);
}

// 11. Federated convergence shape and exact bytes accounting.
TEST(Acceptance, C11_FedConvergenceShape) {
    Criterion c(11, "fed convergence shape");
    const int d = 64;
    const auto model = cli::make_fed_model(d, 4, 1.0, 1.2, 0.1,
                                           derive_stream(191, 1));
    fedsim::FedConfig fc;
    fc.clients = 4;
    fc.local_steps = 5;
    fc.rounds = 300;
    fc.sketch_dim = 32;
    fc.eta_local = 0.01;
    fc.eta_global = 1.0;
    fc.master_seed = 2026;
    const auto sketched = fedsim::run_sketch_dl(fc, model, false);
    const auto raw = fedsim::run_unsketched_dl(fc, model);
    ASSERT_FALSE(sketched.aborted);

    std::vector<double> losses;
    for (const auto& r : sketched.rounds) losses.push_back(r.loss - model.loss_min());
    const auto fit = cli::fit_decay(losses);
    const double target = -2.0 * model.mu() * fc.eta_local * fc.eta_global *
                          static_cast<double>(fc.local_steps);
    std::printf("  decay slope %.4f target %.4f R2 %.4f (%d pts)\n", fit.slope,
                target, fit.r_squared, fit.points);
    EXPECT_GE(fit.r_squared, 0.95);
    EXPECT_LE(std::abs(fit.slope - target), 0.3 * std::abs(target));
    for (std::size_t t = 1; t < sketched.rounds.size(); ++t)
        ASSERT_EQ(sketched.rounds[t].bytes_sent * d,
                  raw.rounds[t].bytes_sent * fc.sketch_dim);
}

// 12. Sketched regression: exact recovery and bound coverage.
TEST(Acceptance, C12_SketchedRegression) {
    Criterion c(12, "sketched regression");
    const int d = 64;
    for (int seed = 0; seed < 20; ++seed) {
        core::Xoshiro256 gen(derive_stream(201, static_cast<uint64_t>(seed)));
        Vector beta(d);
        for (int i = 0; i < d; ++i) beta[i] = gen.next_gaussian();
        beta /= beta.norm();
        const auto inst = regression::gen_regression(
            d, 256, beta, 0.0, derive_stream(202, static_cast<uint64_t>(seed)));
        const auto fit = regression::fit_sketched_with(
            inst, core::SketchMatrix::identity(d), 1e-10);
        ASSERT_LT((fit.beta_desk - beta).norm() / beta.norm(), 1e-6);
    }

    cli::ExperimentConfig cfg;
    cfg.experiment = "regress";
    cfg.seed = 2026;
    cfg.trials = 500;
    cfg.threads = 1;
    cfg.out_dir = "";
    for (const auto& [key, spec] : cli::regress_schema())
        cfg.params[key] = spec.default_value;
    const auto result = cli::run_regress(cfg);
    EXPECT_TRUE(result.check_passed) << result.check_message;
    std::printf("  %s\n", result.check_message.c_str());
}

// 13. Geometry oracles: closed forms and the brute-force width oracle.
TEST(Acceptance, C13_GeometryOracles) {
    Criterion c(13, "geometry oracles");
    const auto single = geometry::random_matrix_set(5, 7, 1, 0.8,
                                                    derive_stream(211, 1));
    const double frob = single.elements.front().norm();
    const auto est =
        geometry::gaussian_width_matrices(single, 40000, derive_stream(211, 2));
    EXPECT_NEAR(est.mean, frob * std::sqrt(2.0 / M_PI), 3.0 * est.std_err);

    const int dim = 16;
    std::vector<Vector> basis;
    for (int i = 0; i < dim; ++i) {
        Vector e = Vector::Zero(dim);
        e[i] = 1.0;
        basis.push_back(e);
    }
    const auto width = geometry::gaussian_width_vectors(VectorSet(basis), 40000,
                                                        derive_stream(211, 3));
    core::Xoshiro256 gen(derive_stream(211, 4));
    const std::size_t oracle_n = 1000000;
    double acc = 0.0, acc_sq = 0.0;
    for (std::size_t i = 0; i < oracle_n; ++i) {
        double best = -1e300;
        for (int j = 0; j < dim; ++j) best = std::max(best, gen.next_gaussian());
        acc += best;
        acc_sq += best * best;
    }
    const double oracle = acc / static_cast<double>(oracle_n);
    const double oracle_se =
        std::sqrt((acc_sq / oracle_n - oracle * oracle) / oracle_n);
    EXPECT_NEAR(width.mean, oracle, 3.0 * (width.std_err + oracle_se));

    Matrix diag = Matrix::Zero(3, 3);
    diag(0, 0) = 3.0;
    diag(1, 1) = -1.5;
    diag(2, 2) = 0.25;
    EXPECT_NEAR(geometry::operator_radius(MatrixSet({diag})), 3.0, 1e-8);
    Matrix diag2 = Matrix::Zero(2, 2);
    diag2(0, 0) = 2.0;
    diag2(1, 1) = 2.0;
    EXPECT_NEAR(geometry::operator_radius(MatrixSet({diag2})), 2.0, 1e-8);
}
