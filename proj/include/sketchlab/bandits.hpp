#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sketchlab/errors.hpp"
#include "sketchlab/random.hpp"
#include "sketchlab/sketch.hpp"

namespace sketchlab::bandits {

using core::RandomSource;
using core::SketchEntries;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Linear-reward environment: K fresh unit-norm actions per round, reward
/// <a, theta*> + N(0, sigma^2). When s > 0, actions and theta* live on the
/// first s coordinates (actions re-normalized to unit length afterwards).
struct BanditEnv {
    Eigen::Index d = 0;
    int num_arms = 1;
    int sparsity = 0;  // 0 = dense
    double sigma = 0.0;
    Vector theta_star;
    RandomSource src;

    std::vector<Vector> actions(int round) const {
        core::Xoshiro256 gen(core::substream(src, core::salt::env_action,
                                             static_cast<std::uint64_t>(round)));
        std::vector<Vector> out;
        out.reserve(static_cast<std::size_t>(num_arms));
        const Eigen::Index live = sparsity > 0 ? sparsity : d;
        for (int k = 0; k < num_arms; ++k) {
            Vector a = Vector::Zero(d);
            double norm = 0.0;
            do {
                for (Eigen::Index j = 0; j < live; ++j) a[j] = gen.next_gaussian();
                norm = a.norm();
            } while (norm == 0.0);
            a /= norm;
            out.push_back(std::move(a));
        }
        return out;
    }

    double noise(int round) const {
        if (sigma == 0.0) return 0.0;
        core::Xoshiro256 gen(core::substream(src, core::salt::env_noise,
                                             static_cast<std::uint64_t>(round)));
        return sigma * gen.next_gaussian();
    }
};

/// Environment with theta* and actions drawn uniformly from the unit ball,
/// truncated to the first s coordinates (actions re-normalized).
inline BanditEnv sparse_env(Eigen::Index d, int s, int num_arms, double sigma,
                            const RandomSource& src) {
    if (d < 1 || num_arms < 1) throw std::invalid_argument("sparse_env: d, K >= 1");
    if (s < 0 || s > d) throw std::invalid_argument("sparse_env: need 0 <= s <= d");
    if (sigma < 0.0) throw std::invalid_argument("sparse_env: sigma >= 0");
    BanditEnv env;
    env.d = d;
    env.num_arms = num_arms;
    env.sparsity = s;
    env.sigma = sigma;
    env.src = src;
    core::Xoshiro256 gen(core::substream(src, core::salt::env_theta));
    const Eigen::Index live = s > 0 ? s : d;
    Vector dir = Vector::Zero(d);
    double norm = 0.0;
    do {
        for (Eigen::Index j = 0; j < d; ++j) dir[j] = gen.next_gaussian();
        norm = dir.norm();
    } while (norm == 0.0);
    dir /= norm;
    const double radius =
        std::pow(gen.next_unit_open(), 1.0 / static_cast<double>(d));
    env.theta_star = radius * dir;
    for (Eigen::Index j = live; j < d; ++j) env.theta_star[j] = 0.0;
    return env;
}

struct RoundRecord {
    double inst_regret = 0.0;
    double cum_regret = 0.0;
    double term1 = 0.0;  // sketched-space optimism gap <theta~ - S theta*, a^s>
    double term2 = 0.0;  // isometry defect theta*^T (I - S^T S) a*
    std::int64_t wall_ns = 0;
    int action_index = 0;
    double desk_norm = 0.0;  // ||played action||, logged for diagnostics
    double conf_gap = 0.0;   // ||theta_hat - S theta*||_Vbar (UCB policies)
    double conf_radius = 0.0;
};

/// Per-round bandit telemetry plus (optionally) everything needed to rebuild
/// each round's sketch for audit-grade recomputation of term2.
struct RegretTrace {
    std::vector<RoundRecord> rounds;
    Vector theta_star;
    bool audited = false;
    Eigen::Index sketch_rows = 0;
    std::vector<RandomSource> sketch_seeds;           // per round, when audited
    std::vector<Vector> best_actions;                 // per round, when audited
    std::optional<SketchEntries> injected_sketch;     // explicit-mode audit

    double final_regret() const {
        return rounds.empty() ? 0.0 : rounds.back().cum_regret;
    }
    double mean_round_ns() const {
        if (rounds.empty()) return 0.0;
        double acc = 0.0;
        for (const auto& r : rounds) acc += static_cast<double>(r.wall_ns);
        return acc / static_cast<double>(rounds.size());
    }
};

enum class SketchMode { none, fresh, fixed, injected };

struct SkOptions {
    SketchMode mode = SketchMode::fresh;
    std::optional<SketchEntries> injected;  // used when mode == injected
    bool oracle_radius = false;  // use the true ||S theta*|| in the radius
    double v_scale = 1.0;        // Thompson exploration hook (0 = greedy)
    double radius_scale = 1.0;   // UCB exploration hook (0 = greedy)
    bool audit = false;          // log sketches + best actions per round
};

namespace detail {

struct RoundSketch {
    bool active = false;
    core::SketchMatrix s;
};

inline RoundSketch round_sketch(SketchMode mode, Eigen::Index b, Eigen::Index d,
                                const RandomSource& policy_src, int round,
                                const SkOptions& opts) {
    RoundSketch rs;
    switch (mode) {
        case SketchMode::none:
            return rs;
        case SketchMode::fresh:
            rs.s = core::make_sketch(
                b, d, core::substream(policy_src, core::salt::sketch,
                                      static_cast<std::uint64_t>(round)));
            break;
        case SketchMode::fixed:
            rs.s = core::make_sketch(b, d,
                                     core::substream(policy_src, core::salt::sketch, 0));
            break;
        case SketchMode::injected:
            if (!opts.injected) throw std::invalid_argument("missing injected sketch");
            rs.s = core::SketchMatrix::from_entries(*opts.injected);
            break;
    }
    rs.active = true;
    if (rs.s.cols != d) throw std::invalid_argument("sketch width mismatch");
    return rs;
}

inline void audit_round(RegretTrace& trace, const SkOptions& opts,
                        const RoundSketch& rs, const Vector& astar) {
    if (!opts.audit) return;
    trace.sketch_seeds.push_back(rs.active ? rs.s.seed : RandomSource{});
    trace.best_actions.push_back(astar);
    if (rs.active && opts.mode == SketchMode::injected && !trace.injected_sketch)
        trace.injected_sketch = rs.s.entries;
}

/// Shared optimism-based core. `mode == none` is the plain d-dimensional
/// baseline; every sketched variant goes through exactly the same arithmetic
/// so injecting the identity sketch reproduces the baseline step for step.
inline RegretTrace ucb_core(const BanditEnv& env, int horizon, Eigen::Index b,
                            double lambda, double delta, double rho,
                            const RandomSource& policy_src, const SkOptions& opts) {
    if (horizon < 1) throw std::invalid_argument("ucb: T >= 1");
    if (lambda <= 0.0) throw std::invalid_argument("ucb: lambda > 0");
    if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("ucb: delta in (0,1)");
    if (rho < 0.0) throw std::invalid_argument("ucb: rho >= 0");
    const bool sketched = opts.mode != SketchMode::none;
    const Eigen::Index d = env.d;
    const Eigen::Index dim = sketched ? b : d;
    if (sketched && b < 1) throw std::invalid_argument("ucb: b >= 1");

    Matrix gram = Matrix::Zero(d, d);  // sum of played a a^T
    Vector targ = Vector::Zero(d);     // sum of played a r
    RegretTrace trace;
    trace.theta_star = env.theta_star;
    trace.audited = opts.audit;
    trace.sketch_rows = dim;
    trace.rounds.reserve(static_cast<std::size_t>(horizon));

    double cum = 0.0;
    for (int t = 1; t <= horizon; ++t) {
        const auto actions = env.actions(t);
        const auto t0 = std::chrono::steady_clock::now();

        const RoundSketch rs = round_sketch(opts.mode, b, d, policy_src, t, opts);
        std::vector<Vector> sketched_actions(actions.size());
        for (std::size_t k = 0; k < actions.size(); ++k)
            sketched_actions[k] = rs.active ? rs.s.entries * actions[k] : actions[k];

        Matrix vbar = rs.active
                          ? Matrix((rs.s.entries * gram) * rs.s.entries.transpose())
                          : gram;
        const double hist_energy = vbar.trace();  // sum of sketched-action norms
        vbar.diagonal().array() += lambda;
        Eigen::LLT<Matrix> llt(vbar);
        if (llt.info() != Eigen::Success)
            throw NumericFailure("ucb: confidence matrix not SPD", lambda);
        const Vector target_s = rs.active ? Vector(rs.s.entries * targ) : targ;
        const Vector theta_hat = llt.solve(target_s);

        // Radius from the standard determinant-trace bound,
        // det(Vbar) <= (lambda + sum ||a^s||^2 / dim)^dim, so that
        // log(det(Vbar)^{1/2} det(lambda I)^{-1/2}) <=
        //   dim/2 * log(1 + sum ||a^s||^2 / (lambda dim)).
        // Deterministic, shared by the sketched and plain policies (the
        // identity-sketch reduction stays exact), and it carries the ambient
        // dimension for the un-sketched baseline the way the sketched-space
        // radius carries b.
        const Vector sketched_theta =
            rs.active ? Vector(rs.s.entries * env.theta_star) : env.theta_star;
        const double rho_eff = opts.oracle_radius ? sketched_theta.norm() : rho;
        const double radius =
            opts.radius_scale *
            (std::sqrt(0.5 * static_cast<double>(dim) *
                           std::log1p(hist_energy /
                                      (lambda * static_cast<double>(dim))) +
                       std::log(1.0 / delta)) +
             std::sqrt(lambda) * rho_eff);

        int chosen = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < actions.size(); ++k) {
            const double width =
                std::sqrt(sketched_actions[k].dot(llt.solve(sketched_actions[k])));
            const double score = theta_hat.dot(sketched_actions[k]) + radius * width;
            if (score > best_score) {
                best_score = score;
                chosen = static_cast<int>(k);
            }
        }

        const Vector played =
            rs.active ? Vector(rs.s.entries.transpose() * sketched_actions[chosen])
                      : actions[chosen];
        gram.noalias() += played * played.transpose();
        const auto t1 = std::chrono::steady_clock::now();
        const double reward = env.theta_star.dot(played) + env.noise(t);
        targ += played * reward;

        int best_arm = 0;
        for (std::size_t k = 1; k < actions.size(); ++k)
            if (env.theta_star.dot(actions[k]) > env.theta_star.dot(actions[best_arm]))
                best_arm = static_cast<int>(k);
        const Vector& astar = actions[best_arm];

        RoundRecord rec;
        rec.inst_regret = env.theta_star.dot(astar) - env.theta_star.dot(played);
        cum += rec.inst_regret;
        rec.cum_regret = cum;
        rec.term1 = best_score - sketched_theta.dot(sketched_actions[chosen]);
        // Same association as inst_regret so that the forced-action case
        // (K = 1) makes cum_regret equal the term2 sum without rounding gap.
        rec.term2 =
            rs.active ? env.theta_star.dot(astar) -
                            env.theta_star.dot(rs.s.entries.transpose() *
                                               (best_arm == chosen
                                                    ? sketched_actions[chosen]
                                                    : Vector(rs.s.entries * astar)))
                      : 0.0;
        rec.wall_ns =
            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
        rec.action_index = chosen;
        rec.desk_norm = played.norm();
        const Vector gap = theta_hat - sketched_theta;
        rec.conf_gap = std::sqrt(gap.dot(vbar * gap));
        rec.conf_radius = radius;
        trace.rounds.push_back(rec);
        audit_round(trace, opts, rs, astar);
    }
    return trace;
}

/// Shared Thompson-sampling core; same none/sketched duality as ucb_core.
/// State accumulates each round's chosen context as sketched at that round.
inline RegretTrace ts_core(const BanditEnv& env, int horizon, Eigen::Index b,
                           double delta, const RandomSource& policy_src,
                           const SkOptions& opts) {
    if (horizon < 1) throw std::invalid_argument("ts: T >= 1");
    if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("ts: delta in (0,1)");
    const bool sketched = opts.mode != SketchMode::none;
    const Eigen::Index d = env.d;
    const Eigen::Index dim = sketched ? b : d;
    if (sketched && b < 1) throw std::invalid_argument("ts: b >= 1");

    Matrix precision = Matrix::Identity(dim, dim);  // prior covariance I
    Vector accum = Vector::Zero(dim);
    RegretTrace trace;
    trace.theta_star = env.theta_star;
    trace.audited = opts.audit;
    trace.sketch_rows = dim;
    trace.rounds.reserve(static_cast<std::size_t>(horizon));

    Vector gauss(dim);
    double cum = 0.0;
    for (int t = 1; t <= horizon; ++t) {
        const auto actions = env.actions(t);
        const auto t0 = std::chrono::steady_clock::now();

        const RoundSketch rs = round_sketch(opts.mode, b, d, policy_src, t, opts);
        std::vector<Vector> sketched_actions(actions.size());
        for (std::size_t k = 0; k < actions.size(); ++k)
            sketched_actions[k] = rs.active ? rs.s.entries * actions[k] : actions[k];

        Eigen::LLT<Matrix> llt(precision);
        if (llt.info() != Eigen::Success)
            throw NumericFailure("ts: posterior precision not SPD", 0.0);
        const Vector mu = llt.solve(accum);
        const double v = opts.v_scale *
                         std::sqrt(9.0 * static_cast<double>(dim) *
                                   std::log(static_cast<double>(t) / delta));
        {
            core::Xoshiro256 gen(core::substream(policy_src, core::salt::ts_draw,
                                                 static_cast<std::uint64_t>(t)));
            for (Eigen::Index i = 0; i < dim; ++i) gauss[i] = gen.next_gaussian();
        }
        const Vector theta_sample = mu + v * llt.matrixU().solve(gauss);

        int chosen = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < actions.size(); ++k) {
            const double score = theta_sample.dot(sketched_actions[k]);
            if (score > best_score) {
                best_score = score;
                chosen = static_cast<int>(k);
            }
        }

        const Vector played =
            rs.active ? Vector(rs.s.entries.transpose() * sketched_actions[chosen])
                      : actions[chosen];
        precision.noalias() +=
            sketched_actions[chosen] * sketched_actions[chosen].transpose();
        const auto t1 = std::chrono::steady_clock::now();
        const double reward = env.theta_star.dot(played) + env.noise(t);
        accum += sketched_actions[chosen] * reward;

        int best_arm = 0;
        for (std::size_t k = 1; k < actions.size(); ++k)
            if (env.theta_star.dot(actions[k]) > env.theta_star.dot(actions[best_arm]))
                best_arm = static_cast<int>(k);
        const Vector& astar = actions[best_arm];
        const Vector sketched_theta =
            rs.active ? Vector(rs.s.entries * env.theta_star) : env.theta_star;

        RoundRecord rec;
        rec.inst_regret = env.theta_star.dot(astar) - env.theta_star.dot(played);
        cum += rec.inst_regret;
        rec.cum_regret = cum;
        rec.term1 = (theta_sample - sketched_theta).dot(sketched_actions[chosen]);
        rec.term2 =
            rs.active ? env.theta_star.dot(astar) -
                            env.theta_star.dot(rs.s.entries.transpose() *
                                               (best_arm == chosen
                                                    ? sketched_actions[chosen]
                                                    : Vector(rs.s.entries * astar)))
                      : 0.0;
        rec.wall_ns =
            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
        rec.action_index = chosen;
        rec.desk_norm = played.norm();
        trace.rounds.push_back(rec);
        audit_round(trace, opts, rs, astar);
    }
    return trace;
}

}  // namespace detail

/// Sketched Linear UCB: per-round Gaussian sketch, ridge on the re-sketched
/// history (evaluated through the history Gram matrix), closed-form optimism.
inline RegretTrace run_sk_linucb(const BanditEnv& env, int horizon, Eigen::Index b,
                                 double lambda, double delta, double rho,
                                 const RandomSource& policy_src,
                                 const SkOptions& opts = {}) {
    SkOptions o = opts;
    if (o.mode == SketchMode::none) o.mode = SketchMode::fresh;
    return detail::ucb_core(env, horizon, b, lambda, delta, rho, policy_src, o);
}

/// Plain d-dimensional LinUCB with the same radius recipe (term2 = 0).
inline RegretTrace run_linucb(const BanditEnv& env, int horizon, double lambda,
                              double delta, const RandomSource& policy_src,
                              const SkOptions& opts = {}) {
    SkOptions o = opts;
    o.mode = SketchMode::none;
    o.injected.reset();
    return detail::ucb_core(env, horizon, env.d, lambda, delta, /*rho=*/2.0,
                            policy_src, o);
}

/// Sketched Linear Thompson sampling (fresh sketch per round).
inline RegretTrace run_sk_lints(const BanditEnv& env, int horizon, Eigen::Index b,
                                double delta, const RandomSource& policy_src,
                                const SkOptions& opts = {}) {
    SkOptions o = opts;
    if (o.mode == SketchMode::none) o.mode = SketchMode::fresh;
    return detail::ts_core(env, horizon, b, delta, policy_src, o);
}

/// Plain d-dimensional Linear Thompson sampling.
inline RegretTrace run_lints(const BanditEnv& env, int horizon, double delta,
                             const RandomSource& policy_src,
                             const SkOptions& opts = {}) {
    SkOptions o = opts;
    o.mode = SketchMode::none;
    o.injected.reset();
    return detail::ts_core(env, horizon, env.d, delta, policy_src, o);
}

/// Sums of the recorded decomposition terms.
inline std::pair<double, double> regret_terms(const RegretTrace& trace) {
    if (trace.rounds.empty()) throw std::invalid_argument("regret_terms: empty trace");
    double sum1 = 0.0, sum2 = 0.0;
    for (const auto& r : trace.rounds) {
        sum1 += r.term1;
        sum2 += r.term2;
    }
    return {sum1, sum2};
}

/// Rebuilds every round's sketch from the audit log and recomputes the
/// isometry-defect sum independently of the stored per-round values.
inline double recompute_term2_sum(const RegretTrace& trace) {
    if (!trace.audited)
        throw std::invalid_argument("recompute_term2_sum: trace not audited");
    double acc = 0.0;
    for (std::size_t i = 0; i < trace.rounds.size(); ++i) {
        const Vector& astar = trace.best_actions[i];
        Vector s_theta, s_astar;
        if (trace.injected_sketch) {
            s_theta = *trace.injected_sketch * trace.theta_star;
            s_astar = *trace.injected_sketch * astar;
        } else {
            const auto s = core::make_sketch(trace.sketch_rows, trace.theta_star.size(),
                                             trace.sketch_seeds[i]);
            s_theta = s.entries * trace.theta_star;
            s_astar = s.entries * astar;
        }
        acc += trace.theta_star.dot(astar) - s_theta.dot(s_astar);
    }
    return acc;
}

}  // namespace sketchlab::bandits
