#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sketchlab/random.hpp"
#include "sketchlab/sketch.hpp"

namespace sketchlab::fedsim {

using core::RandomSource;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct FedConfig {
    int clients = 1;
    int local_steps = 1;
    int rounds = 1;
    Eigen::Index sketch_dim = 1;
    double eta_local = 0.1;
    double eta_global = 1.0;
    std::uint64_t master_seed = 0;
    std::optional<Vector> theta0;  // default: zero vector
};

/// Quadratic per-client losses sharing one SPD curvature matrix:
/// L_c(theta) = 1/2 (theta - theta* - o_c)^T H (theta - theta* - o_c).
/// The global loss then satisfies gradient dominance with mu = lambda_min(H).
struct QuadLossModel {
    Matrix hessian;
    Vector theta_star;
    std::vector<Vector> offsets;  // one per client

    QuadLossModel(Matrix h, Vector star, std::vector<Vector> offs)
        : hessian(std::move(h)), theta_star(std::move(star)), offsets(std::move(offs)) {
        const Eigen::Index d = hessian.rows();
        if (hessian.cols() != d) throw std::invalid_argument("QuadLossModel: H square");
        if (theta_star.size() != d)
            throw std::invalid_argument("QuadLossModel: theta* dimension");
        if (offsets.empty()) throw std::invalid_argument("QuadLossModel: no clients");
        for (const auto& o : offsets)
            if (o.size() != d) throw std::invalid_argument("QuadLossModel: offset dim");
        Eigen::SelfAdjointEigenSolver<Matrix> eig(hessian);
        eigenvalues_ = eig.eigenvalues();
        if (eigenvalues_.minCoeff() <= 0.0)
            throw std::invalid_argument("QuadLossModel: H must be SPD");
    }

    Eigen::Index dim() const { return hessian.rows(); }
    int clients() const { return static_cast<int>(offsets.size()); }

    /// Gradient-dominance constant of the global loss.
    double mu() const { return eigenvalues_.minCoeff(); }

    /// Spectral-sum ratio sum |Lambda_j| / Lambda_max of the curvature.
    double kappa() const {
        return eigenvalues_.cwiseAbs().sum() / eigenvalues_.cwiseAbs().maxCoeff();
    }

    Vector client_center(int c) const { return theta_star + offsets[c]; }

    Vector grad_client(int c, const Vector& theta) const {
        return hessian * (theta - client_center(c));
    }

    double loss(const Vector& theta) const {
        double acc = 0.0;
        for (int c = 0; c < clients(); ++c) {
            const Vector r = theta - client_center(c);
            acc += 0.5 * r.dot(hessian * r);
        }
        return acc / static_cast<double>(clients());
    }

    Vector grad(const Vector& theta) const {
        Vector g = Vector::Zero(dim());
        for (int c = 0; c < clients(); ++c) g += grad_client(c, theta);
        return g / static_cast<double>(clients());
    }

    /// Global minimizer theta* + mean offset.
    Vector minimizer() const {
        Vector mean = Vector::Zero(dim());
        for (const auto& o : offsets) mean += o;
        return theta_star + mean / static_cast<double>(clients());
    }

    double loss_min() const { return loss(minimizer()); }

private:
    Vector eigenvalues_;
};

struct LossRound {
    double loss = 0.0;
    double grad_norm = 0.0;
    std::int64_t bytes_sent = 0;  // uplink payload this round, exact accounting
};

struct LossTrace {
    std::vector<LossRound> rounds;
    bool aborted = false;
    double mu = 0.0;
    double kappa = 0.0;

    std::int64_t total_bytes() const {
        std::int64_t acc = 0;
        for (const auto& r : rounds) acc += r.bytes_sent;
        return acc;
    }
};

namespace detail {

enum class CommMode { raw, sketched };

/// One engine for both protocols. Each round: K local GD steps per client,
/// clients submit their local improvement delta (sketched or raw), the server
/// averages in client order and scales by eta_global, clients apply the
/// (de-sketched) aggregate. Deterministic in the master seed.
inline LossTrace run_dl(const FedConfig& cfg, const QuadLossModel& model,
                        CommMode comm, bool shared_sketch,
                        const core::SketchEntries* injected) {
    if (cfg.clients != model.clients())
        throw std::invalid_argument("run_dl: client count mismatch");
    if (cfg.clients < 1 || cfg.local_steps < 1 || cfg.rounds < 1)
        throw std::invalid_argument("run_dl: C, K, T >= 1");
    if (cfg.eta_local <= 0.0 || cfg.eta_global <= 0.0)
        throw std::invalid_argument("run_dl: learning rates > 0");
    const Eigen::Index d = model.dim();
    if (comm == CommMode::sketched && !injected && cfg.sketch_dim < 1)
        throw std::invalid_argument("run_dl: sketch dim >= 1");
    if (cfg.theta0 && cfg.theta0->size() != d)
        throw std::invalid_argument("run_dl: theta0 dimension");

    Vector theta = cfg.theta0 ? *cfg.theta0 : Vector::Zero(d);
    const RandomSource root = core::derive_stream(cfg.master_seed, 0);

    LossTrace trace;
    trace.mu = model.mu();
    trace.kappa = model.kappa();
    trace.rounds.reserve(static_cast<std::size_t>(cfg.rounds) + 1);
    trace.rounds.push_back(
        {model.loss(theta), model.grad(theta).norm(), 0});  // pre-training state

    const std::int64_t payload_per_client =
        8 * (comm == CommMode::sketched
                 ? static_cast<std::int64_t>(injected ? injected->rows() : cfg.sketch_dim)
                 : static_cast<std::int64_t>(d));

    core::SketchMatrix sketch;
    for (int round = 0; round < cfg.rounds; ++round) {
        if (comm == CommMode::sketched) {
            if (injected) {
                if (round == 0) sketch = core::SketchMatrix::from_entries(*injected);
            } else if (shared_sketch) {
                if (round == 0)
                    sketch = core::make_sketch(cfg.sketch_dim, d,
                                               core::substream(root, core::salt::sketch, 0));
            } else {
                sketch = core::make_sketch(
                    cfg.sketch_dim, d,
                    core::substream(root, core::salt::sketch,
                                    static_cast<std::uint64_t>(round)));
            }
        }

        // Client phase: K local gradient steps, then the local improvement.
        std::vector<Vector> uplinks(static_cast<std::size_t>(cfg.clients));
        for (int c = 0; c < cfg.clients; ++c) {
            Vector local = theta;
            for (int k = 0; k < cfg.local_steps; ++k)
                local -= cfg.eta_local * model.grad_client(c, local);
            const Vector delta = local - theta;
            uplinks[static_cast<std::size_t>(c)] =
                comm == CommMode::sketched ? Vector(sketch.entries * delta) : delta;
        }

        // Server phase: average in client-index order, scale, broadcast.
        Vector aggregate = uplinks[0];
        for (int c = 1; c < cfg.clients; ++c)
            aggregate += uplinks[static_cast<std::size_t>(c)];
        aggregate *= cfg.eta_global / static_cast<double>(cfg.clients);

        theta += comm == CommMode::sketched
                     ? Vector(sketch.entries.transpose() * aggregate)
                     : aggregate;

        LossRound rec;
        rec.loss = model.loss(theta);
        rec.grad_norm = model.grad(theta).norm();
        rec.bytes_sent = payload_per_client * cfg.clients;
        trace.rounds.push_back(rec);
        if (!(rec.loss < 1e12)) {  // also catches NaN
            trace.aborted = true;
            break;
        }
    }
    return trace;
}

}  // namespace detail

/// Sketched protocol. `shared_sketch` reuses a single matrix for all rounds;
/// otherwise a fresh one is drawn per round.
inline LossTrace run_sketch_dl(const FedConfig& cfg, const QuadLossModel& model,
                               bool shared_sketch) {
    return detail::run_dl(cfg, model, detail::CommMode::sketched, shared_sketch,
                          nullptr);
}

/// Sketched protocol with an explicitly supplied matrix (test hook).
inline LossTrace run_sketch_dl_with(const FedConfig& cfg, const QuadLossModel& model,
                                    const core::SketchEntries& sketch) {
    return detail::run_dl(cfg, model, detail::CommMode::sketched, true, &sketch);
}

/// Uncompressed baseline: clients submit raw deltas.
inline LossTrace run_unsketched_dl(const FedConfig& cfg, const QuadLossModel& model) {
    return detail::run_dl(cfg, model, detail::CommMode::raw, true, nullptr);
}

/// Z(G, H, delta) = A + sqrt(log(1/delta)) B + log(1/delta) C, the sketching
/// guarantee for bilinear forms over two vector sets with widths wG, wH and
/// norm radii d2G, d2H.
struct SketchGuaranteeTerms {
    double a_term = 0.0;
    double b_term = 0.0;
    double c_term = 0.0;
    double z = 0.0;
};

inline SketchGuaranteeTerms sketch_guarantee_terms(double w_g, double w_h, double d2_g,
                                                   double d2_h, Eigen::Index b,
                                                   double delta) {
    if (b < 1) throw std::invalid_argument("sketch_guarantee: b >= 1");
    if (delta <= 0.0 || delta >= 1.0)
        throw std::invalid_argument("sketch_guarantee: delta in (0, 1)");
    if (w_g < 0.0 || w_h < 0.0 || d2_g < 0.0 || d2_h < 0.0)
        throw std::invalid_argument("sketch_guarantee: negative input");
    const double bb = static_cast<double>(b);
    const double rb = std::sqrt(bb);
    SketchGuaranteeTerms terms;
    terms.a_term = w_g * w_h / bb + (w_g * d2_h + w_h * d2_g) / rb;
    terms.b_term = (w_g * d2_h + w_h * d2_g) / bb + d2_g * d2_h / rb;
    terms.c_term = d2_g * d2_h / bb;
    const double log_inv = std::log(1.0 / delta);
    terms.z = terms.a_term + std::sqrt(log_inv) * terms.b_term + log_inv * terms.c_term;
    return terms;
}

inline double sketch_guarantee_bound(double w_g, double w_h, double d2_g, double d2_h,
                                     Eigen::Index b, double delta) {
    return sketch_guarantee_terms(w_g, w_h, d2_g, d2_h, b, delta).z;
}

}  // namespace sketchlab::fedsim
