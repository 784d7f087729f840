#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "sketchlab/geometry.hpp"
#include "sketchlab/random.hpp"
#include "sketchlab/sets.hpp"
#include "sketchlab/stats.hpp"

namespace sketchlab::chaos {

using geometry::Matrix;
using geometry::MatrixSet;
using geometry::Vector;

/// Distribution summary of a Monte-Carlo deviation study.
struct DeviationSummary {
    std::size_t n_samples = 0;
    double mean = 0.0;
    std::map<double, double> quantiles;  // level -> value, monotone in level
    std::map<double, double> lp_norms;   // p -> (E|X|^p)^(1/p), monotone in p
};

/// The constants of the uniform deviation tail bounds.
struct BoundTriple {
    double W = 0.0;
    double V = 0.0;
    double U = 0.0;
    double c1 = 1.0;
    double c2 = 1.0 / 64.0;
};

/// Tr(M^T N), the expectation of xi^T M^T N xi for unit-variance
/// independent coordinates. Both matrices stored m x n.
inline double quadratic_mean(const Matrix& m, const Matrix& n) {
    if (m.rows() != n.rows() || m.cols() != n.cols())
        throw std::invalid_argument("quadratic_mean: shape mismatch");
    return (m.array() * n.array()).sum();
}

namespace detail {

/// |xi^T M^T N xi - Tr(M^T N)| for one pair, via the matvec route.
inline double pair_deviation(const Matrix& m, const Matrix& n, const Vector& xi) {
    return std::abs((m * xi).dot(n * xi) - quadratic_mean(m, n));
}

/// Signed xi^T M^T N xi - Tr(M^T N) summed over T draws.
inline double pair_deviation_sum(const Matrix& m, const Matrix& n,
                                 const std::vector<Vector>& xis) {
    const double expected = quadratic_mean(m, n);
    double acc = 0.0;
    for (const auto& xi : xis) acc += (m * xi).dot(n * xi) - expected;
    return std::abs(acc);
}

inline void check_cross_dims(const MatrixSet& ms, const MatrixSet& ns,
                             const Vector& xi) {
    if (ms.cols != ns.cols || ms.rows != ns.rows)
        throw std::invalid_argument("deviation: set shapes mismatch");
    if (xi.size() != ms.cols)
        throw std::invalid_argument("deviation: xi dimension mismatch");
}

}  // namespace detail

/// sup_{M,N} |xi^T M^T N xi - Tr(M^T N)| by exhaustive pair enumeration.
inline double deviation_cross(const MatrixSet& ms, const MatrixSet& ns,
                              const Vector& xi) {
    detail::check_cross_dims(ms, ns, xi);
    std::vector<Vector> mxi(ms.size()), nxi(ns.size());
    for (std::size_t i = 0; i < ms.size(); ++i) mxi[i] = ms.elements[i] * xi;
    for (std::size_t j = 0; j < ns.size(); ++j) nxi[j] = ns.elements[j] * xi;
    double sup = 0.0;
    for (std::size_t i = 0; i < ms.size(); ++i)
        for (std::size_t j = 0; j < ns.size(); ++j)
            sup = std::max(sup, std::abs(mxi[i].dot(nxi[j]) -
                                         quadratic_mean(ms.elements[i],
                                                        ns.elements[j])));
    return sup;
}

/// Single-set deviation sup_A | ||A xi||^2 - ||A||_F^2 |. Uses the same
/// per-pair kernel as deviation_cross so the M = N specialisation is exact.
inline double deviation_single(const MatrixSet& as, const Vector& xi) {
    if (xi.size() != as.cols)
        throw std::invalid_argument("deviation_single: xi dimension mismatch");
    double sup = 0.0;
    for (const auto& a : as.elements)
        sup = std::max(sup, detail::pair_deviation(a, a, xi));
    return sup;
}

/// sup_{M,N} |sum_t (xi_t^T M^T N xi_t - Tr(M^T N))| over a batch of draws.
inline double deviation_sum(const MatrixSet& ms, const MatrixSet& ns,
                            const std::vector<Vector>& xis) {
    if (xis.empty()) throw std::invalid_argument("deviation_sum: empty batch");
    for (const auto& xi : xis)
        if (xi.size() != xis.front().size())
            throw std::invalid_argument("deviation_sum: ragged xi batch");
    detail::check_cross_dims(ms, ns, xis.front());
    double sup = 0.0;
    for (const auto& m : ms.elements)
        for (const auto& n : ns.elements)
            sup = std::max(sup, detail::pair_deviation_sum(m, n, xis));
    return sup;
}

/// Off-diagonal part: sup_{M,N} |sum_{j != k} xi_j xi_k (M^T N)_{jk}|.
/// The indices run over the xi coordinates, i.e. over the n coordinate
/// slices of M and N whose pairwise inner products form M^T N.
inline double offdiag_term(const MatrixSet& ms, const MatrixSet& ns,
                           const Vector& xi) {
    detail::check_cross_dims(ms, ns, xi);
    const Eigen::Index n = xi.size();
    double sup = 0.0;
    for (const auto& m : ms.elements) {
        for (const auto& nn : ns.elements) {
            const Matrix g = m.transpose() * nn;
            double acc = 0.0;
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index k = 0; k < n; ++k)
                    if (j != k) acc += xi[j] * xi[k] * g(j, k);
            sup = std::max(sup, std::abs(acc));
        }
    }
    return sup;
}

/// Diagonal part: sup_{M,N} |sum_j (xi_j^2 - 1) (M^T N)_{jj}|, with the
/// unit-variance centering taken exactly (not estimated).
inline double diag_term(const MatrixSet& ms, const MatrixSet& ns, const Vector& xi) {
    detail::check_cross_dims(ms, ns, xi);
    const Eigen::Index n = xi.size();
    double sup = 0.0;
    for (const auto& m : ms.elements) {
        for (const auto& nn : ns.elements) {
            double acc = 0.0;
            for (Eigen::Index j = 0; j < n; ++j)
                acc += (xi[j] * xi[j] - 1.0) * m.col(j).dot(nn.col(j));
            sup = std::max(sup, std::abs(acc));
        }
    }
    return sup;
}

/// (mean |x|^p)^(1/p).
inline double lp_norm_estimate(const std::vector<double>& samples, double p) {
    if (samples.empty()) throw std::invalid_argument("lp_norm_estimate: empty");
    if (p < 1.0) throw std::invalid_argument("lp_norm_estimate: p must be >= 1");
    double acc = 0.0;
    for (double x : samples) acc += std::pow(std::abs(x), p);
    return std::pow(acc / static_cast<double>(samples.size()), 1.0 / p);
}

/// W, V, U for cross inner products over a pair of sets.
inline BoundTriple bound_triple(const geometry::ComplexityProfile& m,
                                const geometry::ComplexityProfile& n, double c1,
                                double c2) {
    BoundTriple bt;
    bt.W = m.gamma2_upper * (n.gamma2_upper + n.d_F) +
           n.gamma2_upper * (m.gamma2_upper + m.d_F);
    bt.V = m.gamma2_upper * n.d_op + n.gamma2_upper * m.d_op +
           std::min(m.d_F * n.d_op, n.d_F * m.d_op);
    bt.U = m.d_op * n.d_op;
    bt.c1 = c1;
    bt.c2 = c2;
    return bt;
}

/// W, V, U of the single-set bound (the M = N structure).
inline BoundTriple single_set_bound(const geometry::ComplexityProfile& p, double c1,
                                    double c2) {
    BoundTriple bt;
    bt.W = p.gamma2_upper * (p.gamma2_upper + p.d_F) + p.d_F * p.d_op;
    bt.V = p.d_op * (p.gamma2_upper + p.d_F);
    bt.U = p.d_op * p.d_op;
    bt.c1 = c1;
    bt.c2 = c2;
    return bt;
}

namespace detail {

inline double clipped_tail(double prefactor, double c2, double sq_term,
                           double lin_term) {
    // min over the defined terms; an absent (zero-denominator) term is +inf.
    const double inf = std::numeric_limits<double>::infinity();
    const double exponent = std::min(sq_term < 0 ? inf : sq_term,
                                     lin_term < 0 ? inf : lin_term);
    if (std::isinf(exponent)) return 0.0;
    return std::min(1.0, prefactor * std::exp(-c2 * exponent));
}

}  // namespace detail

/// P(C >= c1 W + eps) <= min(1, 2 exp(-c2 min(eps^2/V^2, eps/U))).
inline double tail_bound(const BoundTriple& bt, double eps) {
    if (eps < 0.0) throw std::invalid_argument("tail_bound: negative eps");
    if (eps == 0.0) return 1.0;
    const double sq = bt.V > 0.0 ? (eps * eps) / (bt.V * bt.V) : -1.0;
    const double lin = bt.U > 0.0 ? eps / bt.U : -1.0;
    return detail::clipped_tail(2.0, bt.c2, sq, lin);
}

/// Tail of the sum of T independent quadratic forms:
/// P(C >= c1 W sqrt(T) + eps) <= min(1, exp(-c2 min(eps^2/(T V^2), eps/(sqrt(T) U)))).
inline double sum_tail_bound(const BoundTriple& bt, int t_rounds, double eps) {
    if (t_rounds < 1) throw std::invalid_argument("sum_tail_bound: T must be >= 1");
    if (eps < 0.0) throw std::invalid_argument("sum_tail_bound: negative eps");
    if (eps == 0.0) return 1.0;
    const double t = static_cast<double>(t_rounds);
    const double sq = bt.V > 0.0 ? (eps * eps) / (t * bt.V * bt.V) : -1.0;
    const double lin = bt.U > 0.0 ? eps / (std::sqrt(t) * bt.U) : -1.0;
    return detail::clipped_tail(1.0, bt.c2, sq, lin);
}

/// Hanson-Wright tail for a single fixed matrix, prefactor pinned to 2.
inline double hanson_wright_tail(const Matrix& a, double eps, double c) {
    if (eps < 0.0) throw std::invalid_argument("hanson_wright_tail: negative eps");
    if (c <= 0.0) throw std::invalid_argument("hanson_wright_tail: c must be > 0");
    if (eps == 0.0) return 1.0;
    const Matrix gram = a.transpose() * a;
    const double frob = gram.norm();
    if (frob == 0.0) return 0.0;  // zero matrix: deviation impossible
    const MatrixSet single({gram});
    const double op = geometry::operator_radius(single);
    const double sq = (eps * eps) / (frob * frob);
    const double lin = eps / op;
    return std::min(1.0, 2.0 * std::exp(-c * std::min(sq, lin)));
}

/// One deviation sample per trial: a fresh batch of T xi draws from the
/// trial's derived stream, reduced through deviation_sum (T = 1 reproduces
/// deviation_cross). Deterministic in `src` and in trial order.
inline std::vector<double> sample_deviations(const MatrixSet& ms, const MatrixSet& ns,
                                             core::DistributionKind kind,
                                             std::size_t n_trials, int t_rounds,
                                             const core::RandomSource& src) {
    if (t_rounds < 1) throw std::invalid_argument("sample_deviations: T >= 1");
    std::vector<double> values(n_trials);
    const Eigen::Index n = ms.cols;
    for (std::size_t trial = 0; trial < n_trials; ++trial) {
        core::Xoshiro256 gen(core::substream(src, core::salt::xi_draw, trial));
        std::vector<Vector> xis(static_cast<std::size_t>(t_rounds), Vector(n));
        for (auto& xi : xis)
            gen.fill(kind, std::span<double>(xi.data(), static_cast<std::size_t>(n)));
        values[trial] = deviation_sum(ms, ns, xis);
    }
    return values;
}

/// Summarises samples at the given quantile levels and L_p orders.
inline DeviationSummary summarize(const std::vector<double>& samples,
                                  const std::vector<double>& levels = {0.5, 0.9, 0.99},
                                  const std::vector<double>& orders = {1, 2, 4, 8}) {
    if (samples.size() < 2) throw std::invalid_argument("summarize: need >= 2 samples");
    DeviationSummary s;
    s.n_samples = samples.size();
    s.mean = stats::mean(samples);
    for (double level : levels) s.quantiles[level] = stats::quantile(samples, level);
    for (double p : orders) s.lp_norms[p] = lp_norm_estimate(samples, p);
    return s;
}

/// Monte-Carlo harness over (Ms, Ns): n_trials independent deviation samples
/// summarised into a DeviationSummary.
inline DeviationSummary mc_deviation_study(const MatrixSet& ms, const MatrixSet& ns,
                                           core::DistributionKind kind,
                                           std::size_t n_trials, int t_rounds,
                                           const core::RandomSource& src) {
    if (n_trials < 2) throw std::invalid_argument("mc_deviation_study: n_trials >= 2");
    return summarize(sample_deviations(ms, ns, kind, n_trials, t_rounds, src));
}

}  // namespace sketchlab::chaos
