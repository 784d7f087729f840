#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sketchlab/errors.hpp"
#include "sketchlab/random.hpp"
#include "sketchlab/sets.hpp"
#include "sketchlab/stats.hpp"

namespace sketchlab::geometry {

/// Complexity measures of one finite set: Frobenius/operator radii, the
/// Monte-Carlo Gaussian width with its standard error, and the width-based
/// surrogate for the chaining functional.
struct ComplexityProfile {
    double d_F = 0.0;
    double d_op = 0.0;
    double width_mean = 0.0;
    double width_stderr = 0.0;
    double gamma2_upper = 0.0;
    std::size_t n_mc = 0;
};

/// Largest Frobenius norm over the set.
inline double frobenius_radius(const MatrixSet& set) {
    double best = 0.0;
    for (const auto& a : set.elements) best = std::max(best, a.norm());
    return best;
}

namespace detail {

/// Top singular value of `a` by power iteration on A^T A from `start`.
/// Returns the estimate and whether the tolerance was met.
inline std::pair<double, bool> power_iteration(const Matrix& a, Vector v, double tol,
                                               int max_iter) {
    const double vnorm = v.norm();
    if (vnorm == 0.0) throw std::invalid_argument("power_iteration: zero start");
    v /= vnorm;
    double estimate = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Vector w = a.transpose() * (a * v);
        const double wnorm = w.norm();
        if (wnorm == 0.0) return {0.0, true};  // v in the kernel; sigma = 0
        const double next = v.dot(w);          // Rayleigh quotient for sigma^2
        v = w / wnorm;
        if (it > 0 && std::abs(next - estimate) <= tol * std::max(next, 1e-300))
            return {std::sqrt(std::max(0.0, next)), true};
        estimate = next;
    }
    return {std::sqrt(std::max(0.0, estimate)), false};
}

}  // namespace detail

/// Largest operator (spectral) norm over the set, each element resolved by
/// power iteration to relative tolerance `tol`. A deterministic all-ones
/// start is used, cross-checked by a seeded random restart so a start vector
/// orthogonal to the top singular direction cannot go unnoticed.
inline double operator_radius(const MatrixSet& set, double tol = 1e-8,
                              int max_iter = 10000) {
    if (tol <= 0.0) throw std::invalid_argument("operator_radius: tol must be > 0");
    double best = 0.0;
    for (std::size_t idx = 0; idx < set.elements.size(); ++idx) {
        const Matrix& a = set.elements[idx];
        if (a.norm() == 0.0) continue;
        auto [ones_est, ones_ok] = detail::power_iteration(
            a, Vector::Ones(a.cols()), tol, max_iter);
        core::Xoshiro256 gen(core::derive_stream(0x706f7765ULL, idx));
        Vector r(a.cols());
        for (Eigen::Index j = 0; j < r.size(); ++j) r[j] = gen.next_gaussian();
        auto [rand_est, rand_ok] = detail::power_iteration(a, r, tol, max_iter);
        if (!ones_ok && !rand_ok)
            throw NumericFailure("operator_radius: power iteration did not converge",
                                 std::max(ones_est, rand_est));
        best = std::max(best, std::max(ones_est, rand_est));
    }
    return best;
}

/// Per-draw suprema sup_t <g, t> over n_mc standard Gaussian draws. Draw i
/// uses its own derived stream, so the result is independent of how the loop
/// is partitioned and supersets share draws with subsets.
inline std::vector<double> width_samples_vectors(const VectorSet& set,
                                                 std::size_t n_mc,
                                                 const core::RandomSource& src) {
    std::vector<double> sups(n_mc);
    Vector g(set.dim);
    for (std::size_t i = 0; i < n_mc; ++i) {
        core::Xoshiro256 gen(core::substream(src, core::salt::width_draw, i));
        for (Eigen::Index j = 0; j < g.size(); ++j) g[j] = gen.next_gaussian();
        double sup = set.elements.front().dot(g);
        for (std::size_t k = 1; k < set.elements.size(); ++k)
            sup = std::max(sup, set.elements[k].dot(g));
        sups[i] = sup;
    }
    return sups;
}

/// Per-draw suprema sup_A |Tr(G^T A)| over Gaussian matrices G.
inline std::vector<double> width_samples_matrices(const MatrixSet& set,
                                                  std::size_t n_mc,
                                                  const core::RandomSource& src) {
    std::vector<double> sups(n_mc);
    Matrix g(set.rows, set.cols);
    for (std::size_t i = 0; i < n_mc; ++i) {
        core::Xoshiro256 gen(core::substream(src, core::salt::width_draw, i));
        for (Eigen::Index r = 0; r < g.rows(); ++r)
            for (Eigen::Index c = 0; c < g.cols(); ++c) g(r, c) = gen.next_gaussian();
        double sup = 0.0;
        for (const auto& a : set.elements)
            sup = std::max(sup, std::abs((g.array() * a.array()).sum()));
        sups[i] = sup;
    }
    return sups;
}

struct WidthEstimate {
    double mean = 0.0;
    double std_err = 0.0;
};

/// Monte-Carlo Gaussian width E sup_t <g, t> of a finite vector set.
inline WidthEstimate gaussian_width_vectors(const VectorSet& set, std::size_t n_mc,
                                            const core::RandomSource& src) {
    if (n_mc < 2) throw std::invalid_argument("gaussian_width_vectors: n_mc >= 2");
    const auto sups = width_samples_vectors(set, n_mc, src);
    return {stats::mean(sups), stats::stderr_of_mean(sups)};
}

/// Monte-Carlo Gaussian width E sup_A |Tr(G^T A)| of a finite matrix set.
inline WidthEstimate gaussian_width_matrices(const MatrixSet& set, std::size_t n_mc,
                                             const core::RandomSource& src) {
    if (n_mc < 2) throw std::invalid_argument("gaussian_width_matrices: n_mc >= 2");
    const auto sups = width_samples_matrices(set, n_mc, src);
    return {stats::mean(sups), stats::stderr_of_mean(sups)};
}

/// Closed-form width bound for a finite set: (max norm) * sqrt(2 ln N).
inline double finite_width_bound(const VectorSet& set) {
    if (set.size() == 1) return 0.0;
    double max_norm = 0.0;
    for (const auto& v : set.elements) max_norm = std::max(max_norm, v.norm());
    return max_norm * std::sqrt(2.0 * std::log(static_cast<double>(set.size())));
}

/// Width-based surrogate for the chaining functional: c_width * width.
inline double gamma2_upper(double width_mean, double c_width) {
    if (c_width <= 0.0) throw std::invalid_argument("gamma2_upper: c_width > 0");
    return c_width * width_mean;
}

/// Full complexity profile of a matrix set (radii + MC width + surrogate).
inline ComplexityProfile profile_matrix_set(const MatrixSet& set, std::size_t n_mc,
                                            const core::RandomSource& src,
                                            double c_width = 1.0,
                                            double op_tol = 1e-8,
                                            int op_max_iter = 10000) {
    ComplexityProfile p;
    p.d_F = frobenius_radius(set);
    p.d_op = operator_radius(set, op_tol, op_max_iter);
    const auto w = gaussian_width_matrices(set, n_mc, src);
    p.width_mean = w.mean;
    p.width_stderr = w.std_err;
    p.gamma2_upper = gamma2_upper(w.mean, c_width);
    p.n_mc = n_mc;
    return p;
}

}  // namespace sketchlab::geometry
