#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

#include "sketchlab/sets.hpp"
#include "sketchlab/sketch.hpp"

namespace sketchlab::embedding {

using core::SketchMatrix;
using geometry::Vector;
using geometry::VectorSet;

/// Result of a norm- or inner-product-preservation check. Distortions are
/// normalized (by ||u||^2, resp. ||u|| ||v||) so eps keeps its meaning for
/// non-unit vectors. Zero vectors are skipped and counted, not errors.
struct EmbeddingReport {
    double eps = 0.0;
    double max_norm_distortion = 0.0;
    double max_inner_distortion = 0.0;
    bool passed = false;
    std::pair<std::size_t, std::size_t> worst_pair{0, 0};
    double worst_value = 0.0;
    std::size_t n_skipped = 0;
};

/// Checks (1 - eps) ||u||^2 <= ||Su||^2 <= (1 + eps) ||u||^2 over the set.
inline EmbeddingReport check_rip(const SketchMatrix& s, const VectorSet& set,
                                 double eps) {
    if (eps <= 0.0 || eps > 1.0)
        throw std::invalid_argument("check_rip: eps must be in (0, 1]");
    if (set.dim != s.cols) throw std::invalid_argument("check_rip: dim mismatch");
    EmbeddingReport report;
    report.eps = eps;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const Vector& u = set.elements[i];
        const double nsq = u.squaredNorm();
        if (nsq == 0.0) {
            ++report.n_skipped;
            continue;
        }
        ++checked;
        const double distortion = std::abs((s.entries * u).squaredNorm() - nsq) / nsq;
        if (distortion >= report.max_norm_distortion) {
            report.max_norm_distortion = distortion;
            report.worst_pair = {i, i};
            report.worst_value = distortion;
        }
    }
    if (checked == 0) throw std::invalid_argument("check_rip: all vectors are zero");
    report.passed = report.max_norm_distortion <= eps;
    return report;
}

/// Checks |<Su, Sv> - <u, v>| <= eps ||u|| ||v|| over all pairs of U x V.
inline EmbeddingReport check_inner_products(const SketchMatrix& s, const VectorSet& u_set,
                                            const VectorSet& v_set, double eps) {
    if (eps <= 0.0 || eps > 1.0)
        throw std::invalid_argument("check_inner_products: eps must be in (0, 1]");
    if (u_set.dim != s.cols || v_set.dim != s.cols)
        throw std::invalid_argument("check_inner_products: dim mismatch");
    EmbeddingReport report;
    report.eps = eps;
    std::vector<Vector> su(u_set.size()), sv(v_set.size());
    for (std::size_t i = 0; i < u_set.size(); ++i) su[i] = s.entries * u_set.elements[i];
    for (std::size_t j = 0; j < v_set.size(); ++j) sv[j] = s.entries * v_set.elements[j];
    std::size_t checked = 0;
    for (std::size_t i = 0; i < u_set.size(); ++i) {
        const double nu = u_set.elements[i].norm();
        if (nu == 0.0) {
            ++report.n_skipped;
            continue;
        }
        for (std::size_t j = 0; j < v_set.size(); ++j) {
            const double nv = v_set.elements[j].norm();
            if (nv == 0.0) continue;
            ++checked;
            const double distortion =
                std::abs(su[i].dot(sv[j]) - u_set.elements[i].dot(v_set.elements[j])) /
                (nu * nv);
            if (distortion >= report.max_inner_distortion) {
                report.max_inner_distortion = distortion;
                report.worst_pair = {i, j};
                report.worst_value = distortion;
            }
        }
    }
    if (checked == 0)
        throw std::invalid_argument("check_inner_products: no nonzero pair");
    report.passed = report.max_inner_distortion <= eps;
    return report;
}

/// Sketch rows sufficient for norm preservation of N points:
/// ceil(c * eps^-2 * ln N).
inline int jlt_required_dim(double eps, int n_points, double c) {
    if (eps <= 0.0 || eps > 1.0)
        throw std::invalid_argument("jlt_required_dim: eps must be in (0, 1]");
    if (n_points < 2) throw std::invalid_argument("jlt_required_dim: N must be >= 2");
    if (c <= 0.0) throw std::invalid_argument("jlt_required_dim: c must be > 0");
    return static_cast<int>(
        std::ceil(c / (eps * eps) * std::log(static_cast<double>(n_points))));
}

/// Sketch rows sufficient for inner-product preservation:
/// ceil(c * eps^-2 * (wU + wV)^2), floored at 1 when both widths vanish.
inline int inner_required_dim(double eps, double width_u, double width_v, double c) {
    if (eps <= 0.0 || eps > 1.0)
        throw std::invalid_argument("inner_required_dim: eps must be in (0, 1]");
    if (width_u < 0.0 || width_v < 0.0)
        throw std::invalid_argument("inner_required_dim: negative width");
    if (c <= 0.0) throw std::invalid_argument("inner_required_dim: c must be > 0");
    const double sum = width_u + width_v;
    if (sum == 0.0) return 1;
    return static_cast<int>(std::max(1.0, std::ceil(c / (eps * eps) * sum * sum)));
}

}  // namespace sketchlab::embedding
