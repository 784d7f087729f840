#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "sketchlab/errors.hpp"
#include "sketchlab/random.hpp"
#include "sketchlab/sets.hpp"
#include "sketchlab/sketch.hpp"

namespace sketchlab::regression {

using core::RandomSource;
using core::SketchMatrix;
using geometry::Matrix;
using geometry::Vector;
using geometry::VectorSet;

/// y_i = <x_i, beta*> + eps_i with eps_i iid N(0, sigma^2).
struct RegressionInstance {
    Matrix x;  // n x d design
    Vector y;
    Vector beta_star;
    double sigma = 0.0;
};

/// Ridge fit in the sketched b-dimensional space plus its de-sketched pullback.
struct SketchedFit {
    SketchMatrix s;
    Vector beta_s;     // b-dimensional estimate
    Vector beta_desk;  // S^T beta_s, exactly
    double lambda = 0.0;
};

/// Draws a standard-Gaussian design (general covariance via `chol_factor`,
/// x = L g) and responses from the linear model. Deterministic in src.
inline RegressionInstance gen_regression(Eigen::Index d, Eigen::Index n,
                                         const Vector& beta_star, double sigma,
                                         const RandomSource& src,
                                         const Matrix* chol_factor = nullptr) {
    if (d < 1 || n < 1) throw std::invalid_argument("gen_regression: n, d >= 1");
    if (beta_star.size() != d)
        throw std::invalid_argument("gen_regression: beta_star dimension");
    if (sigma < 0.0) throw std::invalid_argument("gen_regression: sigma >= 0");
    if (chol_factor && (chol_factor->rows() != d || chol_factor->cols() != d))
        throw std::invalid_argument("gen_regression: covariance factor shape");
    RegressionInstance inst;
    inst.beta_star = beta_star;
    inst.sigma = sigma;
    inst.x.resize(n, d);
    core::Xoshiro256 design(core::substream(src, core::salt::design));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) inst.x(i, j) = design.next_gaussian();
    if (chol_factor) inst.x = inst.x * chol_factor->transpose();
    inst.y = inst.x * beta_star;
    if (sigma > 0.0) {
        core::Xoshiro256 noise(core::substream(src, core::salt::reg_noise));
        for (Eigen::Index i = 0; i < n; ++i) inst.y[i] += sigma * noise.next_gaussian();
    }
    return inst;
}

/// Sketch-and-solve ridge with an explicitly supplied sketch:
/// beta_s = (Xs^T Xs + lambda I)^-1 Xs^T y with Xs rows = S x_i.
inline SketchedFit fit_sketched_with(const RegressionInstance& inst, SketchMatrix s,
                                     double lambda) {
    if (s.cols != inst.x.cols())
        throw std::invalid_argument("fit_sketched_with: sketch width mismatch");
    if (lambda < 0.0) throw std::invalid_argument("fit_sketched_with: lambda >= 0");
    const Matrix xs = inst.x * s.entries.transpose();  // n x b
    Matrix gram = xs.transpose() * xs;
    gram.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success)
        throw NumericFailure("fit_sketched_with: singular normal equations",
                             lambda);
    if (lambda == 0.0) {
        // The pure least-squares path must fail loudly on rank deficiency;
        // a Cholesky pivot collapsing by ~machine epsilon is the witness.
        const auto diag = llt.matrixLLT().diagonal();
        const double lo = diag.minCoeff(), hi = diag.maxCoeff();
        if (!(lo > 0.0) || lo * lo <= 1e-12 * hi * hi)
            throw NumericFailure("fit_sketched_with: singular normal equations", lo);
    }
    SketchedFit fit;
    fit.lambda = lambda;
    fit.beta_s = llt.solve(xs.transpose() * inst.y);
    fit.beta_desk = s.entries.transpose() * fit.beta_s;
    fit.s = std::move(s);
    return fit;
}

/// Sketch-and-solve ridge with a fresh Gaussian sketch drawn from src.
inline SketchedFit fit_sketched(const RegressionInstance& inst, Eigen::Index b,
                                double lambda, const RandomSource& src) {
    if (b < 1) throw std::invalid_argument("fit_sketched: b >= 1");
    return fit_sketched_with(
        inst, core::make_sketch(b, inst.x.cols(), core::substream(src, core::salt::sketch)),
        lambda);
}

/// Numerically safe default ridge level: 1e-6 Tr(Xs^T Xs) / b.
inline double default_ridge_lambda(const RegressionInstance& inst,
                                   const SketchMatrix& s) {
    const Matrix xs = inst.x * s.entries.transpose();
    return 1e-6 * xs.squaredNorm() / static_cast<double>(s.rows);
}

/// max over probes x of |<beta_desk - beta*, x>|.
inline double prediction_error(const SketchedFit& fit, const RegressionInstance& inst,
                               const VectorSet& probes) {
    if (probes.dim != inst.x.cols())
        throw std::invalid_argument("prediction_error: probe dimension mismatch");
    const Vector delta = fit.beta_desk - inst.beta_star;
    double worst = 0.0;
    for (const auto& x : probes.elements)
        worst = std::max(worst, std::abs(delta.dot(x)));
    return worst;
}

/// The additive terms of the de-sketched prediction-error bound, constants 1.
/// Widths of the parameter and probe sets are supplied by the caller.
struct RegressionBoundTerms {
    double lambda_min = 0.0;  // lambda_min(Xs^T Xs), measured
    double noise_term = 0.0;  // sigma/sqrt(lambda_min) (sqrt b + sqrt(2 log(1/delta)))
                              //   * [(1/b) wX^2 + (1/sqrt b) wX]
    double cross_term = 0.0;  // (1/b) wB wX
    double width_term = 0.0;  // (1/sqrt b) (wB + wX)
    double tail_term = 0.0;   // ((1/b)(wB + wX) + 1/sqrt b) sqrt(log(1/delta))
    double total = 0.0;
};

inline RegressionBoundTerms regression_bound_terms(const RegressionInstance& inst,
                                                   const SketchedFit& fit, double w_b,
                                                   double w_x, double delta) {
    if (delta <= 0.0 || delta >= 1.0)
        throw std::invalid_argument("regression_bound_terms: delta in (0, 1)");
    if (w_b < 0.0 || w_x < 0.0)
        throw std::invalid_argument("regression_bound_terms: negative width");
    const double b = static_cast<double>(fit.s.rows);
    const Matrix xs = inst.x * fit.s.entries.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(xs.transpose() * xs);
    const double lambda_min = eig.eigenvalues().minCoeff();
    if (lambda_min <= 0.0)
        throw NumericFailure("regression_bound_terms: lambda_min <= 0", lambda_min);
    const double log_inv_delta = std::log(1.0 / delta);
    RegressionBoundTerms terms;
    terms.lambda_min = lambda_min;
    terms.noise_term = inst.sigma / std::sqrt(lambda_min) *
                       (std::sqrt(b) + std::sqrt(2.0 * log_inv_delta)) *
                       (w_x * w_x / b + w_x / std::sqrt(b));
    terms.cross_term = w_b * w_x / b;
    terms.width_term = (w_b + w_x) / std::sqrt(b);
    terms.tail_term =
        ((w_b + w_x) / b + 1.0 / std::sqrt(b)) * std::sqrt(log_inv_delta);
    terms.total = terms.noise_term + terms.cross_term + terms.width_term +
                  terms.tail_term;
    return terms;
}

}  // namespace sketchlab::regression
