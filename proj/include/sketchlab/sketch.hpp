#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <utility>

#include "sketchlab/random.hpp"

namespace sketchlab::core {

using Vector = Eigen::VectorXd;
/// Sketch entries live row-major: entry (i, j) holds the (i*d + j)-th draw of
/// its stream, so the layout matches the generation order exactly.
using SketchEntries =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A b x d random projection with i.i.d. entries of variance 1/b, plus the
/// stream it was drawn from so it can be rebuilt bit-exactly.
struct SketchMatrix {
    Eigen::Index rows = 0;  // b
    Eigen::Index cols = 0;  // d
    SketchEntries entries;
    RandomSource seed{};

    static SketchMatrix from_entries(SketchEntries m) {
        if (m.rows() < 1 || m.cols() < 1)
            throw std::invalid_argument("SketchMatrix: empty shape");
        if (!m.allFinite())
            throw std::invalid_argument("SketchMatrix: non-finite entry");
        SketchMatrix s;
        s.rows = m.rows();
        s.cols = m.cols();
        s.entries = std::move(m);
        return s;
    }

    static SketchMatrix identity(Eigen::Index d) {
        return from_entries(SketchEntries::Identity(d, d));
    }
};

/// Draws a b x d Gaussian sketch with entry variance exactly 1/b,
/// deterministic in `src`.
inline SketchMatrix make_sketch(Eigen::Index b, Eigen::Index d,
                                const RandomSource& src) {
    if (b < 1 || d < 1) throw std::invalid_argument("make_sketch: b, d must be >= 1");
    SketchMatrix s;
    s.rows = b;
    s.cols = d;
    s.seed = src;
    s.entries.resize(b, d);
    Xoshiro256 gen(src);
    const double scale = 1.0 / std::sqrt(static_cast<double>(b));
    double* data = s.entries.data();
    const Eigen::Index total = b * d;
    for (Eigen::Index i = 0; i < total; ++i) data[i] = scale * gen.next_gaussian();
    return s;
}

/// sk: R^d -> R^b, x |-> Sx.
inline Vector sk(const SketchMatrix& s, const Vector& x) {
    if (x.size() != s.cols) throw std::invalid_argument("sk: dimension mismatch");
    return s.entries * x;
}

/// desk: R^b -> R^d, y |-> S^T y.
inline Vector desk(const SketchMatrix& s, const Vector& y) {
    if (y.size() != s.rows) throw std::invalid_argument("desk: dimension mismatch");
    return s.entries.transpose() * y;
}

/// <Su, Sv>, the sketched bilinear form.
inline double bilinear(const SketchMatrix& s, const Vector& u, const Vector& v) {
    if (u.size() != s.cols || v.size() != s.cols)
        throw std::invalid_argument("bilinear: dimension mismatch");
    return (s.entries * u).dot(s.entries * v);
}

}  // namespace sketchlab::core
