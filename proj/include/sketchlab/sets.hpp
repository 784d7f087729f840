#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sketchlab/random.hpp"

namespace sketchlab::geometry {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Finite indexed collection of d-vectors over which suprema are taken.
struct VectorSet {
    Eigen::Index dim = 0;
    std::vector<Vector> elements;

    VectorSet() = default;

    explicit VectorSet(std::vector<Vector> elems) : elements(std::move(elems)) {
        if (elements.empty())
            throw std::invalid_argument("VectorSet: empty element list");
        dim = elements.front().size();
        for (const auto& v : elements) {
            if (v.size() != dim)
                throw std::invalid_argument("VectorSet: inconsistent dimensions");
            if (!v.allFinite())
                throw std::invalid_argument("VectorSet: non-finite entry");
        }
    }

    std::size_t size() const { return elements.size(); }
};

/// Finite indexed collection of m x n matrices with uniform shape.
struct MatrixSet {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    std::vector<Matrix> elements;

    MatrixSet() = default;

    explicit MatrixSet(std::vector<Matrix> elems) : elements(std::move(elems)) {
        if (elements.empty())
            throw std::invalid_argument("MatrixSet: empty element list");
        rows = elements.front().rows();
        cols = elements.front().cols();
        for (const auto& m : elements) {
            if (m.rows() != rows || m.cols() != cols)
                throw std::invalid_argument("MatrixSet: inconsistent shapes");
            if (!m.allFinite())
                throw std::invalid_argument("MatrixSet: non-finite entry");
        }
    }

    std::size_t size() const { return elements.size(); }
};

/// `count` random unit vectors in R^dim, one per derived substream.
inline VectorSet random_unit_vectors(Eigen::Index dim, std::size_t count,
                                     const core::RandomSource& src) {
    std::vector<Vector> elems;
    elems.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        core::Xoshiro256 gen(core::substream(src, core::salt::misc, i));
        Vector v(dim);
        do {
            for (Eigen::Index j = 0; j < dim; ++j) v[j] = gen.next_gaussian();
        } while (v.norm() == 0.0);
        v /= v.norm();
        elems.push_back(std::move(v));
    }
    return VectorSet(std::move(elems));
}

/// `count` random m x n matrices with i.i.d. N(0, scale^2) entries.
inline MatrixSet random_matrix_set(Eigen::Index m, Eigen::Index n, std::size_t count,
                                   double scale, const core::RandomSource& src) {
    std::vector<Matrix> elems;
    elems.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        core::Xoshiro256 gen(core::substream(src, core::salt::misc, i));
        Matrix a(m, n);
        for (Eigen::Index r = 0; r < m; ++r)
            for (Eigen::Index c = 0; c < n; ++c) a(r, c) = scale * gen.next_gaussian();
        elems.push_back(std::move(a));
    }
    return MatrixSet(std::move(elems));
}

}  // namespace sketchlab::geometry
