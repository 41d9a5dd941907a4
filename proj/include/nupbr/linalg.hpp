#pragma once

#include "nupbr/core.hpp"

#include <Eigen/SVD>

#include <algorithm>

namespace nupbr {

/// Orthonormal basis (as columns) of ker(A). Singular values below
/// tol * max(1, sigma_max) count as zero.
inline Matrix orthonormal_kernel(const Matrix& A, Eigen::Index dim, double tol = 1e-10) {
    if (A.rows() == 0) return Matrix::Identity(dim, dim);
    require_dim(A.cols(), dim, "orthonormal_kernel");
    Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double smax = s.size() ? s.maxCoeff() : 0.0;
    const double cut = tol * std::max(1.0, smax);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cut) ++rank;
    return svd.matrixV().rightCols(dim - rank);
}

/// Orthonormal basis of the orthogonal complement of span(columns of Q).
inline Matrix orthonormal_complement(const Matrix& Q, Eigen::Index dim) {
    if (Q.cols() == 0) return Matrix::Identity(dim, dim);
    return orthonormal_kernel(Q.transpose(), dim);
}

} // namespace nupbr
