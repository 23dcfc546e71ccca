#pragma once

#include "ldadam/matrix.hpp"

#include <cstddef>
#include <vector>

namespace ldadam {

// Column-orthonormal n x r matrix. Construction validates max|P'P - I| <= 1e-10.
class OrthonormalBasis {
public:
    explicit OrthonormalBasis(Matrix m);

    std::size_t rows() const { return m_.rows(); }
    std::size_t rank() const { return m_.cols(); }
    const Matrix& matrix() const { return m_; }

    static double orthonormality_defect(const Matrix& m);
    static constexpr double kTolerance = 1e-10;

private:
    Matrix m_;
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_t(const Matrix& a, const Matrix& b);

struct GramSchmidtResult {
    OrthonormalBasis basis;
    int degenerate_columns; // columns replaced by a deterministic substitute
};

// Modified Gram-Schmidt with one re-orthogonalization pass. A column whose
// post-projection norm falls below 1e-12 * (input column norm + 1) is replaced
// by a pseudo-random unit vector seeded from the column index, orthogonalized
// against the kept columns. Deterministic for identical input.
GramSchmidtResult gram_schmidt(const Matrix& m);

// gram_schmidt(B * (B^T * P_prev)). The r-column product is formed first; no
// n x n intermediate exists. B = 0 returns P_prev unchanged.
OrthonormalBasis block_power_iteration_step(const Matrix& b, const OrthonormalBasis& p_prev);

// Top-r left singular vectors via eigendecomposition of the smaller Gram
// matrix. Columns are sign-normalized so the largest-magnitude entry is
// positive; ties in singular values resolve by eigen-solve index order.
OrthonormalBasis truncated_svd(const Matrix& b, std::size_t r);

// ||B - P(P^T B)||_F / ||B||_F in [0, 1]. Throws when ||B||_F = 0.
double residual_ratio(const Matrix& b, const OrthonormalBasis& p);

// Orthogonal n x n matrix whose first r columns equal P.
Matrix orthogonal_complete(const OrthonormalBasis& p);

struct SymmetricEigen {
    std::vector<double> values; // descending
    Matrix vectors;             // columns, matching order
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Deterministic;
// intended for small dense problems (Gram matrices, monitor preconditioners).
SymmetricEigen jacobi_eigh(const Matrix& s);

} // namespace ldadam
