#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ldadam/linalg.hpp"
#include "ldadam/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace ldadam;

namespace {

Matrix random_matrix(std::size_t n, std::size_t m, std::uint64_t seed) {
    PhiloxRng rng(seed, 0);
    Matrix b(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) b(i, j) = rng.gaussian();
    return b;
}

OrthonormalBasis random_basis(std::size_t n, std::size_t r, std::uint64_t seed) {
    return gram_schmidt(random_matrix(n, r, seed)).basis;
}

// Test-only oracle: singular values via one-sided Jacobi on the columns of B.
// Independent of the Gram-matrix eigendecomposition used by truncated_svd.
std::vector<double> singular_values_oracle(const Matrix& b) {
    const std::size_t n = b.rows();
    const std::size_t m = b.cols();
    std::vector<std::vector<double>> col(m, std::vector<double>(n));
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i) col[j][i] = b(i, j);

    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p < m; ++p) {
            for (std::size_t q = p + 1; q < m; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    app += col[p][i] * col[p][i];
                    aqq += col[q][i] * col[q][i];
                    apq += col[p][i] * col[q][i];
                }
                if (std::fabs(apq) <= 1e-15 * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double xp = col[p][i];
                    const double xq = col[q][i];
                    col[p][i] = c * xp - s * xq;
                    col[q][i] = s * xp + c * xq;
                }
            }
        }
        if (!rotated) break;
    }
    std::vector<double> sv(m);
    for (std::size_t j = 0; j < m; ++j) {
        double s2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) s2 += col[j][i] * col[j][i];
        sv[j] = std::sqrt(s2);
    }
    std::sort(sv.begin(), sv.end(), std::greater<>());
    return sv;
}

Matrix compose_svd(const Matrix& u, const std::vector<double>& sigma, const Matrix& v) {
    Matrix us = u;
    for (std::size_t j = 0; j < sigma.size(); ++j)
        for (std::size_t i = 0; i < u.rows(); ++i) us(i, j) *= sigma[j];
    return matmul(us, v.transposed());
}

} // namespace

TEST_CASE("gram_schmidt: identity stays identity") {
    auto res = gram_schmidt(Matrix::identity(2));
    CHECK(res.degenerate_columns == 0);
    CHECK(res.basis.matrix()(0, 0) == doctest::Approx(1.0));
    CHECK(res.basis.matrix()(1, 1) == doctest::Approx(1.0));
    CHECK(res.basis.matrix()(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("gram_schmidt: hand oracle for columns (1,0),(1,1)") {
    Matrix m(2, 2, {1.0, 1.0, 0.0, 1.0});
    auto res = gram_schmidt(m);
    const Matrix& p = res.basis.matrix();
    CHECK(res.degenerate_columns == 0);
    CHECK(p(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p(1, 0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(std::fabs(p(1, 1)) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gram_schmidt: duplicate column takes deterministic substitute") {
    Matrix m(2, 2, {1.0, 1.0, 0.0, 0.0});
    auto res = gram_schmidt(m);
    CHECK(res.degenerate_columns == 1);
    const Matrix& p = res.basis.matrix();
    CHECK(p(0, 0) == doctest::Approx(1.0));
    CHECK(std::fabs(p(1, 1)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(p(0, 1)) < 1e-12);

    auto res2 = gram_schmidt(m);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(res.basis.matrix()(i, j) == res2.basis.matrix()(i, j));
}

TEST_CASE("gram_schmidt: rejects non-finite input") {
    Matrix m(2, 1, {1.0, std::nan("")});
    CHECK_THROWS(gram_schmidt(m));
}

TEST_CASE("orthonormality invariant on random inputs") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        auto basis = random_basis(17, 5, seed);
        CHECK(OrthonormalBasis::orthonormality_defect(basis.matrix()) <= 1e-10);
    }
}

TEST_CASE("block_power_iteration_step: hand oracle diag(3,1)") {
    Matrix b(2, 2, {3.0, 0.0, 0.0, 1.0});
    const double s = 1.0 / std::sqrt(2.0);
    OrthonormalBasis p0(Matrix(2, 1, {s, s}));
    auto p1 = block_power_iteration_step(b, p0);
    const double denom = std::sqrt(82.0);
    CHECK(std::fabs(p1.matrix()(0, 0)) == doctest::Approx(9.0 / denom).epsilon(1e-12));
    CHECK(std::fabs(p1.matrix()(1, 0)) == doctest::Approx(1.0 / denom).epsilon(1e-12));
}

TEST_CASE("block_power_iteration_step: zero matrix keeps subspace") {
    Matrix b(3, 4);
    auto p0 = random_basis(3, 2, 9);
    auto p1 = block_power_iteration_step(b, p0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(p1.matrix()(i, j) == p0.matrix()(i, j));
}

TEST_CASE("block_power_iteration_step: svd basis is a fixed point of the subspace") {
    Matrix b = random_matrix(8, 6, 33);
    auto p_svd = truncated_svd(b, 2);
    auto p1 = block_power_iteration_step(b, p_svd);
    // Same span: residual of one basis against the other is ~0.
    CHECK(residual_ratio(p_svd.matrix(), p1) < 1e-9);
    CHECK(residual_ratio(p1.matrix(), p_svd) < 1e-9);
}

TEST_CASE("block_power_iteration_step: no n x n intermediate at n=4096") {
    Matrix b = random_matrix(4096, 8, 77);
    auto p0 = random_basis(4096, 2, 78);
    alloc_stats::reset();
    auto p1 = block_power_iteration_step(b, p0);
    CHECK(p1.rank() == 2);
    // Budget: transient matrices stay O(n*r + m*r); a 4096 x 4096 product
    // alone would be 16.7M doubles.
    CHECK(alloc_stats::peak_single_allocation() < 200000);
    CHECK(alloc_stats::allocated_doubles() < 400000);
}

TEST_CASE("truncated_svd: diag(4,3) rank 1") {
    Matrix b(2, 2, {4.0, 0.0, 0.0, 3.0});
    auto p = truncated_svd(b, 1);
    CHECK(p.matrix()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.matrix()(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("truncated_svd: identity full rank") {
    auto p = truncated_svd(Matrix::identity(4), 4);
    // Columns are canonical basis vectors up to order; orthonormality plus
    // the positive-sign convention makes every entry 0 or +1.
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const double v = p.matrix()(i, j);
            CHECK((std::fabs(v) < 1e-9 || std::fabs(v - 1.0) < 1e-9));
        }
}

TEST_CASE("truncated_svd: residual energy equals trailing spectrum (5x7)") {
    Matrix b = random_matrix(5, 7, 1234);
    const auto sv = singular_values_oracle(b);
    for (std::size_t r = 1; r <= 4; ++r) {
        auto p = truncated_svd(b, r);
        Matrix t = matmul_t(p.matrix(), b);
        Matrix rec = matmul(p.matrix(), t);
        double resid = 0.0;
        for (std::size_t i = 0; i < b.rows(); ++i)
            for (std::size_t j = 0; j < b.cols(); ++j) {
                const double d = b(i, j) - rec(i, j);
                resid += d * d;
            }
        double tail = 0.0;
        for (std::size_t i = r; i < sv.size(); ++i) tail += sv[i] * sv[i];
        CHECK(resid == doctest::Approx(tail).epsilon(1e-9));
    }
}

TEST_CASE("truncated_svd: tall input goes through the small Gram matrix") {
    Matrix b = random_matrix(9, 4, 555);
    auto p = truncated_svd(b, 3);
    CHECK(p.rows() == 9);
    CHECK(p.rank() == 3);
    const auto sv = singular_values_oracle(b);
    const double q = residual_ratio(b, p);
    double total = 0.0, tail = sv[3] * sv[3];
    for (double s : sv) total += s * s;
    CHECK(q == doctest::Approx(std::sqrt(tail / total)).epsilon(1e-9));
}

TEST_CASE("truncated_svd: rejects non-finite and bad rank") {
    Matrix b(2, 2, {1.0, 0.0, 0.0, std::numeric_limits<double>::infinity()});
    CHECK_THROWS(truncated_svd(b, 1));
    Matrix ok(2, 2, {1.0, 0.0, 0.0, 1.0});
    CHECK_THROWS(truncated_svd(ok, 3));
    CHECK_THROWS(truncated_svd(ok, 0));
}

TEST_CASE("residual_ratio: hand oracle diag(4,3) top-1 gives 0.6") {
    Matrix b(2, 2, {4.0, 0.0, 0.0, 3.0});
    auto p = truncated_svd(b, 1);
    CHECK(residual_ratio(b, p) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("residual_ratio: full capture is 0, orthogonal capture is 1") {
    Matrix b(3, 2, {1.0, 0.0, 0.0, 1.0, 0.0, 0.0});
    OrthonormalBasis span(Matrix(3, 2, {1.0, 0.0, 0.0, 1.0, 0.0, 0.0}));
    CHECK(residual_ratio(b, span) == doctest::Approx(0.0).epsilon(1e-14));
    OrthonormalBasis ortho(Matrix(3, 1, {0.0, 0.0, 1.0}));
    CHECK(residual_ratio(b, ortho) == doctest::Approx(1.0).epsilon(1e-14));
    Matrix z(3, 2);
    CHECK_THROWS(residual_ratio(z, span));
}

TEST_CASE("svd optimality: no rank-r basis beats the svd residual") {
    Matrix b = random_matrix(6, 9, 2024);
    auto p_svd = truncated_svd(b, 2);
    const double q_star = residual_ratio(b, p_svd);
    for (std::uint64_t s = 0; s < 100; ++s) {
        auto p = random_basis(6, 2, 3000 + s);
        CHECK(q_star <= residual_ratio(b, p) + 1e-12);
    }
}

TEST_CASE("power iteration drives residual to the svd optimum") {
    // Distinct singular values with a solid gap make the iteration contract.
    const std::size_t n = 12, m = 10, r = 3;
    auto u = random_basis(n, std::min(n, m), 71);
    auto v = random_basis(m, std::min(n, m), 72);
    std::vector<double> sigma(std::min(n, m));
    for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] = std::pow(0.8, double(i));
    Matrix b = compose_svd(u.matrix(), sigma, v.matrix());

    auto p = random_basis(n, r, 73);
    const double q_star = residual_ratio(b, truncated_svd(b, r));
    double prev_q = residual_ratio(b, p);
    for (int it = 0; it < 50; ++it) {
        p = block_power_iteration_step(b, p);
        const double q = residual_ratio(b, p);
        CHECK(q <= prev_q + 1e-12); // monotone within slack
        prev_q = q;
    }
    CHECK(prev_q <= q_star + 1e-6);
}

TEST_CASE("orthogonal_complete: e1 in R^2 gives identity up to sign") {
    OrthonormalBasis p(Matrix(2, 1, {1.0, 0.0}));
    Matrix q = orthogonal_complete(p);
    CHECK(q(0, 0) == doctest::Approx(1.0));
    CHECK(q(1, 0) == doctest::Approx(0.0));
    CHECK(std::fabs(q(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("orthogonal_complete: defining property on random bases") {
    for (std::uint64_t seed = 40; seed < 44; ++seed) {
        auto p = random_basis(11, 3, seed);
        Matrix q = orthogonal_complete(p);
        CHECK(OrthonormalBasis::orthonormality_defect(q) <= 1e-10);
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t i = 0; i < 11; ++i)
                CHECK(q(i, j) == p.matrix()(i, j));
    }
}

TEST_CASE("orthogonal_complete: top-1 of diag(4,3) completes to identity") {
    Matrix b(2, 2, {4.0, 0.0, 0.0, 3.0});
    Matrix q = orthogonal_complete(truncated_svd(b, 1));
    CHECK(std::fabs(q(0, 0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(q(1, 1)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(q(0, 1)) < 1e-10);
    CHECK(std::fabs(q(1, 0)) < 1e-10);
}

TEST_CASE("jacobi_eigh recovers a planted spectrum") {
    auto q = random_basis(7, 7, 90);
    std::vector<double> lam = {9.0, 4.0, 1.0, 0.5, 0.25, -1.0, -3.0};
    Matrix d(7, 7);
    for (std::size_t i = 0; i < 7; ++i) d(i, i) = lam[i];
    Matrix s = matmul(matmul(q.matrix(), d), q.matrix().transposed());
    auto eig = jacobi_eigh(s);
    std::vector<double> expect = lam;
    std::sort(expect.begin(), expect.end(), std::greater<>());
    for (std::size_t i = 0; i < 7; ++i)
        CHECK(eig.values[i] == doctest::Approx(expect[i]).epsilon(1e-10));
    CHECK(OrthonormalBasis::orthonormality_defect(eig.vectors) <= 1e-10);
}
