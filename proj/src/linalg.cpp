#include "ldadam/linalg.hpp"

#include "ldadam/kernels.hpp"
#include "ldadam/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ldadam {

namespace {

constexpr std::uint64_t kGramSchmidtSubstituteSeed = 0x6c6461646d677301ull;

const kernels::Kernels& K() { return kernels::active(); }

void require_finite(const Matrix& m, const char* who) {
    if (!m.all_finite()) throw std::invalid_argument(std::string(who) + ": non-finite input");
}

// Working layout for orthogonalization: rows of `vt` (r x n) are the vectors,
// contiguous in memory.
double project_out_rows(Matrix& vt, std::size_t j, std::size_t n) {
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < j; ++i) {
            const double c = K().dot(vt.data() + i * n, vt.data() + j * n, n);
            K().axpby(vt.data() + j * n, -c, vt.data() + i * n, 1.0, n);
        }
    }
    return std::sqrt(K().sumsq(vt.data() + j * n, n));
}

void substitute_row(Matrix& vt, std::size_t j, std::size_t n) {
    for (std::uint32_t attempt = 0;; ++attempt) {
        PhiloxRng rng(kGramSchmidtSubstituteSeed,
                      (static_cast<std::uint64_t>(j) << 16) | attempt);
        for (std::size_t c = 0; c < n; ++c) vt(j, c) = rng.gaussian();
        const double norm = project_out_rows(vt, j, n);
        if (norm > 1e-6) {
            K().div_scalar(vt.data() + j * n, norm, n);
            return;
        }
        if (attempt > 64) throw std::runtime_error("gram_schmidt: substitute failed");
    }
}

} // namespace

double OrthonormalBasis::orthonormality_defect(const Matrix& m) {
    Matrix g = matmul_t(m, m);
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
    return g.max_abs();
}

OrthonormalBasis::OrthonormalBasis(Matrix m) : m_(std::move(m)) {
    if (m_.cols() > m_.rows())
        throw std::invalid_argument("OrthonormalBasis: rank exceeds dimension");
    const double defect = orthonormality_defect(m_);
    if (!(defect <= kTolerance))
        throw std::invalid_argument("OrthonormalBasis: P'P deviates from identity by " +
                                    std::to_string(defect));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
    Matrix c(a.rows(), b.cols());
    K().gemm_nn(c.data(), a.data(), b.data(), a.rows(), a.cols(), b.cols());
    return c;
}

Matrix matmul_t(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("matmul_t: shape mismatch");
    Matrix c(a.cols(), b.cols());
    K().gemm_tn(c.data(), a.data(), b.data(), a.rows(), a.cols(), b.cols());
    return c;
}

GramSchmidtResult gram_schmidt(const Matrix& m) {
    const std::size_t n = m.rows();
    const std::size_t r = m.cols();
    if (r < 1 || n < r) throw std::invalid_argument("gram_schmidt: need n >= r >= 1");
    require_finite(m, "gram_schmidt");

    Matrix vt = m.transposed(); // r x n, one vector per row
    std::vector<double> input_norms(r);
    for (std::size_t j = 0; j < r; ++j)
        input_norms[j] = std::sqrt(K().sumsq(vt.data() + j * n, n));

    int degenerate = 0;
    for (std::size_t j = 0; j < r; ++j) {
        const double norm = project_out_rows(vt, j, n);
        if (norm < 1e-12 * (input_norms[j] + 1.0)) {
            substitute_row(vt, j, n);
            ++degenerate;
        } else {
            K().div_scalar(vt.data() + j * n, norm, n);
        }
    }
    return GramSchmidtResult{OrthonormalBasis(vt.transposed()), degenerate};
}

OrthonormalBasis block_power_iteration_step(const Matrix& b, const OrthonormalBasis& p_prev) {
    if (b.rows() != p_prev.rows())
        throw std::invalid_argument("block_power_iteration_step: shape mismatch");
    require_finite(b, "block_power_iteration_step");
    if (b.frobenius_norm_sq() == 0.0) return p_prev;
    Matrix w = matmul_t(b, p_prev.matrix()); // m x r
    Matrix y = matmul(b, w);                 // n x r
    return gram_schmidt(y).basis;
}

SymmetricEigen jacobi_eigh(const Matrix& s) {
    if (s.rows() != s.cols()) throw std::invalid_argument("jacobi_eigh: not square");
    require_finite(s, "jacobi_eigh");
    const std::size_t d = s.rows();

    Matrix a = s;
    Matrix v = Matrix::identity(d);
    const double scale = std::max(a.max_abs(), 1e-300);

    for (int sweep = 0; sweep < 128; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= 1e-15 * scale * static_cast<double>(d)) break;

        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = t * c;
                for (std::size_t i = 0; i < d; ++i) {
                    const double aip = a(i, p);
                    const double aiq = a(i, q);
                    a(i, p) = c * aip - sn * aiq;
                    a(i, q) = sn * aip + c * aiq;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double api = a(p, i);
                    const double aqi = a(q, i);
                    a(p, i) = c * api - sn * aqi;
                    a(q, i) = sn * api + c * aqi;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double vip = v(i, p);
                    const double viq = v(i, q);
                    v(i, p) = c * vip - sn * viq;
                    v(i, q) = sn * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    SymmetricEigen out{std::vector<double>(d), Matrix(d, d)};
    for (std::size_t j = 0; j < d; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < d; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

OrthonormalBasis truncated_svd(const Matrix& b, std::size_t r) {
    const std::size_t n = b.rows();
    const std::size_t m = b.cols();
    if (r < 1 || r > std::min(n, m)) throw std::invalid_argument("truncated_svd: bad rank");
    require_finite(b, "truncated_svd");

    Matrix p(n, r);
    if (n <= m) {
        Matrix bt = b.transposed();
        Matrix gram = matmul(b, bt); // n x n
        SymmetricEigen eig = jacobi_eigh(gram);
        for (std::size_t j = 0; j < r; ++j)
            for (std::size_t i = 0; i < n; ++i) p(i, j) = eig.vectors(i, j);
    } else {
        Matrix bt = b.transposed();
        Matrix gram = matmul(bt, b); // m x m
        SymmetricEigen eig = jacobi_eigh(gram);
        Matrix vr(m, r);
        for (std::size_t j = 0; j < r; ++j)
            for (std::size_t i = 0; i < m; ++i) vr(i, j) = eig.vectors(i, j);
        // Columns of B*V_r carry the singular values as norms; Gram-Schmidt
        // normalizes and substitutes deterministically when rank(B) < r.
        p = gram_schmidt(matmul(b, vr)).basis.matrix();
    }

    // Sign convention: largest-magnitude entry of each column positive.
    for (std::size_t j = 0; j < r; ++j) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = std::fabs(p(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (p(arg, j) < 0.0)
            for (std::size_t i = 0; i < n; ++i) p(i, j) = -p(i, j);
    }
    return OrthonormalBasis(std::move(p));
}

double residual_ratio(const Matrix& b, const OrthonormalBasis& p) {
    if (b.rows() != p.rows()) throw std::invalid_argument("residual_ratio: shape mismatch");
    const double bsq = b.frobenius_norm_sq();
    if (bsq == 0.0) throw std::invalid_argument("residual_ratio: zero matrix");
    Matrix t = matmul_t(p.matrix(), b); // r x m
    Matrix rec = matmul(p.matrix(), t); // n x m
    K().sub(rec.data(), b.data(), rec.data(), rec.size());
    const double q = std::sqrt(rec.frobenius_norm_sq() / bsq);
    return std::clamp(q, 0.0, 1.0);
}

Matrix orthogonal_complete(const OrthonormalBasis& p) {
    const std::size_t n = p.rows();
    const std::size_t r = p.rank();
    Matrix qt(n, n); // rows are the columns of Q
    for (std::size_t j = 0; j < r; ++j)
        for (std::size_t i = 0; i < n; ++i) qt(j, i) = p.matrix()(i, j);

    std::size_t kept = r;
    const double threshold = 0.5 / std::sqrt(static_cast<double>(n));
    for (std::size_t cand = 0; cand < n && kept < n; ++cand) {
        K().fill(qt.data() + kept * n, 0.0, n);
        qt(kept, cand) = 1.0;
        const double norm = project_out_rows(qt, kept, n);
        if (norm > threshold) {
            K().div_scalar(qt.data() + kept * n, norm, n);
            ++kept;
        }
    }
    while (kept < n) {
        substitute_row(qt, kept, n);
        ++kept;
    }
    return qt.transposed();
}

} // namespace ldadam
