#include "ldadam/matrix.hpp"

#include "ldadam/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace ldadam {

namespace alloc_stats {
namespace {
thread_local std::uint64_t g_allocated = 0;
thread_local std::uint64_t g_peak_single = 0;

void record(std::uint64_t doubles) {
    g_allocated += doubles;
    if (doubles > g_peak_single) g_peak_single = doubles;
}
} // namespace

std::uint64_t allocated_doubles() { return g_allocated; }
std::uint64_t peak_single_allocation() { return g_peak_single; }
void reset() {
    g_allocated = 0;
    g_peak_single = 0;
}
} // namespace alloc_stats

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), d_(rows * cols, 0.0) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("Matrix: empty shape");
    alloc_stats::record(rows * cols);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), d_(std::move(data)) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("Matrix: empty shape");
    if (d_.size() != rows * cols) throw std::invalid_argument("Matrix: data size mismatch");
    alloc_stats::record(rows * cols);
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::set_zero() { kernels::active().fill(d_.data(), 0.0, d_.size()); }

bool Matrix::all_finite() const {
    for (double x : d_)
        if (!std::isfinite(x)) return false;
    return true;
}

double Matrix::frobenius_norm_sq() const {
    return kernels::active().sumsq(d_.data(), d_.size());
}

double Matrix::frobenius_norm() const { return std::sqrt(frobenius_norm_sq()); }

double Matrix::max_abs() const {
    if (d_.empty()) return 0.0;
    return kernels::active().max_abs(d_.data(), d_.size());
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

} // namespace ldadam
