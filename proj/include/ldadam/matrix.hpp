#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ldadam {

// Row-major dense real64 matrix. Vectors are d x 1 matrices.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix zeros_like(const Matrix& other) { return Matrix(other.rows_, other.cols_); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return rows_ * cols_; }

    double& operator()(std::size_t i, std::size_t j) { return d_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return d_[i * cols_ + j]; }

    double* data() { return d_.data(); }
    const double* data() const { return d_.data(); }

    void set_zero();
    bool all_finite() const;
    double frobenius_norm_sq() const;
    double frobenius_norm() const;
    double max_abs() const;

    Matrix transposed() const;

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> d_;
};

// Counters for matrix buffer allocations on the current thread. Used by tests
// to assert that operations stay within their declared memory budget (in
// particular that no n x n intermediate is ever formed).
namespace alloc_stats {
    std::uint64_t allocated_doubles();
    std::uint64_t peak_single_allocation();
    void reset();
}

} // namespace ldadam
