#include "ldadam/kernels.hpp"

#include <cmath>

namespace ldadam::kernels {
namespace {

void s_fill(double* y, double v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = v;
}

void s_axpby(double* y, double a, const double* x, double b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

void s_ema_sq(double* y, double b, const double* x, std::size_t n) {
    const double w = 1.0 - b;
    for (std::size_t i = 0; i < n; ++i) y[i] = b * y[i] + w * (x[i] * x[i]);
}

void s_sub(double* z, const double* x, const double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] - y[i];
}

void s_mul(double* z, const double* x, const double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
}

void s_abs(double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fabs(y[i]);
}

void s_clip0(double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
}

void s_div_scalar(double* y, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] /= s;
}

void s_max_scalar(double* y, double floor, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] > floor ? y[i] : floor;
}

void s_max_elem(double* y, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] > x[i] ? y[i] : x[i];
}

void s_adam_dir(double* out, const double* m, const double* v,
                double ms, double vs, double eps, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = (ms * m[i]) / (std::sqrt(vs * v[i]) + eps);
}

void s_dir_sqrt_eps(double* out, const double* m, const double* v,
                    double eps, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = m[i] / std::sqrt(v[i] + eps);
}

// Reductions use the same 4-lane accumulator layout as the AVX2 path so both
// backends round identically.
double s_dot(const double* x, const double* y, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc[0] += x[i + 0] * y[i + 0];
        acc[1] += x[i + 1] * y[i + 1];
        acc[2] += x[i + 2] * y[i + 2];
        acc[3] += x[i + 3] * y[i + 3];
    }
    double s = ((acc[0] + acc[1]) + acc[2]) + acc[3];
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double s_sumsq(const double* x, std::size_t n) { return s_dot(x, x, n); }

double s_max_abs(const double* x, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::fabs(x[i]);
        if (a > m) m = a;
    }
    return m;
}

double s_min_val(const double* x, std::size_t n) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i)
        if (x[i] < m) m = x[i];
    return m;
}

double s_max_val(const double* x, std::size_t n) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

void s_gemm_nn(double* c, const double* a, const double* b,
               std::size_t n, std::size_t k, std::size_t m) {
    s_fill(c, 0.0, n * m);
    for (std::size_t i = 0; i < n; ++i) {
        double* crow = c + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            const double* brow = b + p * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
        }
    }
}

void s_gemm_tn(double* c, const double* a, const double* b,
               std::size_t n, std::size_t k, std::size_t m) {
    s_fill(c, 0.0, k * m);
    for (std::size_t p = 0; p < n; ++p) {
        const double* arow = a + p * k;
        const double* brow = b + p * m;
        for (std::size_t i = 0; i < k; ++i) {
            const double api = arow[i];
            double* crow = c + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += api * brow[j];
        }
    }
}

} // namespace

const Kernels& scalar_table() {
    static const Kernels k = {
        "scalar",
        s_fill, s_axpby, s_ema_sq, s_sub, s_mul,
        s_abs, s_clip0, s_div_scalar, s_max_scalar, s_max_elem,
        s_adam_dir, s_dir_sqrt_eps,
        s_dot, s_sumsq, s_max_abs, s_min_val, s_max_val,
        s_gemm_nn, s_gemm_tn,
    };
    return k;
}

} // namespace ldadam::kernels
