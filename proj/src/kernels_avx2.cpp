// AVX2 variants of the kernel table. Compiled with -mavx2 in its own TU and
// selected at runtime only when cpuid reports AVX2.
//
// Bitwise contract with the scalar table: no FMA, mul and add round
// separately; reductions keep the scalar table's 4-lane accumulator layout.

#include "ldadam/kernels.hpp"

#if defined(LDADAM_BUILD_AVX2)

#include <immintrin.h>
#include <cmath>

namespace ldadam::kernels {
namespace {

void v_fill(double* y, double v, std::size_t n) {
    const __m256d vv = _mm256_set1_pd(v);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, vv);
    for (; i < n; ++i) y[i] = v;
}

void v_axpby(double* y, double a, const double* x, double b, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t = _mm256_add_pd(_mm256_mul_pd(va, _mm256_loadu_pd(x + i)),
                                        _mm256_mul_pd(vb, _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(y + i, t);
    }
    for (; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

void v_ema_sq(double* y, double b, const double* x, std::size_t n) {
    const double w = 1.0 - b;
    const __m256d vb = _mm256_set1_pd(b);
    const __m256d vw = _mm256_set1_pd(w);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_loadu_pd(x + i);
        const __m256d sq = _mm256_mul_pd(vx, vx);
        const __m256d t = _mm256_add_pd(_mm256_mul_pd(vb, _mm256_loadu_pd(y + i)),
                                        _mm256_mul_pd(vw, sq));
        _mm256_storeu_pd(y + i, t);
    }
    for (; i < n; ++i) y[i] = b * y[i] + w * (x[i] * x[i]);
}

void v_sub(double* z, const double* x, const double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(z + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) z[i] = x[i] - y[i];
}

void v_mul(double* z, const double* x, const double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(z + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) z[i] = x[i] * y[i];
}

void v_abs(double* y, std::size_t n) {
    const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_and_pd(_mm256_loadu_pd(y + i), mask));
    for (; i < n; ++i) y[i] = std::fabs(y[i]);
}

void v_clip0(double* y, std::size_t n) {
    const __m256d z = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(y + i), z));
    for (; i < n; ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
}

void v_div_scalar(double* y, double s, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_div_pd(_mm256_loadu_pd(y + i), vs));
    for (; i < n; ++i) y[i] /= s;
}

void v_max_scalar(double* y, double floor, std::size_t n) {
    const __m256d f = _mm256_set1_pd(floor);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(y + i), f));
    for (; i < n; ++i) y[i] = y[i] > floor ? y[i] : floor;
}

void v_max_elem(double* y, const double* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = y[i] > x[i] ? y[i] : x[i];
}

void v_adam_dir(double* out, const double* m, const double* v,
                double ms, double vs, double eps, std::size_t n) {
    const __m256d vms = _mm256_set1_pd(ms);
    const __m256d vvs = _mm256_set1_pd(vs);
    const __m256d veps = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d num = _mm256_mul_pd(vms, _mm256_loadu_pd(m + i));
        const __m256d den = _mm256_add_pd(
            _mm256_sqrt_pd(_mm256_mul_pd(vvs, _mm256_loadu_pd(v + i))), veps);
        _mm256_storeu_pd(out + i, _mm256_div_pd(num, den));
    }
    for (; i < n; ++i) out[i] = (ms * m[i]) / (std::sqrt(vs * v[i]) + eps);
}

void v_dir_sqrt_eps(double* out, const double* m, const double* v,
                    double eps, std::size_t n) {
    const __m256d veps = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d den = _mm256_sqrt_pd(_mm256_add_pd(_mm256_loadu_pd(v + i), veps));
        _mm256_storeu_pd(out + i, _mm256_div_pd(_mm256_loadu_pd(m + i), den));
    }
    for (; i < n; ++i) out[i] = m[i] / std::sqrt(v[i] + eps);
}

double v_dot(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    alignas(32) double t[4];
    _mm256_store_pd(t, acc);
    double s = ((t[0] + t[1]) + t[2]) + t[3];
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double v_sumsq(const double* x, std::size_t n) { return v_dot(x, x, n); }

double v_max_abs(const double* x, std::size_t n) {
    const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_max_pd(acc, _mm256_and_pd(_mm256_loadu_pd(x + i), mask));
    alignas(32) double t[4];
    _mm256_store_pd(t, acc);
    double m = std::max(std::max(t[0], t[1]), std::max(t[2], t[3]));
    for (; i < n; ++i) {
        const double a = std::fabs(x[i]);
        if (a > m) m = a;
    }
    return m;
}

double v_min_val(const double* x, std::size_t n) {
    double m = x[0];
    std::size_t i = 0;
    if (n >= 4) {
        __m256d acc = _mm256_loadu_pd(x);
        for (i = 4; i + 4 <= n; i += 4) acc = _mm256_min_pd(acc, _mm256_loadu_pd(x + i));
        alignas(32) double t[4];
        _mm256_store_pd(t, acc);
        m = std::min(std::min(t[0], t[1]), std::min(t[2], t[3]));
    }
    for (; i < n; ++i)
        if (x[i] < m) m = x[i];
    return m;
}

double v_max_val(const double* x, std::size_t n) {
    double m = x[0];
    std::size_t i = 0;
    if (n >= 4) {
        __m256d acc = _mm256_loadu_pd(x);
        for (i = 4; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
        alignas(32) double t[4];
        _mm256_store_pd(t, acc);
        m = std::max(std::max(t[0], t[1]), std::max(t[2], t[3]));
    }
    for (; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

// ikj order, row of C updated with one broadcast A entry at a time; per-element
// add order is identical to the scalar kernel.
void v_gemm_nn(double* c, const double* a, const double* b,
               std::size_t n, std::size_t k, std::size_t m) {
    v_fill(c, 0.0, n * m);
    for (std::size_t i = 0; i < n; ++i) {
        double* crow = c + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            const __m256d va = _mm256_set1_pd(aip);
            const double* brow = b + p * m;
            std::size_t j = 0;
            for (; j + 4 <= m; j += 4) {
                const __m256d t = _mm256_add_pd(
                    _mm256_loadu_pd(crow + j),
                    _mm256_mul_pd(va, _mm256_loadu_pd(brow + j)));
                _mm256_storeu_pd(crow + j, t);
            }
            for (; j < m; ++j) crow[j] += aip * brow[j];
        }
    }
}

void v_gemm_tn(double* c, const double* a, const double* b,
               std::size_t n, std::size_t k, std::size_t m) {
    v_fill(c, 0.0, k * m);
    for (std::size_t p = 0; p < n; ++p) {
        const double* arow = a + p * k;
        const double* brow = b + p * m;
        for (std::size_t i = 0; i < k; ++i) {
            const double api = arow[i];
            const __m256d va = _mm256_set1_pd(api);
            double* crow = c + i * m;
            std::size_t j = 0;
            for (; j + 4 <= m; j += 4) {
                const __m256d t = _mm256_add_pd(
                    _mm256_loadu_pd(crow + j),
                    _mm256_mul_pd(va, _mm256_loadu_pd(brow + j)));
                _mm256_storeu_pd(crow + j, t);
            }
            for (; j < m; ++j) crow[j] += api * brow[j];
        }
    }
}

} // namespace

const Kernels* avx2_table_impl() {
    static const Kernels k = {
        "avx2",
        v_fill, v_axpby, v_ema_sq, v_sub, v_mul,
        v_abs, v_clip0, v_div_scalar, v_max_scalar, v_max_elem,
        v_adam_dir, v_dir_sqrt_eps,
        v_dot, v_sumsq, v_max_abs, v_min_val, v_max_val,
        v_gemm_nn, v_gemm_tn,
    };
    return &k;
}

} // namespace ldadam::kernels

#endif // LDADAM_BUILD_AVX2
