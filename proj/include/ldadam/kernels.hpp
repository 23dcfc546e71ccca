#pragma once

#include <cstddef>
#include <string_view>

namespace ldadam::kernels {

// Dense double-precision inner loops shared by the optimizers and the linear
// algebra layer. Every kernel has a scalar reference implementation and, on
// x86-64 with AVX2, a vectorized variant selected once at startup.
//
// Cross-backend contract: scalar and AVX2 variants produce bit-identical
// results. Elementwise kernels are lane-independent; reductions use the same
// fixed 4-accumulator blocking in both backends, and no FMA contraction is
// allowed anywhere (mul then add, rounded separately).
struct Kernels {
    const char* name;

    // y[i] = v
    void (*fill)(double* y, double v, std::size_t n);
    // y = a*x + b*y
    void (*axpby)(double* y, double a, const double* x, double b, std::size_t n);
    // y = b*y + (1-b)*x*x
    void (*ema_sq)(double* y, double b, const double* x, std::size_t n);
    // z = x - y
    void (*sub)(double* z, const double* x, const double* y, std::size_t n);
    // z = x .* y
    void (*mul)(double* z, const double* x, const double* y, std::size_t n);
    // y = |y|
    void (*abs_inplace)(double* y, std::size_t n);
    // y = max(y, 0)
    void (*clip_min_zero)(double* y, std::size_t n);
    // y = y / s
    void (*div_scalar)(double* y, double s, std::size_t n);
    // y = max(y, floor)
    void (*max_scalar)(double* y, double floor, std::size_t n);
    // y = max(y, x) elementwise
    void (*max_elem)(double* y, const double* x, std::size_t n);
    // out = (ms*m) / (sqrt(vs*v) + eps)
    void (*adam_dir)(double* out, const double* m, const double* v,
                     double ms, double vs, double eps, std::size_t n);
    // out = m / sqrt(v + eps)
    void (*dir_sqrt_eps)(double* out, const double* m, const double* v,
                         double eps, std::size_t n);

    double (*dot)(const double* x, const double* y, std::size_t n);
    double (*sumsq)(const double* x, std::size_t n);
    double (*max_abs)(const double* x, std::size_t n);
    double (*min_val)(const double* x, std::size_t n);
    double (*max_val)(const double* x, std::size_t n);

    // C (n x m) = A (n x k) * B (k x m), row-major, C overwritten
    void (*gemm_nn)(double* c, const double* a, const double* b,
                    std::size_t n, std::size_t k, std::size_t m);
    // C (k x m) = A^T * B with A stored n x k and B stored n x m, row-major
    void (*gemm_tn)(double* c, const double* a, const double* b,
                    std::size_t n, std::size_t k, std::size_t m);
};

const Kernels& scalar_table();

// Null when the binary was built without AVX2 support or the CPU lacks it.
const Kernels* avx2_table();

// Backend chosen at first use: AVX2 when available, scalar otherwise.
const Kernels& active();

std::string_view active_name();

} // namespace ldadam::kernels
