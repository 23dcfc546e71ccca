#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ldadam/kernels.hpp"
#include "ldadam/rng.hpp"

#include <cmath>
#include <cstring>
#include <vector>

using namespace ldadam;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t stream) {
    PhiloxRng rng(42, stream);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.gaussian();
    return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

} // namespace

TEST_CASE("philox stream independence and determinism") {
    PhiloxRng a(7, 0), b(7, 0), c(7, 1);
    std::vector<std::uint32_t> xa, xb, xc;
    for (int i = 0; i < 64; ++i) {
        xa.push_back(a.next_u32());
        xb.push_back(b.next_u32());
        xc.push_back(c.next_u32());
    }
    CHECK(xa == xb);
    CHECK(xa != xc);

    PhiloxRng g(11, 3);
    double mean = 0.0, m2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double z = g.gaussian();
        mean += z;
        m2 += z * z;
    }
    mean /= n;
    m2 /= n;
    CHECK(std::fabs(mean) < 0.03);
    CHECK(std::fabs(m2 - 1.0) < 0.05);
}

TEST_CASE("philox known-answer vector (Random123 philox4x32-10)") {
    // Counter and key all zero: reference output from the Random123 test
    // vectors is 6627e8d5 e169c58d bc57ac4c 9b00dbd8.
    PhiloxRng r(0, 0);
    CHECK(r.next_u32() == 0x6627e8d5u);
    CHECK(r.next_u32() == 0xe169c58du);
    CHECK(r.next_u32() == 0xbc57ac4cu);
    CHECK(r.next_u32() == 0x9b00dbd8u);
}

TEST_CASE("scalar and simd kernel tables are bitwise equivalent") {
    const kernels::Kernels& s = kernels::scalar_table();
    const kernels::Kernels* v = kernels::avx2_table();
    if (v == nullptr) {
        MESSAGE("no simd backend on this host; scalar-only build");
        return;
    }

    for (std::size_t n : {1u, 3u, 4u, 7u, 64u, 1001u}) {
        const auto x = random_vec(n, 2 * n);
        const auto y0 = random_vec(n, 2 * n + 1);

        auto ys = y0, yv = y0;
        s.axpby(ys.data(), 0.3, x.data(), -1.7, n);
        v->axpby(yv.data(), 0.3, x.data(), -1.7, n);
        CHECK(bitwise_equal(ys, yv));

        ys = y0;
        yv = y0;
        s.ema_sq(ys.data(), 0.99, x.data(), n);
        v->ema_sq(yv.data(), 0.99, x.data(), n);
        CHECK(bitwise_equal(ys, yv));

        std::vector<double> zs(n), zv(n);
        s.sub(zs.data(), x.data(), y0.data(), n);
        v->sub(zv.data(), x.data(), y0.data(), n);
        CHECK(bitwise_equal(zs, zv));
        s.mul(zs.data(), x.data(), y0.data(), n);
        v->mul(zv.data(), x.data(), y0.data(), n);
        CHECK(bitwise_equal(zs, zv));

        ys = y0;
        yv = y0;
        s.abs_inplace(ys.data(), n);
        v->abs_inplace(yv.data(), n);
        CHECK(bitwise_equal(ys, yv));

        ys = y0;
        yv = y0;
        s.max_scalar(ys.data(), 0.25, n);
        v->max_scalar(yv.data(), 0.25, n);
        CHECK(bitwise_equal(ys, yv));

        ys = y0;
        yv = y0;
        s.div_scalar(ys.data(), 1.37, n);
        v->div_scalar(yv.data(), 1.37, n);
        CHECK(bitwise_equal(ys, yv));

        ys = y0;
        yv = y0;
        s.max_elem(ys.data(), x.data(), n);
        v->max_elem(yv.data(), x.data(), n);
        CHECK(bitwise_equal(ys, yv));

        auto vv = random_vec(n, 5 * n + 2);
        s.abs_inplace(vv.data(), n); // second moments are nonnegative
        s.adam_dir(zs.data(), x.data(), vv.data(), 1.1, 0.9, 1e-8, n);
        v->adam_dir(zv.data(), x.data(), vv.data(), 1.1, 0.9, 1e-8, n);
        CHECK(bitwise_equal(zs, zv));
        s.dir_sqrt_eps(zs.data(), x.data(), vv.data(), 1e-8, n);
        v->dir_sqrt_eps(zv.data(), x.data(), vv.data(), 1e-8, n);
        CHECK(bitwise_equal(zs, zv));

        CHECK(s.dot(x.data(), y0.data(), n) == v->dot(x.data(), y0.data(), n));
        CHECK(s.sumsq(x.data(), n) == v->sumsq(x.data(), n));
        CHECK(s.max_abs(x.data(), n) == v->max_abs(x.data(), n));
        CHECK(s.min_val(x.data(), n) == v->min_val(x.data(), n));
        CHECK(s.max_val(x.data(), n) == v->max_val(x.data(), n));
    }
}

TEST_CASE("gemm kernels match across backends and against naive loops") {
    const kernels::Kernels& s = kernels::scalar_table();
    const kernels::Kernels* v = kernels::avx2_table();

    const std::size_t n = 13, k = 5, m = 9;
    const auto a = random_vec(n * k, 100);
    const auto b = random_vec(k * m, 101);
    const auto bt = random_vec(n * m, 102);

    std::vector<double> c1(n * m), naive(n * m, 0.0);
    s.gemm_nn(c1.data(), a.data(), b.data(), n, k, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * m + j];
            naive[i * m + j] = acc;
        }
    for (std::size_t i = 0; i < n * m; ++i)
        CHECK(c1[i] == doctest::Approx(naive[i]).epsilon(1e-14));

    std::vector<double> c2(k * m), naive2(k * m, 0.0);
    s.gemm_tn(c2.data(), a.data(), bt.data(), n, k, m);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) acc += a[p * k + i] * bt[p * m + j];
            naive2[i * m + j] = acc;
        }
    for (std::size_t i = 0; i < k * m; ++i)
        CHECK(c2[i] == doctest::Approx(naive2[i]).epsilon(1e-14));

    if (v != nullptr) {
        std::vector<double> cv(n * m);
        v->gemm_nn(cv.data(), a.data(), b.data(), n, k, m);
        CHECK(bitwise_equal(c1, cv));
        std::vector<double> cv2(k * m);
        v->gemm_tn(cv2.data(), a.data(), bt.data(), n, k, m);
        CHECK(bitwise_equal(c2, cv2));
    }
}

TEST_CASE("active dispatch picks a usable backend") {
    CHECK((kernels::active_name() == "avx2" || kernels::active_name() == "scalar"));
    std::vector<double> y{1.0, 2.0, 3.0};
    kernels::active().max_scalar(y.data(), 2.5, 3);
    CHECK(y[0] == 2.5);
    CHECK(y[2] == 3.0);
}
