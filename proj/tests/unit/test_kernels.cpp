#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "elite/kernels.hpp"
#include "support/oracles.hpp"

using namespace elite::kernels;

namespace {

// Relative distance scaled by the sum of |terms|, the natural error bound
// for reordered / fused dot products.
double gemm_mismatch(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& scale) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::fabs(x[i] - y[i]) / (scale[i] + 1e-300));
    return worst;
}

}  // namespace

TEST_CASE("scalar table is always available and active by request") {
    CHECK(isa_available(Isa::scalar));
    const auto before = active().isa;
    CHECK(set_kernel_isa(Isa::scalar));
    CHECK(active().isa == Isa::scalar);
    set_kernel_isa(before);
    CHECK(to_string(Isa::scalar) == "scalar");
}

TEST_CASE("gemm variants agree on strided shapes") {
    const auto* fast = avx2_kernels();
    if (!fast) {
        MESSAGE("AVX2 unavailable; equivalence test skipped");
        return;
    }
    const auto& ref = scalar_kernels();
    const std::size_t shapes[][3] = {{1, 1, 1},   {3, 5, 7},    {4, 12, 9},  {4, 16, 27}, {7, 64, 18},
                                     {13, 17, 3}, {64, 48, 162}, {5, 4, 1},   {9, 23, 31}, {100, 33, 144}};
    std::uint64_t seed = 1;
    for (const auto& s : shapes) {
        const std::size_t m = s[0], n = s[1], k = s[2];
        for (const bool transposed : {false, true}) {
            CAPTURE(m);
            CAPTURE(n);
            CAPTURE(k);
            CAPTURE(transposed);
            std::vector<double> a(m * k + 8), b(k * (n + 3)), c0(m * (n + 2));
            oracle::fill_uniform(a, seed++);
            oracle::fill_uniform(b, seed++);
            oracle::fill_uniform(c0, seed++);
            const std::ptrdiff_t rs_a = transposed ? 1 : static_cast<std::ptrdiff_t>(k);
            const std::ptrdiff_t cs_a = transposed ? static_cast<std::ptrdiff_t>(m) : 1;
            const std::ptrdiff_t rs_b = static_cast<std::ptrdiff_t>(n + 3), rs_c = static_cast<std::ptrdiff_t>(n + 2);
            auto c_ref = c0, c_fast = c0;
            ref.gemm(m, n, k, a.data(), rs_a, cs_a, b.data(), rs_b, c_ref.data(), rs_c);
            fast->gemm(m, n, k, a.data(), rs_a, cs_a, b.data(), rs_b, c_fast.data(), rs_c);

            std::vector<double> scale(c0.size(), 0.0);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    double t = std::fabs(c0[i * (n + 2) + j]);
                    for (std::size_t p = 0; p < k; ++p) {
                        t += std::fabs(a[i * rs_a + p * cs_a] * b[p * (n + 3) + j]);
                    }
                    scale[i * (n + 2) + j] = t;
                }
            }
            CHECK(gemm_mismatch(c_ref, c_fast, scale) < 1e-14);
            // Padding columns must be left untouched.
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = n; j < n + 2; ++j) CHECK(c_fast[i * (n + 2) + j] == c0[i * (n + 2) + j]);
            }
        }
    }
}

TEST_CASE("wide gemm matches the AVX2 gemm bit for bit") {
    const auto* avx2 = avx2_kernels();
    const auto* wide = avx512_kernels();
    if (!avx2 || !wide) {
        MESSAGE("AVX-512 unavailable; equivalence test skipped");
        return;
    }
    CHECK(kernels_for(Isa::avx512) == wide);
    CHECK(to_string(Isa::avx512) == "avx512");
    std::uint64_t seed = 500;
    for (std::size_t m : {1u, 2u, 3u, 5u, 8u, 11u, 100u}) {
        for (std::size_t n : {1u, 7u, 8u, 9u, 16u, 17u, 24u, 64u, 70u}) {
            for (std::size_t k : {1u, 5u, 33u}) {
                CAPTURE(m);
                CAPTURE(n);
                CAPTURE(k);
                std::vector<double> a(m * k), b(k * (n + 1)), c0(m * (n + 3));
                oracle::fill_uniform(a, seed++);
                oracle::fill_uniform(b, seed++);
                oracle::fill_uniform(c0, seed++);
                auto c1 = c0, c2 = c0;
                const auto rs_b = static_cast<std::ptrdiff_t>(n + 1), rs_c = static_cast<std::ptrdiff_t>(n + 3);
                avx2->gemm(m, n, k, a.data(), static_cast<std::ptrdiff_t>(k), 1, b.data(), rs_b, c1.data(), rs_c);
                wide->gemm(m, n, k, a.data(), static_cast<std::ptrdiff_t>(k), 1, b.data(), rs_b, c2.data(), rs_c);
                CHECK(c1 == c2);
            }
        }
    }
}

TEST_CASE("axpy and dot variants agree") {
    const auto* fast = avx2_kernels();
    if (!fast) return;
    const auto& ref = scalar_kernels();
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 31u, 1000u}) {
        std::vector<double> x(n), y(n);
        oracle::fill_uniform(x, n + 1);
        oracle::fill_uniform(y, n + 2);
        auto y1 = y, y2 = y;
        ref.axpy(n, 0.37, x.data(), y1.data());
        fast->axpy(n, 0.37, x.data(), y2.data());
        for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));
        double scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) scale += std::fabs(x[i] * y[i]);
        CHECK(std::fabs(ref.dot(n, x.data(), y.data()) - fast->dot(n, x.data(), y.data())) <= 1e-14 * (scale + 1e-300));
    }
}

TEST_CASE("vector exp matches the scalar exp within a few ulps") {
    const auto* fast = avx2_kernels();
    if (!fast) return;
    const auto& ref = scalar_kernels();
    std::vector<double> x;
    for (double v = -745.0; v <= 710.0; v += 0.173) x.push_back(v);
    for (double v : {0.0, -0.0, 1e-300, -1e-300, 0.5 * std::log(2.0), 709.78, 709.79, -708.39, -708.4, -800.0, 800.0}) {
        x.push_back(v);
    }
    auto e_ref = x, e_fast = x;
    ref.exp(e_ref.size(), e_ref.data());
    fast->exp(e_fast.size(), e_fast.data());
    for (std::size_t i = 0; i < x.size(); ++i) {
        CAPTURE(x[i]);
        if (e_ref[i] == 0.0 || std::isinf(e_ref[i])) {
            CHECK(e_fast[i] == e_ref[i]);
        } else {
            CHECK(std::fabs(e_fast[i] - e_ref[i]) <= 4e-16 * e_ref[i]);
        }
    }
    double specials[3] = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity(),
                          -std::numeric_limits<double>::infinity()};
    fast->exp(3, specials);
    CHECK(std::isnan(specials[0]));
    CHECK(std::isinf(specials[1]));
    CHECK(specials[2] == 0.0);
}

TEST_CASE("scalar exp flushes subnormal results") {
    double v[2] = {-710.0, -1.0};
    scalar_kernels().exp(2, v);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == std::exp(-1.0));
}
