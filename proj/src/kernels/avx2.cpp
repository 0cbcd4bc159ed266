// Compiled with -mavx2 -mfma; only reached through the dispatch table after a
// CPUID check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "elite/kernels.hpp"

namespace elite::kernels::detail {

namespace {

// MR rows x (4 * NV) columns of C held in registers across the whole k loop.
template <int MR, int NV>
inline void micro_tile(std::size_t k, const double* a, std::ptrdiff_t rs_a, std::ptrdiff_t cs_a, const double* b,
                       std::ptrdiff_t rs_b, double* c, std::ptrdiff_t rs_c) {
    __m256d acc[MR][NV];
#pragma GCC unroll 4
    for (int i = 0; i < MR; ++i) {
#pragma GCC unroll 3
        for (int v = 0; v < NV; ++v) acc[i][v] = _mm256_loadu_pd(c + i * rs_c + 4 * v);
    }
    for (std::size_t p = 0; p < k; ++p) {
        const double* bp = b + static_cast<std::ptrdiff_t>(p) * rs_b;
        const double* ap = a + static_cast<std::ptrdiff_t>(p) * cs_a;
        __m256d bv[NV];
#pragma GCC unroll 3
        for (int v = 0; v < NV; ++v) bv[v] = _mm256_loadu_pd(bp + 4 * v);
#pragma GCC unroll 4
        for (int i = 0; i < MR; ++i) {
            const __m256d ai = _mm256_broadcast_sd(ap + i * rs_a);
#pragma GCC unroll 3
            for (int v = 0; v < NV; ++v) acc[i][v] = _mm256_fmadd_pd(ai, bv[v], acc[i][v]);
        }
    }
#pragma GCC unroll 4
    for (int i = 0; i < MR; ++i) {
#pragma GCC unroll 3
        for (int v = 0; v < NV; ++v) _mm256_storeu_pd(c + i * rs_c + 4 * v, acc[i][v]);
    }
}

// Columns left over after the 4-wide blocks.
inline void tail_columns(std::size_t rows, std::size_t cols, std::size_t k, const double* a, std::ptrdiff_t rs_a,
                         std::ptrdiff_t cs_a, const double* b, std::ptrdiff_t rs_b, double* c, std::ptrdiff_t rs_c) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* ai = a + static_cast<std::ptrdiff_t>(i) * rs_a;
        double* ci = c + static_cast<std::ptrdiff_t>(i) * rs_c;
        for (std::size_t j = 0; j < cols; ++j) {
            double s = ci[j];
            for (std::size_t p = 0; p < k; ++p) {
                s = std::fma(ai[static_cast<std::ptrdiff_t>(p) * cs_a], b[static_cast<std::ptrdiff_t>(p) * rs_b + j], s);
            }
            ci[j] = s;
        }
    }
}

template <int MR>
inline void row_panel(std::size_t n, std::size_t k, const double* a, std::ptrdiff_t rs_a, std::ptrdiff_t cs_a,
                      const double* b, std::ptrdiff_t rs_b, double* c, std::ptrdiff_t rs_c) {
    std::size_t j = 0;
    // A 16-column remainder runs as two 8-wide tiles instead of 12 + 4.
    for (; j + 12 <= n && n - j != 16; j += 12) micro_tile<MR, 3>(k, a, rs_a, cs_a, b + j, rs_b, c + j, rs_c);
    if (n - j == 16) {
        micro_tile<MR, 2>(k, a, rs_a, cs_a, b + j, rs_b, c + j, rs_c);
        j += 8;
    }
    if (j + 8 <= n) {
        micro_tile<MR, 2>(k, a, rs_a, cs_a, b + j, rs_b, c + j, rs_c);
        j += 8;
    }
    if (j + 4 <= n) {
        micro_tile<MR, 1>(k, a, rs_a, cs_a, b + j, rs_b, c + j, rs_c);
        j += 4;
    }
    if (j < n) tail_columns(MR, n - j, k, a, rs_a, cs_a, b + j, rs_b, c + j, rs_c);
}

}  // namespace

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::ptrdiff_t rs_a, std::ptrdiff_t cs_a,
               const double* b, std::ptrdiff_t rs_b, double* c, std::ptrdiff_t rs_c) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const auto off = static_cast<std::ptrdiff_t>(i);
        row_panel<4>(n, k, a + off * rs_a, rs_a, cs_a, b, rs_b, c + off * rs_c, rs_c);
    }
    for (; i < m; ++i) {
        const auto off = static_cast<std::ptrdiff_t>(i);
        row_panel<1>(n, k, a + off * rs_a, rs_a, cs_a, b, rs_b, c + off * rs_c, rs_c);
    }
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    const __m256d acc = _mm256_add_pd(acc0, acc1);
    const __m128d lo = _mm256_castpd256_pd128(acc);
    const __m128d hi = _mm256_extractf128_pd(acc, 1);
    const __m128d pair = _mm_add_pd(lo, hi);
    double s = _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
    for (; i < n; ++i) s = std::fma(x[i], y[i], s);
    return s;
}

namespace {

// 2^n for integral n in [-1022, 1023], n held in a double.
inline __m256d pow2_int(__m256d n) {
    const __m256d magic = _mm256_set1_pd(0x1.8p52);
    const __m256i bits = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)), _mm256_castpd_si256(magic));
    return _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(bits, _mm256_set1_epi64x(1023)), 52));
}

// exp(x) = 2^n e^r with |r| <= ln2 / 2; degree-13 Taylor polynomial for e^r.
inline __m256d exp4(__m256d x) {
    const __m256d hi = _mm256_set1_pd(709.782712893384);
    const __m256d lo = _mm256_set1_pd(-708.3964185322641);
    const __m256d xc = _mm256_min_pd(_mm256_max_pd(x, lo), hi);
    const __m256d n = _mm256_round_pd(_mm256_mul_pd(xc, _mm256_set1_pd(1.4426950408889634)),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(0x1.62e42fefa3800p-1), xc);
    r = _mm256_fnmadd_pd(n, _mm256_set1_pd(0x1.ef35793c76730p-45), r);

    static constexpr double kInvFact[14] = {1.0,
                                            1.0,
                                            1.0 / 2,
                                            1.0 / 6,
                                            1.0 / 24,
                                            1.0 / 120,
                                            1.0 / 720,
                                            1.0 / 5040,
                                            1.0 / 40320,
                                            1.0 / 362880,
                                            1.0 / 3628800,
                                            1.0 / 39916800,
                                            1.0 / 479001600,
                                            1.0 / 6227020800};
    __m256d p = _mm256_set1_pd(kInvFact[13]);
    for (int i = 12; i >= 0; --i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[i]));

    // Split the scale so n = 1024 (x near the overflow edge) stays representable.
    const __m256d n1 = _mm256_floor_pd(_mm256_mul_pd(n, _mm256_set1_pd(0.5)));
    const __m256d n2 = _mm256_sub_pd(n, n1);
    __m256d y = _mm256_mul_pd(_mm256_mul_pd(p, pow2_int(n1)), pow2_int(n2));

    y = _mm256_blendv_pd(y, _mm256_set1_pd(HUGE_VAL), _mm256_cmp_pd(x, hi, _CMP_GT_OQ));
    y = _mm256_blendv_pd(y, _mm256_setzero_pd(), _mm256_cmp_pd(y, _mm256_set1_pd(0x1p-1022), _CMP_LT_OQ));
    y = _mm256_blendv_pd(y, _mm256_setzero_pd(), _mm256_cmp_pd(x, lo, _CMP_LT_OQ));
    return _mm256_blendv_pd(y, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
}

}  // namespace

void exp_avx2(std::size_t n, double* x) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, exp4(_mm256_loadu_pd(x + i)));
    if (i < n) {
        double tail[4] = {0.0, 0.0, 0.0, 0.0};
        std::copy_n(x + i, n - i, tail);
        _mm256_storeu_pd(tail, exp4(_mm256_loadu_pd(tail)));
        std::copy_n(tail, n - i, x + i);
    }
}

}  // namespace elite::kernels::detail
