// Compiled with -mavx512f -mfma. Only the GEMM differs from the AVX2 table,
// and it performs the same fused multiply-add sequence per output element,
// so both tables give bitwise identical results.

#include <immintrin.h>

#include <cstdint>

#include "elite/kernels.hpp"

namespace elite::kernels::detail {

namespace {

inline __mmask8 lane_mask(std::size_t cols) noexcept {
    return cols >= 8 ? static_cast<__mmask8>(0xFF) : static_cast<__mmask8>((1u << cols) - 1u);
}

// MR rows x (8 * NV) columns; `last` masks the final vector's lanes.
template <int MR, int NV>
inline void micro_tile(std::size_t k, const double* a, std::ptrdiff_t rs_a, std::ptrdiff_t cs_a, const double* b,
                       std::ptrdiff_t rs_b, double* c, std::ptrdiff_t rs_c, __mmask8 last) {
    __m512d acc[MR][NV];
    __mmask8 mask[NV];
#pragma GCC unroll 4
    for (int v = 0; v < NV; ++v) mask[v] = v == NV - 1 ? last : static_cast<__mmask8>(0xFF);
#pragma GCC unroll 8
    for (int i = 0; i < MR; ++i) {
#pragma GCC unroll 4
        for (int v = 0; v < NV; ++v) acc[i][v] = _mm512_maskz_loadu_pd(mask[v], c + i * rs_c + 8 * v);
    }
    for (std::size_t p = 0; p < k; ++p) {
        const double* bp = b + static_cast<std::ptrdiff_t>(p) * rs_b;
        const double* ap = a + static_cast<std::ptrdiff_t>(p) * cs_a;
        __m512d bv[NV];
#pragma GCC unroll 4
        for (int v = 0; v < NV; ++v) bv[v] = _mm512_maskz_loadu_pd(mask[v], bp + 8 * v);
#pragma GCC unroll 8
        for (int i = 0; i < MR; ++i) {
            const __m512d ai = _mm512_set1_pd(ap[i * rs_a]);
#pragma GCC unroll 4
            for (int v = 0; v < NV; ++v) acc[i][v] = _mm512_fmadd_pd(ai, bv[v], acc[i][v]);
        }
    }
#pragma GCC unroll 8
    for (int i = 0; i < MR; ++i) {
#pragma GCC unroll 4
        for (int v = 0; v < NV; ++v) _mm512_mask_storeu_pd(c + i * rs_c + 8 * v, mask[v], acc[i][v]);
    }
}

template <int MR>
inline void row_panel(std::size_t n, std::size_t k, const double* a, std::ptrdiff_t rs_a, std::ptrdiff_t cs_a,
                      const double* b, std::ptrdiff_t rs_b, double* c, std::ptrdiff_t rs_c) {
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) micro_tile<MR, 2>(k, a, rs_a, cs_a, b + j, rs_b, c + j, rs_c, 0xFF);
    const std::size_t rest = n - j;
    if (rest > 8) {
        micro_tile<MR, 2>(k, a, rs_a, cs_a, b + j, rs_b, c + j, rs_c, lane_mask(rest - 8));
    } else if (rest > 0) {
        micro_tile<MR, 1>(k, a, rs_a, cs_a, b + j, rs_b, c + j, rs_c, lane_mask(rest));
    }
}

}  // namespace

void gemm_avx512(std::size_t m, std::size_t n, std::size_t k, const double* a, std::ptrdiff_t rs_a,
                 std::ptrdiff_t cs_a, const double* b, std::ptrdiff_t rs_b, double* c, std::ptrdiff_t rs_c) {
    std::size_t i = 0;
    auto at = [&](std::size_t row) { return static_cast<std::ptrdiff_t>(row); };
    for (; i + 8 <= m; i += 8) row_panel<8>(n, k, a + at(i) * rs_a, rs_a, cs_a, b, rs_b, c + at(i) * rs_c, rs_c);
    if (i + 4 <= m) {
        row_panel<4>(n, k, a + at(i) * rs_a, rs_a, cs_a, b, rs_b, c + at(i) * rs_c, rs_c);
        i += 4;
    }
    if (i + 2 <= m) {
        row_panel<2>(n, k, a + at(i) * rs_a, rs_a, cs_a, b, rs_b, c + at(i) * rs_c, rs_c);
        i += 2;
    }
    if (i < m) row_panel<1>(n, k, a + at(i) * rs_a, rs_a, cs_a, b, rs_b, c + at(i) * rs_c, rs_c);
}

}  // namespace elite::kernels::detail
