#pragma once

// Dense inner-loop kernels behind the convolution and dense layers.
//
// Every kernel has a portable scalar reference and, on x86-64, AVX2/FMA and
// AVX-512 variants. The AVX-512 table only swaps in a wider GEMM with the same
// per-element operation order, so it matches the AVX2 table bit for bit. The
// active table is picked once at startup from CPUID and can be forced with
// ELITE_PIXEL_ISA=scalar|avx2|avx512 or set_kernel_isa().

#include <cstddef>
#include <string_view>

namespace elite::kernels {

enum class Isa { scalar, avx2, avx512 };

/// C[i][j] += sum_p A(i, p) * B[p][j] for i < m, j < n, p < k, where
/// A(i, p) = a[i * rs_a + p * cs_a], B[p][j] = b[p * rs_b + j],
/// C[i][j] = c[i * rs_c + j]. The p-sum runs in increasing order.
using GemmFn = void (*)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::ptrdiff_t rs_a,
                        std::ptrdiff_t cs_a, const double* b, std::ptrdiff_t rs_b, double* c, std::ptrdiff_t rs_c);

/// y[i] += alpha * x[i]
using AxpyFn = void (*)(std::size_t n, double alpha, const double* x, double* y);

/// sum_i x[i] * y[i]
using DotFn = double (*)(std::size_t n, const double* x, const double* y);

/// x[i] = exp(x[i]); results below the normal range flush to 0.
using ExpFn = void (*)(std::size_t n, double* x);

struct KernelTable {
    Isa isa;
    GemmFn gemm;
    AxpyFn axpy;
    DotFn dot;
    ExpFn exp;
};

const KernelTable& scalar_kernels() noexcept;
/// Null when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels() noexcept;
/// Null when the build or the CPU lacks AVX-512F+FMA.
const KernelTable* avx512_kernels() noexcept;
const KernelTable* kernels_for(Isa isa) noexcept;

const KernelTable& active() noexcept;
/// Returns false (and leaves the table unchanged) if `isa` is unavailable.
bool set_kernel_isa(Isa isa) noexcept;
bool isa_available(Isa isa) noexcept;
std::string_view to_string(Isa isa) noexcept;

inline void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::ptrdiff_t rs_a,
                 std::ptrdiff_t cs_a, const double* b, std::ptrdiff_t rs_b, double* c, std::ptrdiff_t rs_c) {
    active().gemm(m, n, k, a, rs_a, cs_a, b, rs_b, c, rs_c);
}
inline void axpy(std::size_t n, double alpha, const double* x, double* y) { active().axpy(n, alpha, x, y); }
inline double dot(std::size_t n, const double* x, const double* y) { return active().dot(n, x, y); }
inline void exp_inplace(std::size_t n, double* x) { active().exp(n, x); }

namespace detail {
void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::ptrdiff_t rs_a, std::ptrdiff_t cs_a,
                 const double* b, std::ptrdiff_t rs_b, double* c, std::ptrdiff_t rs_c);
void axpy_scalar(std::size_t n, double alpha, const double* x, double* y);
double dot_scalar(std::size_t n, const double* x, const double* y);
void exp_scalar(std::size_t n, double* x);

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::ptrdiff_t rs_a, std::ptrdiff_t cs_a,
               const double* b, std::ptrdiff_t rs_b, double* c, std::ptrdiff_t rs_c);
void axpy_avx2(std::size_t n, double alpha, const double* x, double* y);
double dot_avx2(std::size_t n, const double* x, const double* y);
void exp_avx2(std::size_t n, double* x);

void gemm_avx512(std::size_t m, std::size_t n, std::size_t k, const double* a, std::ptrdiff_t rs_a,
                 std::ptrdiff_t cs_a, const double* b, std::ptrdiff_t rs_b, double* c, std::ptrdiff_t rs_c);
}  // namespace detail

}  // namespace elite::kernels
