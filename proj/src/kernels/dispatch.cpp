#include <atomic>
#include <cstdlib>
#include <string>

#include "elite/kernels.hpp"

namespace elite::kernels {

namespace {

const KernelTable kScalar{Isa::scalar, &detail::gemm_scalar, &detail::axpy_scalar, &detail::dot_scalar, &detail::exp_scalar};

#if defined(ELITE_HAVE_AVX2)
const KernelTable kAvx2{Isa::avx2, &detail::gemm_avx2, &detail::axpy_avx2, &detail::dot_avx2, &detail::exp_avx2};

bool cpu_supports(bool need_avx512) noexcept {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    const bool base = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return need_avx512 ? base && __builtin_cpu_supports("avx512f") : base;
#else
    (void)need_avx512;
    return false;
#endif
}
#endif

#if defined(ELITE_HAVE_AVX512)
const KernelTable kAvx512{Isa::avx512, &detail::gemm_avx512, &detail::axpy_avx2, &detail::dot_avx2,
                          &detail::exp_avx2};
#endif

const KernelTable* initial_table() noexcept {
    const KernelTable* best = &kScalar;
    if (const auto* t = avx2_kernels()) best = t;
    if (const auto* t = avx512_kernels()) best = t;
    if (const char* forced = std::getenv("ELITE_PIXEL_ISA")) {
        const std::string name(forced);
        for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512}) {
            if (name == to_string(isa)) {
                if (const auto* t = kernels_for(isa)) best = t;
            }
        }
    }
    return best;
}

std::atomic<const KernelTable*>& table_slot() noexcept {
    static std::atomic<const KernelTable*> slot{initial_table()};
    return slot;
}

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

const KernelTable* avx2_kernels() noexcept {
#if defined(ELITE_HAVE_AVX2)
    static const bool supported = cpu_supports(false);
    return supported ? &kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable* avx512_kernels() noexcept {
#if defined(ELITE_HAVE_AVX512)
    static const bool supported = cpu_supports(true);
    return supported ? &kAvx512 : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable* kernels_for(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return &kScalar;
    case Isa::avx2: return avx2_kernels();
    case Isa::avx512: return avx512_kernels();
    }
    return nullptr;
}

const KernelTable& active() noexcept { return *table_slot().load(std::memory_order_acquire); }

bool isa_available(Isa isa) noexcept { return kernels_for(isa) != nullptr; }

bool set_kernel_isa(Isa isa) noexcept {
    const auto* t = kernels_for(isa);
    if (!t) return false;
    table_slot().store(t, std::memory_order_release);
    return true;
}

std::string_view to_string(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::avx512: return "avx512";
    }
    return "unknown";
}

}  // namespace elite::kernels
