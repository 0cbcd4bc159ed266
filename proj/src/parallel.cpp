#include "elite/parallel.hpp"

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <cstring>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace elite {

namespace {
std::atomic<std::size_t> g_threads{1};
}

std::size_t thread_count() noexcept { return g_threads.load(std::memory_order_relaxed); }

void set_thread_count(std::size_t n) noexcept { g_threads.store(n == 0 ? 1 : n, std::memory_order_relaxed); }

std::size_t thread_count_from_env() noexcept {
    const char* raw = std::getenv("ELITE_PIXEL_THREADS");
    if (!raw) return 0;
    std::size_t value = 0;
    const char* end = raw + std::strlen(raw);
    const auto [ptr, ec] = std::from_chars(raw, end, value);
    if (ec != std::errc() || ptr != end) return 0;
    return value;
}

void retain_freed_memory() noexcept {
#if defined(__GLIBC__)
    // The mmap threshold is capped far below tape sizes, so turn mmap off.
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace elite
