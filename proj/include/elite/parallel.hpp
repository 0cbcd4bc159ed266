#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace elite {

/// Worker cap used by every internal parallel loop. Defaults to 1.
std::size_t thread_count() noexcept;
void set_thread_count(std::size_t n) noexcept;

/// Reads ELITE_PIXEL_THREADS; returns 0 when unset or unparsable.
std::size_t thread_count_from_env() noexcept;

/// Asks the C allocator to keep large freed blocks for reuse instead of
/// returning them to the kernel. Training reallocates the same multi-megabyte
/// tapes every step, and fresh pages cost more than the arithmetic on them.
/// No-op outside glibc.
void retain_freed_memory() noexcept;

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index must write
/// only its own outputs, so the result is independent of the worker count.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
    const std::size_t workers = std::min(thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace elite
