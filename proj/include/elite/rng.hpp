#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace elite {

/// Counter-based generator built on the SplitMix64 finalizer.
///
/// Draw i of stream s under key k is
///     mix64(key_s + (i + 1) * 0x9E3779B97F4A7C15)
/// where key_s = mix64(k ^ mix64(s + 0x9E3779B97F4A7C15)) and mix64 is the
/// SplitMix64 output function (xor-shift 30/27/31 with multipliers
/// 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB). Any draw can be computed
/// directly from (key, stream, index), so row-parallel generation yields the
/// same values as a sequential pass.
class CounterRng {
public:
    static constexpr const char* kAlgorithm = "splitmix64-counter/1";
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static constexpr std::uint64_t stream_key(std::uint64_t key, std::uint64_t stream) noexcept {
        return mix64(key ^ mix64(stream + kGamma));
    }

    constexpr CounterRng(std::uint64_t key, std::uint64_t stream = 0, std::uint64_t counter = 0) noexcept
        : key_(stream_key(key, stream)), counter_(counter) {}

    /// Random-access draw; does not advance the counter.
    constexpr std::uint64_t at(std::uint64_t index) const noexcept {
        return mix64(key_ + (index + 1) * kGamma);
    }

    constexpr std::uint64_t next_u64() noexcept { return at(counter_++); }

    /// Uniform on [0, 1) with 53 random bits.
    double next_uniform() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform on (0, 1]; safe as a log() argument.
    double next_uniform_open0() noexcept { return 1.0 - next_uniform(); }

    /// Standard normal via Box-Muller (cosine branch only, two draws each).
    double next_normal() noexcept {
        const double u1 = next_uniform_open0();
        const double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, n) by 128-bit multiply-shift.
    std::uint64_t next_below(std::uint64_t n) noexcept {
        const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<std::uint64_t>(wide >> 64);
    }

    constexpr std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace elite
