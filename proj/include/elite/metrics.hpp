#pragma once

// Hard-count evaluation with elite as the positive class.

#include <cstdint>
#include <string>

#include "elite/stack_io.hpp"

namespace elite::metrics {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Counts over pixels valid in both masks.
ConfusionCounts confusion(const io::EliteMask& pred, const io::EliteMask& truth);

enum class Rounding {
    truncate,   ///< drop digits past the second decimal (the published tables' convention)
    half_away,  ///< round half away from zero
};
std::string to_string(Rounding r);
Rounding rounding_from_string(const std::string& name);

/// 100 * num / den in exact integer hundredths of a percent.
std::int64_t percent_hundredths(std::uint64_t num, std::uint64_t den, Rounding rounding);
/// Formats integer hundredths as "12.34".
std::string format_hundredths(std::int64_t hundredths);

/// One score: exact ratio plus its 2-decimal rendering. `defined` is false
/// when the denominator is zero; the value is then 0.
struct Score {
    std::uint64_t num = 0;
    std::uint64_t den = 0;
    bool defined = false;

    double percent() const noexcept;
    std::int64_t hundredths(Rounding rounding) const;
    std::string text(Rounding rounding) const;
};

struct Scores {
    Score accuracy;
    Score precision;
    Score recall;
    Score f1;  ///< 2 tp / (2 tp + fp + fn)
};

/// Throws InvalidArgument when the counts are all zero.
Scores scores(const ConfusionCounts& c);

/// 100 * elite / valid. Throws InvalidArgument with no valid pixels.
Score pixel_density(std::uint64_t elite, std::uint64_t valid);
Score pixel_density(const io::EliteMask& mask);

/// JSON report {counts, scores, density} and a matching CSV header/row.
std::string json_report(const ConfusionCounts& c, const Scores& s, const Score& pred_density,
                        const Score& truth_density, Rounding rounding);
std::string csv_header();
std::string csv_row(const std::string& scene, const ConfusionCounts& c, const Scores& s, const Score& pred_density,
                    Rounding rounding);

}  // namespace elite::metrics
