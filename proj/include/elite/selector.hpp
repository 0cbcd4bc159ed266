#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "elite/stack_io.hpp"

namespace elite::selector {

/// Per-pixel temporal statistics of one band and their ratio.
/// sigma uses the n-1 divisor; ratio is flagged invalid where mean == 0.
struct Dispersion {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> sigma;
    std::vector<double> mean;
    std::vector<double> ratio;
    std::vector<std::uint8_t> valid;
};

struct DispersionMaps {
    Dispersion amplitude;  ///< D_A = sigma_a / mu_a
    Dispersion coherence;  ///< D_c = sigma_c / mu_c
};

enum class AcceptanceRule {
    paper_literal,  ///< accept a DS pixel when F exceeds the upper critical value
    two_sided,      ///< accept when F lies between the alpha/2 quantiles
};

std::string to_string(AcceptanceRule rule);
AcceptanceRule acceptance_rule_from_string(const std::string& name);

struct SelectorConfig {
    double ps_threshold = 0.25;  ///< on D_A
    double ds_threshold = 0.5;   ///< on D_c
    double alpha = 0.05;
    AcceptanceRule rule = AcceptanceRule::paper_literal;

    void validate() const;
};

struct Pixel {
    std::size_t row = 0;
    std::size_t col = 0;
    bool operator==(const Pixel&) const = default;
};

struct Candidates {
    std::vector<Pixel> ps;  ///< linear-index order
    std::vector<Pixel> ds;  ///< linear-index order, disjoint from ps
};

struct FisherOutcome {
    double statistic = 0.0;   ///< (sigma_ds / sigma_ps)^2
    double raw_ratio = 0.0;   ///< sigma_ds / sigma_ps, as printed in the classic formulation
    double critical = 0.0;    ///< upper critical value used by the rule
    double critical_low = 0.0;  ///< lower bound (two-sided rule only)
    bool accepted = false;
    bool degenerate = false;  ///< sigma_ps == 0; the pixel is rejected
    std::size_t d1 = 0;
    std::size_t d2 = 0;
};

/// Thrown by voronoi_assign when there is no PS seed to own a DS pixel.
class EmptyPsSet : public std::runtime_error {
public:
    EmptyPsSet() : std::runtime_error("empty PS candidate set: no DS pixel can be assigned") {}
};

Dispersion band_dispersion(std::span<const float> band, std::size_t epochs, std::size_t height, std::size_t width);
Dispersion amplitude_dispersion(const io::InterferogramStack& stack);
Dispersion coherence_dispersion(const io::InterferogramStack& stack);

/// Sample mean and n-1 standard deviation of one series (two-pass, 64-bit).
struct SeriesStats {
    double mean = 0.0;
    double sigma = 0.0;
};
SeriesStats series_stats(std::span<const double> series);

Candidates select_candidates(const DispersionMaps& maps, const SelectorConfig& cfg);

/// For each DS pixel, the index into `ps` of its nearest PS pixel (squared
/// Euclidean pixel distance; ties go to the lowest linear index row*w+col).
/// Uses a uniform bucket grid; results are identical to an exhaustive scan.
std::vector<std::size_t> voronoi_assign(std::span<const Pixel> ps, std::span<const Pixel> ds, std::size_t width);

/// Critical values for dof (n_t - 1, n_t - 1) under cfg's rule; computed once
/// per stack rather than per DS pixel.
struct FisherCriticals {
    double upper = 0.0;
    double lower = 0.0;
    std::size_t dof = 0;
};
FisherCriticals fisher_criticals(std::size_t epochs, const SelectorConfig& cfg);

FisherOutcome fisher_test(double sigma_ps, double sigma_ds, std::size_t epochs, const SelectorConfig& cfg);
FisherOutcome fisher_test(double sigma_ps, double sigma_ds, const SelectorConfig& cfg, const FisherCriticals& crit);

struct SelectionResult {
    io::EliteMask mask;
    std::size_t ps_count = 0;
    std::size_t ds_count = 0;
    std::size_t ds_accepted = 0;
    std::vector<std::string> warnings;
};

/// PS candidates plus every DS candidate whose Fisher test against its
/// Voronoi-owning PS pixel accepts.
SelectionResult elite_labels(const io::InterferogramStack& stack, const SelectorConfig& cfg);

}  // namespace elite::selector
