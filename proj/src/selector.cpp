#include "elite/selector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "elite/errors.hpp"
#include "elite/fdist.hpp"
#include "elite/parallel.hpp"

namespace elite::selector {

std::string to_string(AcceptanceRule rule) {
    return rule == AcceptanceRule::paper_literal ? "paper_literal" : "two_sided";
}

AcceptanceRule acceptance_rule_from_string(const std::string& name) {
    if (name == "paper_literal") return AcceptanceRule::paper_literal;
    if (name == "two_sided") return AcceptanceRule::two_sided;
    throw InvalidArgument("unknown acceptance rule '" + name + "'");
}

void SelectorConfig::validate() const {
    if (!(ps_threshold > 0.0) || !(ds_threshold > 0.0)) throw InvalidArgument("dispersion thresholds must be > 0");
    if (!(alpha > 0.0 && alpha < 0.5)) throw InvalidArgument("significance alpha must lie in (0, 0.5)");
}

SeriesStats series_stats(std::span<const double> series) {
    const auto n = static_cast<double>(series.size());
    double sum = 0.0;
    for (const double v : series) sum += v;
    const double mean = sum / n;
    double ss = 0.0;
    for (const double v : series) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

Dispersion band_dispersion(std::span<const float> band, std::size_t epochs, std::size_t height, std::size_t width) {
    if (epochs < 2) throw InvalidArgument("dispersion needs at least 2 epochs");
    const std::size_t plane = height * width;
    if (band.size() != epochs * plane) throw ShapeError("band length does not match n_t*h*w");

    Dispersion d;
    d.height = height;
    d.width = width;
    d.sigma.assign(plane, 0.0);
    d.mean.assign(plane, 0.0);
    d.ratio.assign(plane, 0.0);
    d.valid.assign(plane, 0);
    parallel_for(height, [&](std::size_t r) {
        std::vector<double> series(epochs);
        for (std::size_t c = 0; c < width; ++c) {
            const std::size_t p = r * width + c;
            for (std::size_t t = 0; t < epochs; ++t) series[t] = band[t * plane + p];
            const auto s = series_stats(series);
            d.mean[p] = s.mean;
            d.sigma[p] = s.sigma;
            if (s.mean > 0.0) {
                d.ratio[p] = s.sigma / s.mean;
                d.valid[p] = 1;
            }
        }
    });
    return d;
}

Dispersion amplitude_dispersion(const io::InterferogramStack& stack) {
    return band_dispersion(stack.amplitude, stack.epochs, stack.height, stack.width);
}

Dispersion coherence_dispersion(const io::InterferogramStack& stack) {
    return band_dispersion(stack.coherence, stack.epochs, stack.height, stack.width);
}

Candidates select_candidates(const DispersionMaps& maps, const SelectorConfig& cfg) {
    cfg.validate();
    const auto& a = maps.amplitude;
    const auto& c = maps.coherence;
    if (a.height != c.height || a.width != c.width) throw ShapeError("dispersion maps differ in shape");
    Candidates out;
    for (std::size_t p = 0; p < a.height * a.width; ++p) {
        const Pixel px{p / a.width, p % a.width};
        if (a.valid[p] && a.ratio[p] < cfg.ps_threshold) {
            out.ps.push_back(px);
        } else if (c.valid[p] && c.ratio[p] < cfg.ds_threshold) {
            out.ds.push_back(px);
        }
    }
    return out;
}

std::vector<std::size_t> voronoi_assign(std::span<const Pixel> ps, std::span<const Pixel> ds, std::size_t width) {
    if (ps.empty()) throw EmptyPsSet();
    if (ds.empty()) return {};

    std::size_t max_row = 0;
    for (const auto& p : ps) max_row = std::max(max_row, p.row);
    for (const auto& p : ds) max_row = std::max(max_row, p.row);
    const auto outside = [width](const Pixel& p) { return p.col >= width; };
    if (std::any_of(ps.begin(), ps.end(), outside) || std::any_of(ds.begin(), ds.end(), outside)) {
        throw InvalidArgument("point column lies outside the stated image width");
    }
    const std::size_t extent_r = max_row + 1;
    const std::size_t extent_c = width;

    // About one PS seed per bucket.
    const double area = static_cast<double>(extent_r) * static_cast<double>(extent_c);
    const auto cell = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(area / static_cast<double>(ps.size())))));
    const std::size_t grid_r = (extent_r + cell - 1) / cell;
    const std::size_t grid_c = (extent_c + cell - 1) / cell;

    std::vector<std::size_t> bucket_start(grid_r * grid_c + 1, 0);
    for (const auto& p : ps) ++bucket_start[(p.row / cell) * grid_c + p.col / cell + 1];
    for (std::size_t b = 1; b < bucket_start.size(); ++b) bucket_start[b] += bucket_start[b - 1];
    std::vector<std::size_t> bucket_items(ps.size());
    {
        auto fill = bucket_start;
        for (std::size_t i = 0; i < ps.size(); ++i) {
            bucket_items[fill[(ps[i].row / cell) * grid_c + ps[i].col / cell]++] = i;
        }
    }

    const auto linear = [&](const Pixel& p) { return p.row * width + p.col; };
    std::vector<std::size_t> owner(ds.size());
    parallel_for(ds.size(), [&](std::size_t q) {
        const auto& target = ds[q];
        const auto qr = static_cast<std::int64_t>(target.row / cell);
        const auto qc = static_cast<std::int64_t>(target.col / cell);
        const auto cell_i = static_cast<std::int64_t>(cell);
        std::int64_t best_d2 = std::numeric_limits<std::int64_t>::max();
        std::size_t best = ps.size();
        std::size_t best_linear = 0;

        const auto visit = [&](std::int64_t br, std::int64_t bc) {
            if (br < 0 || bc < 0 || br >= static_cast<std::int64_t>(grid_r) || bc >= static_cast<std::int64_t>(grid_c)) return;
            const auto b = static_cast<std::size_t>(br) * grid_c + static_cast<std::size_t>(bc);
            for (std::size_t k = bucket_start[b]; k < bucket_start[b + 1]; ++k) {
                const std::size_t i = bucket_items[k];
                const auto dr = static_cast<std::int64_t>(ps[i].row) - static_cast<std::int64_t>(target.row);
                const auto dc = static_cast<std::int64_t>(ps[i].col) - static_cast<std::int64_t>(target.col);
                const std::int64_t d2 = dr * dr + dc * dc;
                const std::size_t lin = linear(ps[i]);
                if (d2 < best_d2 || (d2 == best_d2 && lin < best_linear)) {
                    best_d2 = d2;
                    best = i;
                    best_linear = lin;
                }
            }
        };

        const auto max_ring = static_cast<std::int64_t>(std::max(grid_r, grid_c));
        for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
            if (ring == 0) {
                visit(qr, qc);
            } else {
                for (std::int64_t d = -ring; d <= ring; ++d) {
                    visit(qr - ring, qc + d);
                    visit(qr + ring, qc + d);
                }
                for (std::int64_t d = -ring + 1; d <= ring - 1; ++d) {
                    visit(qr + d, qc - ring);
                    visit(qr + d, qc + ring);
                }
            }
            // Any point in ring+1 is at least ring*cell+1 pixels away along one axis.
            const std::int64_t next_bound = ring * cell_i + 1;
            if (best < ps.size() && best_d2 < next_bound * next_bound) break;
        }
        owner[q] = best;
    });
    return owner;
}

FisherCriticals fisher_criticals(std::size_t epochs, const SelectorConfig& cfg) {
    cfg.validate();
    if (epochs < 2) throw InvalidArgument("Fisher test needs at least 2 epochs");
    FisherCriticals crit;
    crit.dof = epochs - 1;
    const auto dof = static_cast<double>(crit.dof);
    if (cfg.rule == AcceptanceRule::paper_literal) {
        crit.upper = f_critical(cfg.alpha, dof, dof);
    } else {
        crit.upper = f_critical(0.5 * cfg.alpha, dof, dof);
        crit.lower = f_critical(1.0 - 0.5 * cfg.alpha, dof, dof);
    }
    return crit;
}

FisherOutcome fisher_test(double sigma_ps, double sigma_ds, const SelectorConfig& cfg, const FisherCriticals& crit) {
    FisherOutcome out;
    out.d1 = crit.dof;
    out.d2 = crit.dof;
    out.critical = crit.upper;
    out.critical_low = crit.lower;
    if (!(sigma_ps > 0.0)) {
        out.degenerate = true;
        return out;
    }
    out.raw_ratio = sigma_ds / sigma_ps;
    out.statistic = out.raw_ratio * out.raw_ratio;
    if (cfg.rule == AcceptanceRule::paper_literal) {
        out.accepted = out.statistic > crit.upper;
    } else {
        out.accepted = out.statistic >= crit.lower && out.statistic <= crit.upper;
    }
    return out;
}

FisherOutcome fisher_test(double sigma_ps, double sigma_ds, std::size_t epochs, const SelectorConfig& cfg) {
    return fisher_test(sigma_ps, sigma_ds, cfg, fisher_criticals(epochs, cfg));
}

SelectionResult elite_labels(const io::InterferogramStack& stack, const SelectorConfig& cfg) {
    stack.validate();
    cfg.validate();
    DispersionMaps maps{amplitude_dispersion(stack), coherence_dispersion(stack)};
    const auto cand = select_candidates(maps, cfg);

    SelectionResult result;
    result.mask = io::EliteMask(stack.height, stack.width);
    result.ps_count = cand.ps.size();
    result.ds_count = cand.ds.size();
    for (const auto& p : cand.ps) result.mask.elite[p.row * stack.width + p.col] = 1;
    if (cand.ps.empty()) {
        result.warnings.emplace_back("no pixel passed the PS threshold; elite set is empty");
        return result;
    }

    const auto owner = voronoi_assign(cand.ps, cand.ds, stack.width);
    const auto crit = fisher_criticals(stack.epochs, cfg);
    std::size_t degenerate = 0;
    for (std::size_t j = 0; j < cand.ds.size(); ++j) {
        const auto& seed = cand.ps[owner[j]];
        const auto& px = cand.ds[j];
        const double sigma_ps = maps.amplitude.sigma[seed.row * stack.width + seed.col];
        const double sigma_ds = maps.amplitude.sigma[px.row * stack.width + px.col];
        const auto outcome = fisher_test(sigma_ps, sigma_ds, cfg, crit);
        if (outcome.degenerate) ++degenerate;
        if (outcome.accepted) {
            result.mask.elite[px.row * stack.width + px.col] = 1;
            ++result.ds_accepted;
        }
    }
    if (degenerate > 0) {
        result.warnings.push_back(std::to_string(degenerate) + " DS pixel(s) rejected: owning PS pixel has zero amplitude deviation");
    }
    return result;
}

}  // namespace elite::selector
