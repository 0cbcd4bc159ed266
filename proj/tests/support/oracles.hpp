#pragma once
// Independent reference implementations used by the unit tests and the
// acceptance runner. Everything here is written as plain loops over the
// definitions, sharing no code with the library beyond its data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "elite/rng.hpp"
#include "elite/stack_io.hpp"
#include "elite/tensor.hpp"

namespace oracle {

// F(11, 11) and F(29, 29) quantiles from scipy.stats.f.ppf.
inline constexpr double kF95_11 = 2.8179304699530863;
inline constexpr double kF975_11 = 3.473699051085809;
inline constexpr double kF025_11 = 0.28787755798459863;
inline constexpr double kF95_10 = 2.9782370160823213;

inline void fill_uniform(std::span<double> x, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    elite::CounterRng rng(seed, 99);
    for (auto& v : x) v = lo + (hi - lo) * rng.next_uniform();
}

inline elite::nn::Tensor random_tensor(const elite::nn::Shape& shape, std::uint64_t seed, double lo = -1.0,
                                       double hi = 1.0) {
    elite::nn::Tensor t(shape);
    fill_uniform(t.values(), seed, lo, hi);
    return t;
}

/// Same-padded cross-correlation by direct summation.
inline std::vector<double> conv2d(const std::vector<double>& in, std::size_t h, std::size_t w, std::size_t cin,
                                  const std::vector<double>& kernel, std::size_t k, std::size_t cout,
                                  const std::vector<double>& bias) {
    std::vector<double> out(h * w * cout);
    const long half = static_cast<long>(k / 2);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            for (std::size_t o = 0; o < cout; ++o) {
                double s = bias.empty() ? 0.0 : bias[o];
                for (std::size_t ky = 0; ky < k; ++ky) {
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const long rr = static_cast<long>(r) + static_cast<long>(ky) - half;
                        const long cc = static_cast<long>(c) + static_cast<long>(kx) - half;
                        if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) continue;
                        for (std::size_t i = 0; i < cin; ++i) {
                            s += in[(static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)) * cin + i] *
                                 kernel[((ky * k + kx) * cin + i) * cout + o];
                        }
                    }
                }
                out[(r * w + c) * cout + o] = s;
            }
        }
    }
    return out;
}

/// Textbook LSTM over a single pixel. Weights are the 1x1 fused layout
/// (hidden + in, 4 hidden) with gate blocks forget | input | candidate |
/// output and input rows [y_prev, x]. Returns every hidden state.
inline std::vector<std::vector<double>> scalar_lstm(const std::vector<std::vector<double>>& xs, std::size_t hidden,
                                                    const std::vector<double>& weight, const std::vector<double>& bias) {
    const auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    const std::size_t cin = xs.empty() ? 0 : xs[0].size();
    std::vector<double> y(hidden, 0.0), s(hidden, 0.0);
    std::vector<std::vector<double>> out;
    for (const auto& x : xs) {
        std::vector<double> z(y);
        z.insert(z.end(), x.begin(), x.end());
        std::vector<double> ny(hidden), ns(hidden);
        for (std::size_t o = 0; o < hidden; ++o) {
            double pre[4];
            for (std::size_t g = 0; g < 4; ++g) {
                double a = bias[g * hidden + o];
                for (std::size_t i = 0; i < hidden + cin; ++i) a += z[i] * weight[i * 4 * hidden + g * hidden + o];
                pre[g] = a;
            }
            const double fg = sig(pre[0]), in = sig(pre[1]), cand = std::tanh(pre[2]), og = sig(pre[3]);
            ns[o] = fg * s[o] + in * cand;
            ny[o] = og * std::tanh(ns[o]);
        }
        y = ny;
        s = ns;
        out.push_back(y);
    }
    return out;
}

/// Index into `ps` of the nearest PS point for every DS point, by exhaustive
/// scan; ties to the lowest linear index.
inline std::vector<std::size_t> brute_voronoi(const std::vector<std::pair<std::size_t, std::size_t>>& ps,
                                              const std::vector<std::pair<std::size_t, std::size_t>>& ds,
                                              std::size_t width) {
    std::vector<std::size_t> owner;
    for (const auto& [dr, dc] : ds) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        std::size_t best_lin = 0;
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const double a = static_cast<double>(ps[i].first) - static_cast<double>(dr);
            const double b = static_cast<double>(ps[i].second) - static_cast<double>(dc);
            const double d = a * a + b * b;
            const std::size_t lin = ps[i].first * width + ps[i].second;
            if (d < best_d || (d == best_d && lin < best_lin)) {
                best = i;
                best_d = d;
                best_lin = lin;
            }
        }
        owner.push_back(best);
    }
    return owner;
}

struct SeriesMoments {
    double mean = 0.0;
    double sigma = 0.0;
};

inline SeriesMoments moments(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

/// Straight-line elite labelling: dispersion thresholds, exhaustive nearest
/// PS, squared sigma ratio against the supplied critical values. With
/// two_sided, accepts lo <= F <= hi; otherwise F > hi.
inline std::vector<std::uint8_t> straight_line_labels(const elite::io::InterferogramStack& s, double ps_thr,
                                                      double ds_thr, double hi, double lo, bool two_sided) {
    const std::size_t n = s.height * s.width;
    std::vector<double> sig_a(n), da(n), dc(n);
    std::vector<bool> da_ok(n), dc_ok(n);
    for (std::size_t p = 0; p < n; ++p) {
        std::vector<double> a, c;
        for (std::size_t t = 0; t < s.epochs; ++t) {
            a.push_back(s.amplitude[t * n + p]);
            c.push_back(s.coherence[t * n + p]);
        }
        const auto ma = moments(a), mc = moments(c);
        sig_a[p] = ma.sigma;
        da_ok[p] = ma.mean != 0.0;
        dc_ok[p] = mc.mean != 0.0;
        da[p] = da_ok[p] ? ma.sigma / ma.mean : 0.0;
        dc[p] = dc_ok[p] ? mc.sigma / mc.mean : 0.0;
    }
    std::vector<std::uint8_t> elite(n, 0);
    std::vector<std::size_t> ps;
    for (std::size_t p = 0; p < n; ++p) {
        if (da_ok[p] && da[p] < ps_thr) {
            elite[p] = 1;
            ps.push_back(p);
        }
    }
    if (ps.empty()) return elite;
    for (std::size_t p = 0; p < n; ++p) {
        if (elite[p] || !dc_ok[p] || !(dc[p] < ds_thr)) continue;
        const long r = static_cast<long>(p / s.width), c = static_cast<long>(p % s.width);
        std::size_t owner = ps[0];
        long best = std::numeric_limits<long>::max();
        for (std::size_t q : ps) {
            const long dr = static_cast<long>(q / s.width) - r, dcol = static_cast<long>(q % s.width) - c;
            const long d = dr * dr + dcol * dcol;
            if (d < best) {  // ps is in increasing linear order, so strict < keeps the lowest index on ties
                best = d;
                owner = q;
            }
        }
        if (sig_a[owner] == 0.0) continue;
        const double f = (sig_a[p] / sig_a[owner]) * (sig_a[p] / sig_a[owner]);
        const bool accept = two_sided ? (f >= lo && f <= hi) : f > hi;
        if (accept) elite[p] = 1;
    }
    return elite;
}

/// Largest relative error between an analytic gradient and a central
/// difference of `loss` over every element of `x`. Entries where both
/// gradients are below `floor` are compared against `floor`.
inline double max_fd_error(std::span<double> x, std::span<const double> analytic, const std::function<double()>& loss,
                           double h = 1e-6, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = loss();
        x[i] = keep - h;
        const double down = loss();
        x[i] = keep;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::fabs(numeric), std::fabs(analytic[i]), floor});
        worst = std::max(worst, std::fabs(numeric - analytic[i]) / denom);
    }
    return worst;
}

/// A scene made of hand-placed classes for the labelling oracles.
inline elite::io::InterferogramStack mixed_stack(std::size_t h, std::size_t w, std::size_t n_t, std::uint64_t seed) {
    elite::io::InterferogramStack s(n_t, h, w);
    elite::CounterRng rng(seed, 7);
    for (std::size_t p = 0; p < h * w; ++p) {
        const auto kind = rng.next_below(4);
        const double amp = kind == 0 ? 10.0 : kind == 1 ? 4.0 : kind == 2 ? 3.0 : 0.1;
        const double jit = kind == 0 ? 0.05 : kind == 1 ? 0.5 : kind == 2 ? 0.9 : 0.6;
        const double coh = kind == 0 ? 0.85 : kind == 1 ? 0.6 : kind == 2 ? 0.15 : 0.05;
        for (std::size_t t = 0; t < n_t; ++t) {
            const std::size_t i = t * h * w + p;
            s.amplitude[i] = static_cast<float>(std::max(0.0, amp * (1.0 + jit * rng.next_normal())));
            s.coherence[i] = static_cast<float>(std::clamp(coh + 0.1 * rng.next_normal(), 0.0, 1.0));
            s.phase[i] = static_cast<float>(3.0 * (rng.next_uniform() * 2.0 - 1.0));
        }
    }
    return s;
}

}  // namespace oracle
