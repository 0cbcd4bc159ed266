#include "elite/fdist.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "elite/errors.hpp"

namespace elite::selector {

namespace {

constexpr int kMaxFractionTerms = 1000;
constexpr int kMaxBisections = 400;
constexpr double kTiny = 1e-300;
constexpr double kResidual = 1e-10;

// Continued fraction for I_x(a, b), modified Lentz evaluation.
double beta_continued_fraction(double x, double a, double b) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxFractionTerms; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) <= 1e-16) return h;
    }
    throw NumericalError("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("incomplete beta needs a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("incomplete beta needs x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
    return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double f_cdf(double f, double d1, double d2) {
    if (!(d1 > 0.0) || !(d2 > 0.0)) throw InvalidArgument("F distribution needs positive degrees of freedom");
    if (!(f > 0.0)) return 0.0;
    if (std::isinf(f)) return 1.0;
    return regularized_incomplete_beta(d1 * f / (d1 * f + d2), 0.5 * d1, 0.5 * d2);
}

double f_critical(double alpha, double d1, double d2) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("significance must lie in (0, 1)");
    if (!(d1 >= 1.0) || !(d2 >= 1.0)) throw InvalidArgument("degrees of freedom must be >= 1");
    const double target = 1.0 - alpha;

    double lo = 0.0;
    double hi = 1.0;
    while (f_cdf(hi, d1, d2) < target) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw NumericalError("F quantile bracket overflowed");
    }
    for (int it = 0; it < kMaxBisections; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double residual = f_cdf(mid, d1, d2) - target;
        if (std::fabs(residual) <= kResidual) return mid;
        if (residual < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    throw NumericalError("F quantile bisection stalled for alpha=" + std::to_string(alpha) +
                         ", d1=" + std::to_string(d1) + ", d2=" + std::to_string(d2));
}

}  // namespace elite::selector
