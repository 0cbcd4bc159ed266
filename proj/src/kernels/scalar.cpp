#include <cmath>
#include <limits>

#include "elite/kernels.hpp"

namespace elite::kernels::detail {

void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::ptrdiff_t rs_a, std::ptrdiff_t cs_a,
                 const double* b, std::ptrdiff_t rs_b, double* c, std::ptrdiff_t rs_c) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + static_cast<std::ptrdiff_t>(i) * rs_c;
        const double* ai = a + static_cast<std::ptrdiff_t>(i) * rs_a;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[static_cast<std::ptrdiff_t>(p) * cs_a];
            const double* bp = b + static_cast<std::ptrdiff_t>(p) * rs_b;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot_scalar(std::size_t n, const double* x, const double* y) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void exp_scalar(std::size_t n, double* x) {
    for (std::size_t i = 0; i < n; ++i) {
        const double e = std::exp(x[i]);
        x[i] = e < std::numeric_limits<double>::min() ? 0.0 : e;
    }
}

}  // namespace elite::kernels::detail
