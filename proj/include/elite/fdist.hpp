#pragma once

namespace elite::selector {

/// Regularized incomplete beta I_x(a, b), by Lentz's continued fraction
/// (with the symmetry swap when x > (a + 1) / (a + b + 2)).
double regularized_incomplete_beta(double x, double a, double b);

/// CDF of the F(d1, d2) distribution at f >= 0.
double f_cdf(double f, double d1, double d2);

/// Upper-tail critical value: the (1 - alpha) quantile of F(d1, d2).
/// Bisection on f_cdf until the CDF residual is <= 1e-10; throws
/// NumericalError if the iteration cap is reached first.
double f_critical(double alpha, double d1, double d2);

}  // namespace elite::selector
