#pragma once

// Scalar special functions used by the matching statistics, the threshold
// optimality condition and the IRSA waterfall approximation.
//
// All functions are pure and reentrant. Domain violations throw
// std::domain_error; results that cannot be represented in a double throw
// std::overflow_error.

namespace sqra {

/// Regularized upper incomplete gamma function Γ(s, x) / Γ(s).
double reg_gamma_upper(double s, double x);

/// Regularized lower incomplete gamma function γ(s, x) / Γ(s), computed as
/// 1 - reg_gamma_upper(s, x) so the two always sum to one.
double reg_gamma_lower(double s, double x);

/// Generalized Marcum Q-function Q_M(a, b) of real order M > 0.
///
/// Equals the survival function at b^2 of a noncentral chi-square variable
/// with 2M degrees of freedom and noncentrality a^2. Evaluated as a Poisson
/// mixture of regularized upper gamma tails, summed outward from the Poisson
/// mode with a geometric truncation bound.
double marcum_q(double order, double a, double b);

/// Modified Bessel function of the first kind I_ν(x), ν >= -1, x >= 0.
double bessel_i(double order, double x);

/// Exponentially scaled e^{-x} I_ν(x); finite wherever bessel_i overflows.
double bessel_i_scaled(double order, double x);

/// Natural logarithm of I_ν(x). Returns -inf where I_ν(x) = 0.
double log_bessel_i(double order, double x);

/// Standard normal tail probability Pr(N(0,1) > x).
double gaussian_q(double x);

}  // namespace sqra
