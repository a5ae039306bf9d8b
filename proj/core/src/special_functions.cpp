#include "sqra/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sqra {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;
constexpr int kMaxGammaIterations = 10'000'000;

struct GammaPQ {
  double p;  // regularized lower
  double q;  // regularized upper
};

void check_gamma_args(double s, double x) {
  if (!std::isfinite(s) || !(s > 0.0)) {
    throw std::domain_error("incomplete gamma: shape must be positive and finite, got " +
                            std::to_string(s));
  }
  if (!std::isfinite(x) || !(x >= 0.0)) {
    throw std::domain_error("incomplete gamma: argument must be nonnegative and finite, got " +
                            std::to_string(x));
  }
}

// log of x^s e^{-x} / Γ(s)
double gamma_log_prefactor(double s, double x) {
  return s * std::log(x) - x - std::lgamma(s);
}

// Power series for P(s, x); converges quickly for x < s + 1.
double gamma_p_series(double s, double x) {
  double ap = s;
  double term = 1.0 / s;
  double sum = term;
  for (int n = 0; n < kMaxGammaIterations; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(gamma_log_prefactor(s, x));
}

// Continued fraction for Q(s, x) (modified Lentz); converges for x > s + 1.
double gamma_q_fraction(double s, double x) {
  double b = x + 1.0 - s;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxGammaIterations; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return std::exp(gamma_log_prefactor(s, x)) * h;
}

// Both tails, each computed from whichever expansion is well conditioned.
GammaPQ gamma_pq(double s, double x) {
  check_gamma_args(s, x);
  if (x == 0.0) return {0.0, 1.0};
  if (x < s + 1.0) {
    const double p = std::clamp(gamma_p_series(s, x), 0.0, 1.0);
    return {p, 1.0 - p};
  }
  const double q = std::clamp(gamma_q_fraction(s, x), 0.0, 1.0);
  return {1.0 - q, q};
}

}  // namespace

double reg_gamma_upper(double s, double x) { return gamma_pq(s, x).q; }

double reg_gamma_lower(double s, double x) { return 1.0 - reg_gamma_upper(s, x); }

double marcum_q(double order, double a, double b) {
  if (!std::isfinite(order) || !(order > 0.0)) {
    throw std::domain_error("marcum_q: order must be positive and finite");
  }
  if (!std::isfinite(a) || !std::isfinite(b) || !(a >= 0.0) || !(b >= 0.0)) {
    throw std::domain_error("marcum_q: arguments must be nonnegative and finite");
  }
  if (b == 0.0) return 1.0;
  const double x = 0.5 * b * b;
  if (a == 0.0) return reg_gamma_upper(order, x);

  // Q_M(a, b) = sum_j Pois(j; lambda) * Q(M + j, x), lambda = a^2 / 2.
  const double lambda = 0.5 * a * a;
  const double log_lambda = std::log(lambda);
  const double log_x = std::log(x);
  const double mode = std::floor(lambda);
  const auto j0 = static_cast<long long>(mode);

  auto log_pois = [&](double j) { return -lambda + j * log_lambda - std::lgamma(j + 1.0); };
  // log of x^{M+j} e^{-x} / Γ(M+j+1), the step between consecutive gamma tails
  auto log_step = [&](double j) {
    return (order + j) * log_x - x - std::lgamma(order + j + 1.0);
  };

  const GammaPQ at_mode = gamma_pq(order + mode, x);
  constexpr double kTruncation = 1e-18;

  // Upward: Q(s+1, x) = Q(s, x) + step(s) adds positive terms only.
  double sum = 0.0;
  {
    double q = at_mode.q;
    double log_w = log_pois(mode);
    double log_d = log_step(mode);
    for (long long j = j0;; ++j) {
      const double w = std::exp(log_w);
      sum += w * q;
      q = std::min(1.0, q + std::exp(log_d));
      const double jd = static_cast<double>(j);
      const double ratio = lambda / (jd + 1.0);
      log_w += log_lambda - std::log(jd + 1.0);
      log_d += log_x - std::log(order + jd + 1.0);
      if (ratio < 1.0) {
        const double tail_bound = std::exp(log_w) / (1.0 - ratio);
        if (tail_bound < kTruncation) break;
      }
      if (j - j0 > 100'000'000LL) break;
    }
  }
  // Downward: P(s, x) = P(s+1, x) + step(s), again only positive terms.
  {
    double p = at_mode.p;
    double log_w = log_pois(mode);
    for (long long j = j0 - 1; j >= 0; --j) {
      const double jd = static_cast<double>(j);
      log_w += std::log(jd + 1.0) - log_lambda;
      p = std::min(1.0, p + std::exp(log_step(jd)));
      const double w = std::exp(log_w);
      sum += w * (1.0 - p);
      // weights shrink geometrically going down: w_{j-1} / w_j = j / lambda
      const double ratio = jd / lambda;
      if (ratio < 1.0 && w * ratio / (1.0 - ratio) < kTruncation) break;
    }
  }
  return std::clamp(sum, 0.0, 1.0);
}

double log_bessel_i(double order, double x) {
  if (!std::isfinite(order) || order < -1.0) {
    throw std::domain_error("bessel_i: order must be finite and >= -1");
  }
  if (!std::isfinite(x) || !(x >= 0.0)) {
    throw std::domain_error("bessel_i: argument must be nonnegative and finite");
  }
  // I_{-n} = I_n for integer n
  if (order == -1.0) order = 1.0;
  if (x == 0.0) {
    if (order == 0.0) return 0.0;
    if (order > 0.0) return -std::numeric_limits<double>::infinity();
    throw std::overflow_error("bessel_i: I_nu(0) diverges for negative non-integer order");
  }

  // Ascending series I_ν(x) = Σ_k (x/2)^{ν+2k} / (k! Γ(ν+k+1)), summed in the
  // log domain relative to the largest term seen so far.
  const double log_quarter_x2 = 2.0 * std::log(0.5 * x);
  double log_term = order * std::log(0.5 * x) - std::lgamma(order + 1.0);
  double log_scale = log_term;
  double sum = 1.0;
  for (int k = 0; k < 10'000'000; ++k) {
    const double kd = static_cast<double>(k);
    log_term += log_quarter_x2 - std::log(kd + 1.0) - std::log(order + kd + 1.0);
    if (log_term > log_scale) {
      sum = sum * std::exp(log_scale - log_term) + 1.0;
      log_scale = log_term;
    } else {
      const double rel = std::exp(log_term - log_scale);
      sum += rel;
      // past the peak the terms decay at least geometrically
      const double next_ratio = 0.25 * x * x / ((kd + 2.0) * (order + kd + 2.0));
      if (next_ratio < 0.5 && rel < 0.25 * kEps * sum) break;
    }
  }
  return log_scale + std::log(sum);
}

double bessel_i(double order, double x) {
  const double log_value = log_bessel_i(order, x);
  if (log_value > std::log(std::numeric_limits<double>::max())) {
    throw std::overflow_error("bessel_i: result exceeds double range; use bessel_i_scaled");
  }
  return std::exp(log_value);
}

double bessel_i_scaled(double order, double x) {
  return std::exp(log_bessel_i(order, x) - x);
}

double gaussian_q(double x) {
  if (std::isnan(x)) throw std::domain_error("gaussian_q: NaN argument");
  return 0.5 * std::erfc(x / std::sqrt(2.0));
}

}  // namespace sqra
