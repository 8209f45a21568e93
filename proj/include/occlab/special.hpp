#pragma once

// Thin wrappers over <cmath> and Boost.Math special functions, plus the few
// closed-form tail series used by the test statistics.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

namespace occlab {

// Raised when precision escalation fails or an evaluation cannot reach its
// declared tolerance; the CLI maps it to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double beta_ln(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double log_comb(long long n, long long k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

inline double digamma(double x) { return boost::math::digamma(x); }
inline double trigamma(double x) { return boost::math::trigamma(x); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double beta_cdf(double x, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(a, b, x);
}

inline double beta_quantile(double u, double a, double b) {
  return boost::math::ibeta_inv(a, b, u);
}

inline double chi_square_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

// Survival function of the Kolmogorov distribution,
// Q(lam) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lam^2), truncated at 100 terms.
inline double kolmogorov_sf(double lam) {
  if (lam <= 0.05) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    double term = std::exp(-2.0 * j * j * lam * lam);
    sum += (j % 2 == 1) ? term : -term;
    if (term < 1e-18) break;
  }
  double q = 2.0 * sum;
  if (q < 0.0) q = 0.0;
  if (q > 1.0) q = 1.0;
  return q;
}

}  // namespace occlab
