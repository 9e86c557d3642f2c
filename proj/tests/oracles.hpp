#pragma once

// Test-only reference computations. Nothing here calls into the library's
// evaluation paths except the plain pmf being differentiated.

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// Central difference with one Richardson step; h0 = 1e-5 max(1, |x|).
inline double richardson_derivative(const std::function<double(double)>& f, double x) {
  const double h = 1e-5 * std::max(1.0, std::abs(x));
  auto central = [&](double hh) { return (f(x + hh) - f(x - hh)) / (2.0 * hh); };
  return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

inline double geometric_pmf(double mean, int n) {
  // straightforward power form, no log-space tricks
  return std::pow(mean, n) / std::pow(mean + 1.0, n + 1);
}

inline double poisson_pmf(double mean, int n) {
  double p = std::exp(-mean);
  for (int k = 1; k <= n; ++k) p *= mean / k;
  return p;
}

/// Explicit convolution of two Bose-Einstein distributions.
inline double convolution_pmf(double a, double b, int n) {
  double s = 0.0;
  for (int k = 0; k <= n; ++k) s += geometric_pmf(a, k) * geometric_pmf(b, n - k);
  return s;
}

/// 4-sigma binomial band half-width for an empirical frequency.
inline double binomial_band(double p, double trials, double sigmas = 4.0) {
  return sigmas * std::sqrt(std::max(p * (1.0 - p), 1e-300) / trials) + 1.0 / trials;
}

}  // namespace oracle
