#pragma once

// Standard normal upper tail Q(x) and its inverse.

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

namespace coopmac {

/// Q(x) = P(Z > x) for a standard normal Z.
inline double gaussian_tail(double x) {
  if (!std::isfinite(x)) {
    throw std::domain_error("gaussian_tail: non-finite argument");
  }
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

/// Inverse of gaussian_tail on (0,1).
inline double gaussian_tail_inverse(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("gaussian_tail_inverse: probability must lie in (0,1)");
  }
  double x = std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
  // One Newton step against std::erfc keeps the pair gaussian_tail/inverse
  // consistent to the last few ulps.
  const double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  if (density > 0.0) {
    x += (gaussian_tail(x) - p) / density;
  }
  return x;
}

}  // namespace coopmac
