/// \file dimension.hpp
/// Integer spatial dimension and the exact special-function values attached
/// to it (half-integer Gamma, unit-sphere areas).

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace pks {

/// Spatial dimension nu >= 2. The radial reduction and the exact Gamma
/// recurrence both require an integer dimension.
class Dimension {
 public:
  explicit Dimension(int nu) : nu_(nu) {
    if (nu < 2) {
      throw std::invalid_argument("Dimension: nu must be >= 2, got " +
                                  std::to_string(nu));
    }
  }

  int value() const { return nu_; }

  friend bool operator==(Dimension a, Dimension b) { return a.nu_ == b.nu_; }
  friend bool operator!=(Dimension a, Dimension b) { return a.nu_ != b.nu_; }

 private:
  int nu_;
};

/// Gamma(two_k / 2) for integer two_k >= 1, computed by the recurrence
/// Gamma(x+1) = x Gamma(x) from the base cases Gamma(1) = 1 and
/// Gamma(1/2) = sqrt(pi). Exact to rounding; no series approximation.
inline double gamma_half_integer(int two_k) {
  if (two_k <= 0) {
    throw std::invalid_argument("gamma_half_integer: argument must be >= 1");
  }
  double x = (two_k % 2 == 0) ? 1.0 : 0.5;
  double value = (two_k % 2 == 0) ? 1.0 : std::sqrt(M_PI);
  const double target = 0.5 * static_cast<double>(two_k);
  while (x < target) {
    value *= x;
    x += 1.0;
  }
  return value;
}

/// Surface area |S^{n-1}| of the unit sphere in ambient dimension n >= 1:
/// 2 pi^{n/2} / Gamma(n/2). n = 1 gives |S^0| = 2.
inline double unit_sphere_area(int n) {
  if (n < 1) {
    throw std::invalid_argument("unit_sphere_area: ambient dimension must be >= 1");
  }
  return 2.0 * std::pow(M_PI, 0.5 * static_cast<double>(n)) /
         gamma_half_integer(n);
}

/// |S^{nu-1}| for a validated dimension.
inline double sphere_area(Dimension dim) { return unit_sphere_area(dim.value()); }

/// x^n for small non-negative integer n.
inline double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

/// x^(two_p / 2) for non-negative integer two_p; odd values use one sqrt.
inline double pow_half_int(double x, int two_p) {
  const double r = ipow(x, two_p / 2);
  return (two_p % 2 == 0) ? r : r * std::sqrt(x);
}

}  // namespace pks
