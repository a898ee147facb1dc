/// \file quadrature.hpp
/// Gauss-Legendre rules and order-fixed summation helpers.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace pks {

/// Pairwise (cascade) summation over a fixed-order range. Deterministic for a
/// given input order and more accurate than sequential accumulation.
inline double pairwise_sum(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x.first(h)) + pairwise_sum(x.subspan(h));
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
/// Newton iteration on the Legendre recurrence.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n) {
    if (n < 1) throw std::invalid_argument("GaussLegendre: need n >= 1");
    nodes.resize(n);
    weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
      double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double pp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p1 = 1.0, p2 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double p3 = p2;
          p2 = p1;
          p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
        }
        pp = n * (z * p1 - p2) / (z * z - 1.0);
        const double z1 = z;
        z = z1 - p1 / pp;
        if (std::abs(z - z1) < 1e-15) break;
      }
      nodes[i] = -z;
      nodes[n - 1 - i] = z;
      weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
      weights[n - 1 - i] = weights[i];
    }
  }

  /// Integrate f over [a, b].
  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double xm = 0.5 * (b + a);
    const double xl = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      s += weights[i] * f(xm + xl * nodes[i]);
    }
    return s * xl;
  }
};

}  // namespace pks
