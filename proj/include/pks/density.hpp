/// \file density.hpp
/// Cell-averaged radial density profiles and exact moment quadrature.
///
/// A profile is finite-volume data: faces 0 = r_0 < r_1 < ... < r_N and one
/// nonnegative cell-averaged value per cell (r_i, r_{i+1}). Moments are
/// evaluated with closed-form per-cell power-rule integrals against the
/// piecewise-constant density, so mass bookkeeping is exact to rounding.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pks/dimension.hpp"
#include "pks/quadrature.hpp"

namespace pks {

class RadialDensity {
 public:
  RadialDensity(Dimension dim, std::vector<double> faces,
                std::vector<double> values)
      : dim_(dim), faces_(std::move(faces)), values_(std::move(values)) {
    if (faces_.size() < 2) {
      throw std::invalid_argument("RadialDensity: need at least one cell");
    }
    if (values_.size() + 1 != faces_.size()) {
      throw std::invalid_argument(
          "RadialDensity: values must have one entry per cell");
    }
    if (faces_.front() != 0.0) {
      throw std::invalid_argument("RadialDensity: first face must be exactly 0");
    }
    for (std::size_t i = 1; i < faces_.size(); ++i) {
      if (!(faces_[i] > faces_[i - 1]) || !std::isfinite(faces_[i])) {
        throw std::invalid_argument(
            "RadialDensity: faces must be finite and strictly increasing");
      }
    }
    for (double v : values_) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(
            "RadialDensity: cell values must be finite and >= 0");
      }
    }
  }

  Dimension dim() const { return dim_; }
  int cells() const { return static_cast<int>(values_.size()); }
  std::span<const double> faces() const { return faces_; }
  std::span<const double> values() const { return values_; }
  double face(int i) const { return faces_[static_cast<std::size_t>(i)]; }
  double value(int i) const { return values_[static_cast<std::size_t>(i)]; }
  double outer_radius() const { return faces_.back(); }

 private:
  Dimension dim_;
  std::vector<double> faces_;
  std::vector<double> values_;
};

/// Integral of r^{p-1} over one cell: (b^p - a^p) / p, p > 0.
inline double cell_power_integral(double a, double b, double p) {
  return (std::pow(b, p) - std::pow(a, p)) / p;
}

/// Moment M_mu = int |x|^mu rho dx
///             = |S^{nu-1}| sum_i rho_i int_{r_i}^{r_{i+1}} r^{mu+nu-1} dr,
/// with each cell integral in closed form. mu = 0 is the total mass.
inline double moment(const RadialDensity& rho, double mu) {
  if (mu < 0.0) {
    throw std::invalid_argument("moment: mu must be >= 0");
  }
  const double p = mu + rho.dim().value();
  const int n = rho.cells();
  std::vector<double> terms(static_cast<std::size_t>(n));
  // Integer p is the common case along trajectories; ipow is cheaper and as
  // accurate as pow there.
  const int pi = static_cast<int>(p);
  const bool integer_p = (p == static_cast<double>(pi));
  double prev = 0.0;  // r^p at the left face
  for (int i = 0; i < n; ++i) {
    const double rb = rho.face(i + 1);
    const double next = integer_p ? ipow(rb, pi) : std::pow(rb, p);
    terms[static_cast<std::size_t>(i)] = rho.value(i) * (next - prev);
    prev = next;
  }
  return sphere_area(rho.dim()) * pairwise_sum(terms) / p;
}

inline double total_mass(const RadialDensity& rho) { return moment(rho, 0.0); }

inline double max_density(const RadialDensity& rho) {
  double m = 0.0;
  for (double v : rho.values()) m = std::max(m, v);
  return m;
}

/// Residual of the moment interpolation inequality
///   M_2 <= M_0^{(nu-2)/nu} M_nu^{2/nu},
/// returned as rhs - lhs. Nonnegative (up to rounding) for every admissible
/// profile; exactly zero in dimension two.
inline double interpolation_residual(const RadialDensity& rho) {
  const int nu = rho.dim().value();
  const double m0 = moment(rho, 0.0);
  const double m2 = moment(rho, 2.0);
  const double mnu = moment(rho, static_cast<double>(nu));
  const double bound = std::pow(m0, (nu - 2.0) / nu) * std::pow(mnu, 2.0 / nu);
  return bound - m2;
}

/// Merge cells in groups of `factor` (mass-preserving); a trailing remainder
/// group absorbs the leftover cells. Used to cap quadrature cost on fine grids.
inline RadialDensity coarsen(const RadialDensity& rho, int factor) {
  if (factor < 1) throw std::invalid_argument("coarsen: factor must be >= 1");
  if (factor == 1) return rho;
  const int n = rho.cells();
  const int nu = rho.dim().value();
  std::vector<double> faces{0.0};
  std::vector<double> values;
  int i = 0;
  while (i < n) {
    int j = std::min(i + factor, n);
    if (n - j < factor && j < n) j = n;  // fold remainder into the last group
    const double a = rho.face(i);
    const double b = rho.face(j);
    double mass = 0.0;
    for (int k = i; k < j; ++k) {
      mass += rho.value(k) *
              cell_power_integral(rho.face(k), rho.face(k + 1), nu);
    }
    faces.push_back(b);
    values.push_back(mass / cell_power_integral(a, b, nu));
    i = j;
  }
  return RadialDensity(rho.dim(), std::move(faces), std::move(values));
}

}  // namespace pks
