/// \file criterion.hpp
/// Moment-based blow-up criterion for the point-source Patlak-Keller-Segel
/// system. The test compares M_nu^{(nu-2)/nu}(0) against a closed-form
/// threshold in (nu, Z, M_0); a strictly positive margin predicts finite-time
/// blow-up, anything else is inconclusive.

#pragma once

#include <cmath>
#include <stdexcept>

#include "pks/dimension.hpp"
#include "pks/density.hpp"

namespace pks {

/// Strength of the external point source at the origin. Positive is
/// repulsive, negative attractive.
class SourceStrength {
 public:
  explicit SourceStrength(double z) : z_(z) {
    if (!std::isfinite(z)) {
      throw std::invalid_argument("SourceStrength: Z must be finite");
    }
  }
  double value() const { return z_; }

 private:
  double z_;
};

enum class Prediction { BlowUpPredicted, Inconclusive };

inline const char* to_string(Prediction p) {
  return p == Prediction::BlowUpPredicted ? "blow-up-predicted" : "inconclusive";
}

/// Right-hand side of the criterion:
///   M_0^{2-2/nu} / ((nu-1) 2^nu |S^{nu-1}|)  -  Z M_0^{1-2/nu} / (2 (nu-1) |S^{nu-1}|).
/// May be negative for strongly repulsive sources; the caller interprets.
inline double blowup_rhs(Dimension dim, SourceStrength Z, double m0) {
  if (!(m0 > 0.0)) {
    throw std::invalid_argument("blowup_rhs: m0 must be > 0");
  }
  const int nu = dim.value();
  const double area = sphere_area(dim);
  const double inv = 1.0 / ((nu - 1.0) * area);
  return std::pow(m0, 2.0 - 2.0 / nu) * inv / ipow(2.0, nu) -
         0.5 * Z.value() * std::pow(m0, 1.0 - 2.0 / nu) * inv;
}

struct Verdict {
  Prediction predicted;
  double lhs;     ///< M_nu^{(nu-2)/nu}; exactly 1 in dimension two
  double rhs;     ///< blowup_rhs(dim, Z, m0)
  double margin;  ///< rhs - lhs; blow-up predicted iff margin > 0 strictly
  int nu;
  double Z;
  double m0;
  double m_nu;
};

/// Evaluate the criterion on initial moments. Conventions: nu = 2 gives
/// lhs = 1 regardless of m_nu (exponent 0); nu > 2 with m_nu = 0 gives
/// lhs = 0. The boundary margin = 0 is Inconclusive.
inline Verdict evaluate_criterion(Dimension dim, SourceStrength Z, double m0,
                                  double m_nu) {
  if (!(m0 > 0.0)) {
    throw std::invalid_argument("evaluate_criterion: m0 must be > 0");
  }
  if (m_nu < 0.0) {
    throw std::invalid_argument("evaluate_criterion: m_nu must be >= 0");
  }
  const int nu = dim.value();
  double lhs;
  if (nu == 2) {
    lhs = 1.0;
  } else if (m_nu == 0.0) {
    lhs = 0.0;
  } else {
    lhs = std::pow(m_nu, (nu - 2.0) / nu);
  }
  const double rhs = blowup_rhs(dim, Z, m0);
  const double margin = rhs - lhs;
  return Verdict{margin > 0.0 ? Prediction::BlowUpPredicted
                              : Prediction::Inconclusive,
                 lhs, rhs, margin, nu, Z.value(), m0, m_nu};
}

/// Evaluate the criterion directly on a profile, taking M_0 and M_nu by
/// exact quadrature.
inline Verdict evaluate_criterion(const RadialDensity& rho, SourceStrength Z) {
  const double m0 = moment(rho, 0.0);
  const double m_nu = moment(rho, static_cast<double>(rho.dim().value()));
  return evaluate_criterion(rho.dim(), Z, m0, m_nu);
}

/// Explicit second-moment bound implied by the criterion for nu > 2:
/// any initial datum satisfying the criterion has
///   M_2 < M_0^{(nu-2)/nu} (blowup_rhs)^{2/(nu-2)}.
/// Vacuous (rejected) when blowup_rhs <= 0.
inline double implied_m2_bound(Dimension dim, SourceStrength Z, double m0) {
  const int nu = dim.value();
  if (nu == 2) {
    throw std::invalid_argument(
        "implied_m2_bound: empty statement in dimension two");
  }
  const double rhs = blowup_rhs(dim, Z, m0);
  if (!(rhs > 0.0)) {
    throw std::invalid_argument(
        "implied_m2_bound: criterion rhs is nonpositive, bound is vacuous");
  }
  return std::pow(m0, (nu - 2.0) / nu) * std::pow(rhs, 2.0 / (nu - 2.0));
}

}  // namespace pks
