/// \file diagnostics.hpp
/// Moment-identity diagnostics for simulation trajectories.
///
/// Three quantities are compared along a run:
///   lhs_fd       central finite difference of M_nu between snapshots,
///   rhs_exact    the exact moment derivative, with the interaction integral
///                reduced to a radial double integral against the angular
///                average W(r, s) = int_0^pi V(r, s, cos t) sin^{nu-2} t dt,
///   rhs_hoelder  the closed-form upper bound obtained from the Hoelder
///                interpolation of M_{nu-2} and the kernel lower bound.
/// Up to discretization error the chain lhs_fd <= rhs_exact <= rhs_hoelder
/// must hold; monitor_trajectory checks it row by row.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pks/criterion.hpp"
#include "pks/density.hpp"
#include "pks/dimension.hpp"
#include "pks/kernel.hpp"
#include "pks/quadrature.hpp"

namespace pks {

/// Closed-form bound on dM_nu/dt:
///   2 nu (nu-1) M_nu^{(nu-2)/nu} M_0^{2/nu}
///   - nu 2^{1-nu} M_0^2 / |S^{nu-1}| + nu Z M_0 / |S^{nu-1}|.
/// For nu = 2 the leading factor M_nu^0 is 1 by convention.
inline double hoelder_rhs(Dimension dim, SourceStrength Z, double m0,
                          double m_nu) {
  const int nu = dim.value();
  if (!(m0 >= 0.0) || !(m_nu >= 0.0)) {
    throw std::invalid_argument("hoelder_rhs: moments must be >= 0");
  }
  const double area = sphere_area(dim);
  const double interp = std::pow(m_nu, (nu - 2.0) / nu);
  return 2.0 * nu * (nu - 1.0) * interp * std::pow(m0, 2.0 / nu) -
         nu * std::pow(2.0, 1.0 - nu) * m0 * m0 / area +
         nu * Z.value() * m0 / area;
}

struct MomentQuadratureOptions {
  int theta_nodes = 64;      ///< angular nodes per dyadic panel group
  int max_quad_cells = 256;  ///< coarsen the profile above this cell count
  bool refine_check = true;  ///< re-evaluate at doubled nodes and compare
  double refine_tol = 1e-4;  ///< max relative disagreement tolerated
};

/// Exact moment derivative split into its three terms.
struct MomentDerivative {
  double value = 0.0;        ///< diffusion + source - interaction
  double diffusion = 0.0;    ///< 2 nu (nu-1) M_{nu-2}
  double source = 0.0;       ///< nu Z M_0 / |S^{nu-1}|
  double interaction = 0.0;  ///< (nu / 2|S^{nu-1}|) * pair integral
  double refine_rel_error = 0.0;
};

namespace detail {

/// W(r, s) off the diagonal. The integrand concentrates near theta = 0 on a
/// scale ~ |r-s|/max(r,s), so the panel decomposition is dyadic down to that
/// scale; each panel gets the same Gauss rule.
inline double angular_average_offdiag(Dimension dim, double r, double s,
                                      const GaussLegendre& gl) {
  const int nu = dim.value();
  const double tau = std::min(r, s) / std::max(r, s);
  const double delta = 1.0 - tau;
  const double pi = std::numbers::pi;
  int levels = 2;
  if (delta < pi / 4.0) {
    levels = static_cast<int>(std::ceil(std::log2(pi / delta)));
    levels = std::clamp(levels, 2, 48);
  }
  auto f = [&](double theta) {
    const double u = std::cos(theta);
    double w = kernel_V_tau(dim, tau, u);
    if (nu > 2) w *= ipow(std::sin(theta), nu - 2);
    return w;
  };
  double lo = pi / std::pow(2.0, levels);
  double total = gl.integrate(f, 0.0, lo);
  for (int k = levels; k >= 1; --k) {
    const double hi = pi / std::pow(2.0, k - 1);
    total += gl.integrate(f, lo, hi);
    lo = hi;
  }
  return total;
}

/// W(r, r): the integrand collapses to cos^{nu-2}(theta/2), so the integral
/// is twice the Wallis integral of order nu-2.
inline double angular_average_diag(Dimension dim) {
  int k = dim.value() - 2;
  double w = (k % 2 == 0) ? 0.5 * std::numbers::pi : 1.0;
  for (int m = (k % 2 == 0) ? 2 : 3; m <= k; m += 2) {
    w *= (m - 1.0) / m;
  }
  return 2.0 * w;
}

/// Pair integral I = int int V(|x|,|y|,cos) rho rho dx dy at a fixed rule.
/// For nu = 2 the kernel is identically 1 and I collapses to M_0^2, which is
/// evaluated directly (the angular factors cancel: 2 pi * 2 * pi = (2 pi)^2).
inline double pair_integral(const RadialDensity& rho, int theta_nodes) {
  const Dimension dim = rho.dim();
  const int nu = dim.value();
  const int n = rho.cells();
  const GaussLegendre gl(std::max(8, theta_nodes / 4));

  std::vector<double> mid(static_cast<std::size_t>(n));
  std::vector<double> weight(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    mid[static_cast<std::size_t>(i)] = 0.5 * (rho.face(i) + rho.face(i + 1));
    weight[static_cast<std::size_t>(i)] =
        rho.value(i) * cell_power_integral(rho.face(i), rho.face(i + 1), nu);
  }
  if (nu == 2) {
    const double radial = pairwise_sum(weight);
    const double m0 = sphere_area(dim) * radial;
    return m0 * m0;
  }

  const double w_diag = angular_average_diag(dim);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(n) * (n + 1) / 2);
  for (int i = 0; i < n; ++i) {
    const double wi = weight[static_cast<std::size_t>(i)];
    if (wi == 0.0) continue;
    for (int j = i; j < n; ++j) {
      const double wj = weight[static_cast<std::size_t>(j)];
      if (wj == 0.0) continue;
      const double W =
          (i == j) ? w_diag
                   : angular_average_offdiag(dim, mid[static_cast<std::size_t>(i)],
                                             mid[static_cast<std::size_t>(j)], gl);
      terms.push_back((i == j ? 1.0 : 2.0) * wi * wj * W);
    }
  }
  const double radial = pairwise_sum(terms);
  return sphere_area(dim) * unit_sphere_area(nu - 1) * radial;
}

}  // namespace detail

/// Evaluates dM_nu/dt for a frozen profile. The pair integral uses radial
/// midpoints per cell pair (the profile is coarsened to at most
/// max_quad_cells first) and an exact closed form on the diagonal. With
/// refine_check on, the integral is recomputed at doubled angular resolution
/// and a disagreement above refine_tol raises std::runtime_error.
inline MomentDerivative moment_derivative_exact(
    const RadialDensity& rho, SourceStrength Z,
    const MomentQuadratureOptions& opts = {}) {
  if (opts.theta_nodes < 8) {
    throw std::invalid_argument("moment_derivative_exact: theta_nodes < 8");
  }
  if (opts.max_quad_cells < 8) {
    throw std::invalid_argument("moment_derivative_exact: max_quad_cells < 8");
  }
  const Dimension dim = rho.dim();
  const int nu = dim.value();
  const double area = sphere_area(dim);

  RadialDensity quad_rho = rho;
  if (rho.cells() > opts.max_quad_cells) {
    const int factor =
        (rho.cells() + opts.max_quad_cells - 1) / opts.max_quad_cells;
    quad_rho = coarsen(rho, factor);
  }

  MomentDerivative out;
  const double m0 = moment(rho, 0.0);
  out.diffusion = 2.0 * nu * (nu - 1.0) * moment(rho, nu - 2.0);
  out.source = nu * Z.value() * m0 / area;

  double I = detail::pair_integral(quad_rho, opts.theta_nodes);
  if (opts.refine_check) {
    const double I_fine = detail::pair_integral(quad_rho, 2 * opts.theta_nodes);
    const double scale = std::max({std::abs(I), std::abs(I_fine), 1e-300});
    out.refine_rel_error = std::abs(I_fine - I) / scale;
    if (out.refine_rel_error > opts.refine_tol) {
      throw std::runtime_error(
          "moment_derivative_exact: angular quadrature failed to converge "
          "(rel error " +
          std::to_string(out.refine_rel_error) + ")");
    }
    I = I_fine;
  }
  out.interaction = 0.5 * nu * I / area;
  out.value = out.diffusion + out.source - out.interaction;
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory monitoring

struct MonitorOptions {
  double rel_tol_fd = 0.05;       ///< slack for lhs_fd <= rhs_exact
  double rel_tol_chain = 0.10;    ///< slack for rhs_exact <= rhs_hoelder
  double abs_tol = 1e-8;
  int near_window = 5;            ///< trailing rows flagged near-singular
  bool ended_in_detection = false;
  MomentQuadratureOptions quad{};
};

struct InequalityRow {
  double t = 0.0;
  double lhs_fd = 0.0;
  double rhs_exact = 0.0;
  double rhs_hoelder = 0.0;
  bool near_singular = false;
  double violation = 0.0;  ///< positive excess over the tolerated chain
};

struct InequalityReport {
  std::vector<InequalityRow> rows;
  int fd_violations = 0;       ///< lhs_fd > rhs_exact + tol, non-near rows
  int chain_violations = 0;    ///< rhs_exact > rhs_hoelder + tol, all rows
  double max_violation = 0.0;
  bool monotone_mnu = true;    ///< M_nu strictly decreasing across snapshots
  bool predicted_at_start = false;

  bool ok() const { return fd_violations == 0 && chain_violations == 0; }
};

/// Checks the derivative chain on the interior snapshots of a trajectory
/// (central differences need both neighbours). When the run ended in
/// detection, the trailing near_window interior rows are flagged
/// near-singular: the finite difference straddles the collapse there and is
/// excluded from the fd check, while the instantaneous exact-vs-bound check
/// still applies. Requires at least 3 snapshots.
inline InequalityReport monitor_trajectory(
    std::span<const std::pair<double, RadialDensity>> states, SourceStrength Z,
    const MonitorOptions& opts = {}) {
  if (states.size() < 3) {
    throw std::invalid_argument(
        "monitor_trajectory: need at least 3 snapshots");
  }
  const Dimension dim = states[0].second.dim();
  const int nu = dim.value();

  std::vector<double> m_nu(states.size());
  std::vector<double> m_0(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    m_nu[k] = moment(states[k].second, static_cast<double>(nu));
    m_0[k] = moment(states[k].second, 0.0);
  }

  InequalityReport report;
  const auto verdict = evaluate_criterion(states[0].second, Z);
  report.predicted_at_start = verdict.predicted == Prediction::BlowUpPredicted;
  for (std::size_t k = 1; k < states.size(); ++k) {
    if (!(m_nu[k] < m_nu[k - 1])) {
      report.monotone_mnu = false;
      break;
    }
  }

  const std::size_t interior = states.size() - 2;
  const std::size_t near_from =
      opts.ended_in_detection && interior > static_cast<std::size_t>(opts.near_window)
          ? interior - static_cast<std::size_t>(opts.near_window)
          : (opts.ended_in_detection ? 0 : interior);

  for (std::size_t k = 1; k + 1 < states.size(); ++k) {
    InequalityRow row;
    row.t = states[k].first;
    row.lhs_fd = (m_nu[k + 1] - m_nu[k - 1]) /
                 (states[k + 1].first - states[k - 1].first);
    row.rhs_exact = moment_derivative_exact(states[k].second, Z, opts.quad).value;
    row.rhs_hoelder = hoelder_rhs(dim, Z, m_0[k], m_nu[k]);
    row.near_singular = (k - 1) >= near_from;

    const double scale = std::max(std::abs(row.lhs_fd), std::abs(row.rhs_exact));
    const double tol_fd = opts.rel_tol_fd * scale + opts.abs_tol;
    const double tol_chain =
        opts.rel_tol_chain * std::max(std::abs(row.rhs_exact),
                                      std::abs(row.rhs_hoelder)) +
        opts.abs_tol;

    double excess = 0.0;
    if (!row.near_singular && row.lhs_fd > row.rhs_exact + tol_fd) {
      ++report.fd_violations;
      excess = std::max(excess, row.lhs_fd - row.rhs_exact - tol_fd);
    }
    if (row.rhs_exact > row.rhs_hoelder + tol_chain) {
      ++report.chain_violations;
      excess = std::max(excess, row.rhs_exact - row.rhs_hoelder - tol_chain);
    }
    row.violation = excess;
    report.max_violation = std::max(report.max_violation, excess);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace pks
