#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "pks/diagnostics.hpp"
#include "pks/solver.hpp"

namespace {

using namespace pks;
constexpr double kPi = std::numbers::pi;

RadialDensity gaussian_profile(int nu, double mass, double sigma, int cells,
                               double R) {
  SolverConfig c;
  c.dim = Dimension(nu);
  c.R = R;
  c.n_cells = cells;
  return init_profile(GaussianProfile{sigma}, mass, c);
}

TEST(HoelderRhs, TwoDimensionalClosedForm) {
  // nu = 2: 4 M0 + Z M0 / pi - M0^2 / (2 pi), independent of m_nu.
  const double m0 = 9.0;
  for (double Z : {-3.0, 0.0, 5.0}) {
    const double want = 4.0 * m0 + Z * m0 / kPi - m0 * m0 / (2.0 * kPi);
    EXPECT_NEAR(hoelder_rhs(Dimension(2), SourceStrength(Z), m0, 7.7), want,
                1e-12 * std::abs(want));
    EXPECT_DOUBLE_EQ(hoelder_rhs(Dimension(2), SourceStrength(Z), m0, 7.7),
                     hoelder_rhs(Dimension(2), SourceStrength(Z), m0, 123.4));
  }
  EXPECT_THROW(hoelder_rhs(Dimension(2), SourceStrength(0.0), -1.0, 1.0),
               std::invalid_argument);
}

TEST(HoelderRhs, MarginIdentity) {
  // hoelder_rhs = -2 nu (nu-1) M_0^{2/nu} * margin; the bound is negative
  // exactly when the criterion predicts blow-up.
  std::mt19937_64 rng(67);
  std::uniform_real_distribution<double> logs(-1.5, 1.5);
  std::uniform_real_distribution<double> zs(-5.0, 5.0);
  for (int nu = 2; nu <= 6; ++nu) {
    for (int rep = 0; rep < 300; ++rep) {
      const double m0 = 30.0 * std::exp(logs(rng));
      const double mnu = 30.0 * std::exp(logs(rng));
      const double Z = zs(rng);
      const auto v =
          evaluate_criterion(Dimension(nu), SourceStrength(Z), m0, mnu);
      const double want =
          -2.0 * nu * (nu - 1.0) * std::pow(m0, 2.0 / nu) * v.margin;
      const double got = hoelder_rhs(Dimension(nu), SourceStrength(Z), m0, mnu);
      EXPECT_NEAR(got, want, 1e-10 * std::max(1.0, std::abs(want)))
          << "nu=" << nu << " m0=" << m0 << " mnu=" << mnu << " Z=" << Z;
      if (v.predicted == Prediction::BlowUpPredicted) {
        EXPECT_LT(got, 0.0);
      }
    }
  }
}

TEST(MomentDerivative, TwoDimensionalExact) {
  // The pair integral collapses to M0^2, so the whole derivative has the
  // closed form 4 M0 + Z M0/pi - M0^2/(2 pi).
  const RadialDensity rho = gaussian_profile(2, 11.0, 1.0, 256, 8.0);
  const double m0 = moment(rho, 0.0);
  for (double Z : {-2.0, 0.0, 4.0}) {
    const auto d = moment_derivative_exact(rho, SourceStrength(Z));
    const double want = 4.0 * m0 + Z * m0 / kPi - m0 * m0 / (2.0 * kPi);
    EXPECT_NEAR(d.value, want, 1e-12 * std::abs(want));
    EXPECT_NEAR(d.interaction, m0 * m0 / (2.0 * kPi), 1e-12 * d.interaction);
    EXPECT_DOUBLE_EQ(d.refine_rel_error, 0.0);
  }
}

TEST(MomentDerivative, ThreeDimensionalPairIntegralIsMassSquared) {
  // In three dimensions the angular average of V is exactly 2 for every
  // radius pair, so the interaction integral equals M0^2 for any profile:
  // the quadrature must reproduce 12 M1 + 3 Z M0/(4 pi) - 3 M0^2/(8 pi).
  const RadialDensity rho = gaussian_profile(3, 20.0, 0.8, 300, 6.0);
  const double m0 = moment(rho, 0.0);
  const double m1 = moment(rho, 1.0);
  for (double Z : {-1.0, 2.0}) {
    const auto d = moment_derivative_exact(rho, SourceStrength(Z));
    const double want =
        12.0 * m1 + 3.0 * Z * m0 / (4.0 * kPi) - 3.0 * m0 * m0 / (8.0 * kPi);
    EXPECT_NEAR(d.interaction, 3.0 * m0 * m0 / (8.0 * kPi),
                1e-7 * d.interaction);
    EXPECT_NEAR(d.value, want, 1e-6 * std::abs(want));
    EXPECT_LT(d.refine_rel_error, 1e-7);
  }
}

TEST(MomentDerivative, ThinShellLimit) {
  // All mass near radius 1 in 3D: value -> 12 m + 3 Z m/(4 pi) - 3 m^2/(8 pi)
  // with M1 -> m. Finite width gives a small correction.
  SolverConfig c;
  c.dim = Dimension(3);
  c.R = 3.0;
  c.n_cells = 600;
  const RadialDensity shell = init_profile(RingProfile{1.0, 0.01}, 5.0, c);
  const auto d = moment_derivative_exact(shell, SourceStrength(0.0));
  const double want = 12.0 * 5.0 - 3.0 * 25.0 / (8.0 * kPi);
  EXPECT_NEAR(d.value, want, 0.01 * std::abs(want));
}

TEST(MomentDerivative, AngularRefinementConverges) {
  const RadialDensity rho = gaussian_profile(4, 8.0, 0.7, 200, 5.0);
  MomentQuadratureOptions opts;
  opts.theta_nodes = 32;
  const auto coarse = moment_derivative_exact(rho, SourceStrength(0.0), opts);
  opts.theta_nodes = 96;
  const auto fine = moment_derivative_exact(rho, SourceStrength(0.0), opts);
  EXPECT_NEAR(coarse.interaction, fine.interaction,
              1e-6 * std::abs(fine.interaction));
  EXPECT_LT(fine.refine_rel_error, 1e-6);
  // refine_check off skips the cross-check entirely
  opts.refine_check = false;
  const auto quick = moment_derivative_exact(rho, SourceStrength(0.0), opts);
  EXPECT_DOUBLE_EQ(quick.refine_rel_error, 0.0);
  opts.theta_nodes = 4;
  EXPECT_THROW(moment_derivative_exact(rho, SourceStrength(0.0), opts),
               std::invalid_argument);
}

TEST(MomentDerivative, HoelderDominatesExact) {
  // The chain: exact derivative <= Hoelder bound, for any profile. This is
  // the inequality the monitor asserts along trajectories.
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> sig(0.4, 1.2);
  std::uniform_real_distribution<double> mas(1.0, 40.0);
  std::uniform_real_distribution<double> zs(-6.0, 6.0);
  for (int nu = 2; nu <= 4; ++nu) {
    for (int rep = 0; rep < 8; ++rep) {
      const RadialDensity rho =
          gaussian_profile(nu, mas(rng), sig(rng), 160, 8.0);
      const double Z = zs(rng);
      const auto d = moment_derivative_exact(rho, SourceStrength(Z));
      const double bound = hoelder_rhs(Dimension(nu), SourceStrength(Z),
                                       moment(rho, 0.0),
                                       moment(rho, static_cast<double>(nu)));
      EXPECT_LE(d.value, bound + 1e-8 * std::max(1.0, std::abs(bound)))
          << "nu=" << nu << " Z=" << Z;
    }
  }
}

TEST(MomentDerivative, CoarseningKeepsValueClose) {
  // Radial midpoint error on the coarsened pair grid is second order; going
  // from 128 to 256 quadrature cells must not move the value materially.
  const RadialDensity rho = gaussian_profile(4, 15.0, 1.0, 512, 8.0);
  MomentQuadratureOptions opts;
  opts.max_quad_cells = 128;
  const auto coarse = moment_derivative_exact(rho, SourceStrength(0.0), opts);
  opts.max_quad_cells = 256;
  const auto fine = moment_derivative_exact(rho, SourceStrength(0.0), opts);
  EXPECT_NEAR(coarse.value, fine.value, 5e-3 * std::abs(fine.value));
}

TEST(MonitorTrajectory, CleanSubcriticalRun) {
  SolverConfig c;
  c.dim = Dimension(2);
  c.Z = SourceStrength(0.0);
  c.R = 8.0;
  c.n_cells = 256;
  c.t_end = 0.8;
  c.snapshot_every = 0.1;
  c.keep_states = true;
  const RadialDensity rho0 = init_profile(GaussianProfile{1.0}, 2.0 * kPi, c);
  const SimulationOutcome out = run(c, rho0);
  ASSERT_EQ(out.status, RunStatus::CompletedToTend);
  const InequalityReport rep = monitor_trajectory(out.states, c.Z);
  EXPECT_TRUE(rep.ok()) << rep.fd_violations << " fd, " << rep.chain_violations
                        << " chain, max " << rep.max_violation;
  EXPECT_EQ(rep.rows.size(), out.states.size() - 2);
  EXPECT_FALSE(rep.predicted_at_start);
  for (const auto& row : rep.rows) {
    EXPECT_FALSE(row.near_singular);
    EXPECT_DOUBLE_EQ(row.violation, 0.0);
    // 2D: rhs_exact equals the closed form and the FD should sit within a
    // few percent of it.
    EXPECT_NEAR(row.lhs_fd, row.rhs_exact, 0.05 * std::abs(row.rhs_exact));
  }
}

TEST(MonitorTrajectory, NearSingularRowsFlagged) {
  SolverConfig c;
  c.dim = Dimension(2);
  c.Z = SourceStrength(0.0);
  c.R = 8.0;
  c.n_cells = 256;
  c.t_end = 6.0;
  c.snapshot_every = 0.05;
  c.keep_states = true;
  const RadialDensity rho0 = init_profile(GaussianProfile{1.0}, 12.0 * kPi, c);
  c.rho_cap = 60.0 * max_density(rho0);
  const SimulationOutcome out = run(c, rho0);
  ASSERT_EQ(out.status, RunStatus::BlowUpDetected);
  MonitorOptions mo;
  mo.ended_in_detection = true;
  const InequalityReport rep = monitor_trajectory(out.states, c.Z, mo);
  ASSERT_GE(rep.rows.size(), 6u);
  int near = 0;
  for (const auto& row : rep.rows) near += row.near_singular ? 1 : 0;
  EXPECT_EQ(near, mo.near_window);
  EXPECT_TRUE(rep.rows.back().near_singular);
  EXPECT_FALSE(rep.rows.front().near_singular);
  EXPECT_TRUE(rep.predicted_at_start);
  EXPECT_TRUE(rep.monotone_mnu);
  EXPECT_EQ(rep.chain_violations, 0);
}

TEST(MonitorTrajectory, NeedsThreeSnapshots) {
  SolverConfig c;
  c.dim = Dimension(2);
  c.n_cells = 64;
  c.R = 6.0;
  const RadialDensity rho = init_profile(GaussianProfile{1.0}, 1.0, c);
  std::vector<std::pair<double, RadialDensity>> two = {{0.0, rho}, {0.1, rho}};
  EXPECT_THROW(monitor_trajectory(two, SourceStrength(0.0)),
               std::invalid_argument);
}

}  // namespace
