/// \file solver.hpp
/// Explicit finite-volume time integrator for the radially symmetric
/// aggregation-diffusion system with a point source at the origin.
///
/// The Poisson coupling is never solved as an elliptic problem: for radial
/// data the drift at radius r depends only on the cumulative mass strictly
/// inside r,
///     v(r) = (Z - M(r)) / (|S^{nu-1}| r^{nu-1}),
/// so the point source enters only as the constant Z. Fluxes telescope, which
/// conserves the total mass to rounding; diffusion is central, advection
/// first-order upwind. The step size is rate-based,
///     dt = cfl / max_i (loss rate of cell i),
/// with exact cell geometry on both the diffusive and advective side, and a
/// per-cell outflow limiter keeps the update nonnegative even where the
/// repulsive drift is singular. Blow-up is detected as a density-cap
/// exceedance and reported as "detected", never as proven.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pks/criterion.hpp"
#include "pks/density.hpp"
#include "pks/dimension.hpp"
#include "pks/quadrature.hpp"

namespace pks {

struct SolverConfig {
  Dimension dim{2};
  SourceStrength Z{0.0};
  double R = 8.0;             ///< truncation radius
  int n_cells = 2048;
  double stretch = 1.0;       ///< geometric face-spacing ratio, 1 = uniform
  double t_end = 10.0;
  double cfl = 0.45;
  double dt_min = 1e-12;
  double rho_cap = 1e30;      ///< blow-up density threshold (absolute)
  double snapshot_every = 0.1;
  bool keep_states = true;    ///< record density snapshots alongside moments

  void validate() const {
    if (!(R > 0.0)) throw std::invalid_argument("SolverConfig: R must be > 0");
    if (n_cells < 16) {
      throw std::invalid_argument("SolverConfig: n_cells must be >= 16");
    }
    if (!(stretch >= 1.0)) {
      throw std::invalid_argument("SolverConfig: stretch must be >= 1");
    }
    if (!(t_end > 0.0)) {
      throw std::invalid_argument("SolverConfig: t_end must be > 0");
    }
    if (!(cfl > 0.0) || !(cfl < 1.0)) {
      throw std::invalid_argument("SolverConfig: cfl must lie in (0, 1)");
    }
    if (!(dt_min > 0.0) || !(dt_min < t_end)) {
      throw std::invalid_argument("SolverConfig: need 0 < dt_min < t_end");
    }
    if (!(rho_cap > 0.0)) {
      throw std::invalid_argument("SolverConfig: rho_cap must be > 0");
    }
    if (!(snapshot_every > 0.0)) {
      throw std::invalid_argument("SolverConfig: snapshot_every must be > 0");
    }
  }
};

/// Cell faces on [0, R]; geometric spacing for stretch > 1.
inline std::vector<double> build_faces(double R, int n_cells, double stretch) {
  std::vector<double> faces(static_cast<std::size_t>(n_cells) + 1);
  if (stretch == 1.0) {
    for (int i = 0; i <= n_cells; ++i) {
      faces[static_cast<std::size_t>(i)] = R * static_cast<double>(i) / n_cells;
    }
  } else {
    const double w0 = R * (stretch - 1.0) / (std::pow(stretch, n_cells) - 1.0);
    double r = 0.0, w = w0;
    faces[0] = 0.0;
    for (int i = 1; i <= n_cells; ++i) {
      r += w;
      w *= stretch;
      faces[static_cast<std::size_t>(i)] = r;
    }
    faces.back() = R;
  }
  return faces;
}

// ---------------------------------------------------------------------------
// Initial profiles

struct GaussianProfile {
  double sigma;
};
struct UniformBallProfile {
  double radius;
};
struct RingProfile {
  double center;
  double width;
};
using ProfileFamily =
    std::variant<GaussianProfile, UniformBallProfile, RingProfile>;

inline std::string family_name(const ProfileFamily& f) {
  if (std::holds_alternative<GaussianProfile>(f)) return "gaussian";
  if (std::holds_alternative<UniformBallProfile>(f)) return "uniform_ball";
  return "ring";
}

namespace detail {

/// Reference integral of r^{nu-1} w(r) over [0, inf) for the truncation check.
inline double untruncated_profile_integral(const ProfileFamily& f, int nu) {
  if (const auto* g = std::get_if<GaussianProfile>(&f)) {
    // int_0^inf r^{nu-1} exp(-r^2/(2 sigma^2)) dr = 2^{nu/2-1} sigma^nu Gamma(nu/2)
    return std::pow(2.0, 0.5 * nu - 1.0) * std::pow(g->sigma, nu) *
           gamma_half_integer(nu);
  }
  if (const auto* b = std::get_if<UniformBallProfile>(&f)) {
    return std::pow(b->radius, nu) / nu;
  }
  const auto& ring = std::get<RingProfile>(f);
  const double lo = std::max(0.0, ring.center - 14.0 * ring.width);
  const double hi = ring.center + 14.0 * ring.width;
  const GaussLegendre gl(32);
  const int panels = 56;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + (hi - lo) * p / panels;
    const double b = lo + (hi - lo) * (p + 1) / panels;
    total += gl.integrate(
        [&](double r) {
          const double z = (r - ring.center) / ring.width;
          return ipow(r, nu - 1) * std::exp(-0.5 * z * z);
        },
        a, b);
  }
  return total;
}

/// Integral of r^{nu-1} w(r) over one cell.
inline double cell_profile_integral(const ProfileFamily& f, int nu, double a,
                                    double b, const GaussLegendre& gl) {
  if (const auto* g = std::get_if<GaussianProfile>(&f)) {
    const double s2 = 2.0 * g->sigma * g->sigma;
    return gl.integrate(
        [&](double r) { return ipow(r, nu - 1) * std::exp(-r * r / s2); }, a,
        b);
  }
  if (const auto* ball = std::get_if<UniformBallProfile>(&f)) {
    const double hi = std::min(b, ball->radius);
    if (hi <= a) return 0.0;
    return (ipow(hi, nu) - ipow(a, nu)) / nu;
  }
  const auto& ring = std::get<RingProfile>(f);
  return gl.integrate(
      [&](double r) {
        const double z = (r - ring.center) / ring.width;
        return ipow(r, nu - 1) * std::exp(-0.5 * z * z);
      },
      a, b);
}

}  // namespace detail

/// Builds a cell-averaged profile on the config grid and rescales it so that
/// moment(., 0) equals `mass` exactly (post-discretization rescale). Rejects
/// families whose untruncated tail beyond R carries more than 1% of the mass.
inline RadialDensity init_profile(const ProfileFamily& family, double mass,
                                  const SolverConfig& config) {
  config.validate();
  if (!(mass > 0.0)) throw std::invalid_argument("init_profile: mass must be > 0");
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianProfile>) {
          if (!(p.sigma > 0.0)) {
            throw std::invalid_argument("init_profile: sigma must be > 0");
          }
        } else if constexpr (std::is_same_v<T, UniformBallProfile>) {
          if (!(p.radius > 0.0)) {
            throw std::invalid_argument("init_profile: radius must be > 0");
          }
        } else {
          if (!(p.center > 0.0) || !(p.width > 0.0)) {
            throw std::invalid_argument(
                "init_profile: ring center and width must be > 0");
          }
        }
      },
      family);

  const int nu = config.dim.value();
  const auto faces = build_faces(config.R, config.n_cells, config.stretch);
  const GaussLegendre gl(16);

  std::vector<double> cell_mass(static_cast<std::size_t>(config.n_cells));
  for (int i = 0; i < config.n_cells; ++i) {
    cell_mass[static_cast<std::size_t>(i)] = detail::cell_profile_integral(
        family, nu, faces[static_cast<std::size_t>(i)],
        faces[static_cast<std::size_t>(i) + 1], gl);
  }
  const double inside = pairwise_sum(cell_mass);
  const double reference = detail::untruncated_profile_integral(family, nu);
  const double outside_fraction = 1.0 - inside / reference;
  if (outside_fraction > 0.01) {
    throw std::invalid_argument(
        "init_profile: " + std::to_string(100.0 * outside_fraction) +
        "% of the profile mass lies beyond R = " + std::to_string(config.R) +
        "; enlarge the domain");
  }

  std::vector<double> values(static_cast<std::size_t>(config.n_cells));
  for (int i = 0; i < config.n_cells; ++i) {
    const double geom = cell_power_integral(
        faces[static_cast<std::size_t>(i)], faces[static_cast<std::size_t>(i) + 1],
        nu);
    values[static_cast<std::size_t>(i)] =
        std::max(0.0, cell_mass[static_cast<std::size_t>(i)] / geom);
  }
  RadialDensity raw(config.dim, faces, std::move(values));
  const double m = moment(raw, 0.0);
  const double scale = mass / m;
  std::vector<double> scaled(raw.values().begin(), raw.values().end());
  for (double& v : scaled) v *= scale;
  return RadialDensity(config.dim, std::vector<double>(faces), std::move(scaled));
}

// ---------------------------------------------------------------------------
// Cumulative mass and drift

/// Cumulative mass M(r_i) on the faces: the Newton-theorem reduction of the
/// Poisson coupling for radial data.
struct MassProfile {
  Dimension dim{2};
  std::vector<double> faces;
  std::vector<double> cumulative;  ///< M(r_i), M(0) = 0, nondecreasing
};

inline MassProfile cumulative_mass(const RadialDensity& rho) {
  const int nu = rho.dim().value();
  const double area = sphere_area(rho.dim());
  MassProfile mp;
  mp.dim = rho.dim();
  mp.faces.assign(rho.faces().begin(), rho.faces().end());
  mp.cumulative.resize(mp.faces.size());
  mp.cumulative[0] = 0.0;
  for (int i = 0; i < rho.cells(); ++i) {
    const double cm =
        area * rho.value(i) *
        cell_power_integral(rho.face(i), rho.face(i + 1), nu);
    mp.cumulative[static_cast<std::size_t>(i) + 1] =
        mp.cumulative[static_cast<std::size_t>(i)] + cm;
  }
  return mp;
}

/// Drift velocity at an interior face: v(r_i) = (Z - M(r_i)) / (|S| r_i^{nu-1}).
/// Negative values point inward (aggregating). The r = 0 face carries zero
/// flux by area and has no defined velocity.
inline double drift_velocity(const MassProfile& mp, SourceStrength Z,
                             int at_face) {
  if (at_face < 1 || at_face >= static_cast<int>(mp.faces.size())) {
    throw std::invalid_argument("drift_velocity: face index out of range (>= 1)");
  }
  const double r = mp.faces[static_cast<std::size_t>(at_face)];
  const double area = sphere_area(mp.dim) * ipow(r, mp.dim.value() - 1);
  return (Z.value() - mp.cumulative[static_cast<std::size_t>(at_face)]) / area;
}

// ---------------------------------------------------------------------------
// Time integration

enum class RunStatus { CompletedToTend, BlowUpDetected, StepCollapse };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::CompletedToTend: return "completed";
    case RunStatus::BlowUpDetected: return "blow-up-detected";
    case RunStatus::StepCollapse: return "step-collapse";
  }
  return "?";
}

/// One trajectory snapshot: the tracked moments plus solver diagnostics.
struct MomentRecord {
  double t = 0.0;
  double m0 = 0.0;
  double m2 = 0.0;
  double m_numinus2 = 0.0;
  double m_nu = 0.0;
  double max_density = 0.0;
  double dt = 0.0;                 ///< last step size before this snapshot
  double core_mass_fraction = 0.0; ///< mass share of the innermost 4 cells
  double wall_density = 0.0;       ///< outermost cell value (wall monitoring)
};

struct SimulationOutcome {
  RunStatus status = RunStatus::CompletedToTend;
  double detected_time = std::numeric_limits<double>::quiet_NaN();
  std::vector<MomentRecord> trajectory;
  std::vector<std::pair<double, RadialDensity>> states;  ///< if keep_states
  std::optional<RadialDensity> final_state;
  long total_steps = 0;
  double max_clip_per_step = 0.0;  ///< largest mass clipped negative in a step

  const MomentRecord& back() const { return trajectory.back(); }
};

struct StepCollapseError : std::runtime_error {
  explicit StepCollapseError(double dt)
      : std::runtime_error("step: CFL time step " + std::to_string(dt) +
                           " fell below dt_min") {}
};

namespace detail {

/// Geometry tables and workspaces for the explicit update. All state lives in
/// the caller's density vector; the stepper only caches per-grid constants.
class RadialStepper {
 public:
  RadialStepper(Dimension dim, SourceStrength Z, std::span<const double> faces,
                const SolverConfig& cfg)
      : nu_(dim.value()),
        z_(Z.value()),
        cfl_(cfg.cfl),
        dt_min_(cfg.dt_min),
        n_(static_cast<int>(faces.size()) - 1) {
    const double area = unit_sphere_area(nu_);
    area_.resize(faces.size());
    inv_area_.assign(faces.size(), 0.0);
    inv_vol_.resize(static_cast<std::size_t>(n_));
    vol_.resize(static_cast<std::size_t>(n_));
    inv_gap_.assign(faces.size(), 0.0);
    cum_.resize(faces.size());
    flux_.assign(faces.size(), 0.0);
    vel_.assign(faces.size(), 0.0);
    for (int i = 0; i <= n_; ++i) {
      area_[static_cast<std::size_t>(i)] = area * ipow(faces[static_cast<std::size_t>(i)], nu_ - 1);
      if (i >= 1) {
        inv_area_[static_cast<std::size_t>(i)] = 1.0 / area_[static_cast<std::size_t>(i)];
      }
    }
    for (int i = 0; i < n_; ++i) {
      const double a = faces[static_cast<std::size_t>(i)];
      const double b = faces[static_cast<std::size_t>(i) + 1];
      vol_[static_cast<std::size_t>(i)] = area * (ipow(b, nu_) - ipow(a, nu_)) / nu_;
      inv_vol_[static_cast<std::size_t>(i)] = 1.0 / vol_[static_cast<std::size_t>(i)];
      if (i >= 1) {
        const double gap = 0.5 * (b + a) -
                           0.5 * (a + faces[static_cast<std::size_t>(i) - 1]);
        inv_gap_[static_cast<std::size_t>(i)] = 1.0 / gap;
      }
    }
    // Exact per-cell diffusive loss rate; faces 0 and n carry no flux, their
    // inv_gap entries are zero. dt <= cfl / max(rate) keeps the explicit
    // update's diagonal at least (1 - cfl) before advection is added.
    diff_rate_.resize(static_cast<std::size_t>(n_));
    out_rate_.assign(static_cast<std::size_t>(n_), 0.0);
    lambda_.assign(static_cast<std::size_t>(n_), 1.0);
    double max_rate = 0.0;
    for (int i = 0; i < n_; ++i) {
      const double rate = (area_[static_cast<std::size_t>(i) + 1] *
                               inv_gap_[static_cast<std::size_t>(i) + 1] +
                           area_[static_cast<std::size_t>(i)] *
                               inv_gap_[static_cast<std::size_t>(i)]) *
                          inv_vol_[static_cast<std::size_t>(i)];
      diff_rate_[static_cast<std::size_t>(i)] = rate;
      max_rate = std::max(max_rate, rate);
    }
    dt_diff_ = cfl_ / max_rate;
  }

  int cells() const { return n_; }
  double cell_volume(int i) const { return vol_[static_cast<std::size_t>(i)]; }

  /// CFL-limited step size for the current state; fills the velocity and
  /// per-cell advective outflow tables. The drift near a repulsive source
  /// behaves like Z / (|S| r^(nu-1)) and diverges at the origin, so the
  /// advective constraint only counts cells still holding significant mass;
  /// the outflow limiter in apply() covers the evacuated ones.
  double cfl_dt(std::span<const double> rho) {
    cum_[0] = 0.0;
    double maxrho = 0.0;
    for (int i = 0; i < n_; ++i) {
      cum_[static_cast<std::size_t>(i) + 1] =
          cum_[static_cast<std::size_t>(i)] +
          rho[static_cast<std::size_t>(i)] * vol_[static_cast<std::size_t>(i)];
      maxrho = std::max(maxrho, rho[static_cast<std::size_t>(i)]);
    }
    if (!std::isfinite(cum_[static_cast<std::size_t>(n_)])) {
      throw std::runtime_error("solver: non-finite density state");
    }
    vel_[0] = 0.0;
    vel_[static_cast<std::size_t>(n_)] = 0.0;
    for (int i = 1; i < n_; ++i) {
      vel_[static_cast<std::size_t>(i)] =
          (z_ - cum_[static_cast<std::size_t>(i)]) *
          inv_area_[static_cast<std::size_t>(i)];
    }
    const double theta = 1e-13 * maxrho;
    double sig_rate = 0.0;
    for (int i = 0; i < n_; ++i) {
      const double out =
          area_[static_cast<std::size_t>(i) + 1] *
              std::max(vel_[static_cast<std::size_t>(i) + 1], 0.0) +
          area_[static_cast<std::size_t>(i)] *
              std::max(-vel_[static_cast<std::size_t>(i)], 0.0);
      out_rate_[static_cast<std::size_t>(i)] =
          out * inv_vol_[static_cast<std::size_t>(i)];
      if (rho[static_cast<std::size_t>(i)] > theta) {
        sig_rate = std::max(sig_rate, out_rate_[static_cast<std::size_t>(i)]);
      }
    }
    double dt = dt_diff_;
    if (sig_rate > 0.0) dt = std::min(dt, cfl_ / sig_rate);
    return dt;
  }

  /// Applies one explicit update with the step size chosen by the caller
  /// (velocities from the preceding cfl_dt call). Returns the new maximum
  /// density; accumulates clipped mass into *clipped.
  ///
  /// Each cell's advective outflow is scaled so that diffusive plus
  /// advective losses never exceed its content. The scale multiplies the
  /// whole face flux seen by both neighbours, so conservation stays exact;
  /// it only deviates from 1 on cells the step-size rule excluded as
  /// near-vacuum, where the donor density is negligible anyway.
  double apply(std::span<double> rho, double dt, double* clipped) {
    for (int i = 0; i < n_; ++i) {
      const double budget =
          std::max(1.0 - dt * diff_rate_[static_cast<std::size_t>(i)], 0.0);
      const double need = dt * out_rate_[static_cast<std::size_t>(i)];
      lambda_[static_cast<std::size_t>(i)] =
          need > budget ? budget / need : 1.0;
    }
    flux_[0] = 0.0;
    flux_[static_cast<std::size_t>(n_)] = 0.0;
    for (int i = 1; i < n_; ++i) {
      const double v = vel_[static_cast<std::size_t>(i)];
      const double grad = (rho[static_cast<std::size_t>(i)] -
                           rho[static_cast<std::size_t>(i) - 1]) *
                          inv_gap_[static_cast<std::size_t>(i)];
      const double adv =
          v > 0.0 ? v * rho[static_cast<std::size_t>(i) - 1] *
                        lambda_[static_cast<std::size_t>(i) - 1]
                  : v * rho[static_cast<std::size_t>(i)] *
                        lambda_[static_cast<std::size_t>(i)];
      flux_[static_cast<std::size_t>(i)] =
          area_[static_cast<std::size_t>(i)] * (adv - grad);
    }
    double maxrho = 0.0;
    double clip = 0.0;
    for (int i = 0; i < n_; ++i) {
      double value = rho[static_cast<std::size_t>(i)] -
                     dt * (flux_[static_cast<std::size_t>(i) + 1] -
                           flux_[static_cast<std::size_t>(i)]) *
                         inv_vol_[static_cast<std::size_t>(i)];
      if (value < 0.0) {
        clip -= value * vol_[static_cast<std::size_t>(i)];
        value = 0.0;
      }
      rho[static_cast<std::size_t>(i)] = value;
      maxrho = std::max(maxrho, value);
    }
    if (clipped != nullptr) *clipped = clip;
    return maxrho;
  }

  double dt_min() const { return dt_min_; }

 private:
  int nu_;
  double z_;
  double cfl_;
  double dt_min_;
  int n_;
  double dt_diff_ = 0.0;
  std::vector<double> area_, inv_area_, vol_, inv_vol_, inv_gap_;
  std::vector<double> diff_rate_, out_rate_, lambda_;
  std::vector<double> cum_, flux_, vel_;
};

/// Snapshot moments via precomputed face-power tables (p = nu, nu+2,
/// 2nu-2, 2nu), pairwise-summed in cell order.
class MomentTable {
 public:
  MomentTable(Dimension dim, std::span<const double> faces)
      : area_(sphere_area(dim)) {
    const int nu = dim.value();
    p_ = {nu, nu + 2, 2 * nu - 2, 2 * nu};
    for (int k = 0; k < 4; ++k) {
      auto& table = pow_[static_cast<std::size_t>(k)];
      table.resize(faces.size());
      for (std::size_t i = 0; i < faces.size(); ++i) {
        table[i] = ipow(faces[i], p_[static_cast<std::size_t>(k)]);
      }
    }
    terms_.resize(faces.size() - 1);
  }

  /// m[0] = M_0, m[1] = M_2, m[2] = M_{nu-2}, m[3] = M_nu.
  void eval(std::span<const double> rho, double m[4]) {
    for (int k = 0; k < 4; ++k) {
      const auto& P = pow_[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < terms_.size(); ++i) {
        terms_[i] = rho[i] * (P[i + 1] - P[i]);
      }
      m[k] = area_ * pairwise_sum(terms_) / p_[static_cast<std::size_t>(k)];
    }
  }

 private:
  double area_;
  std::array<int, 4> p_;
  std::array<std::vector<double>, 4> pow_;
  std::vector<double> terms_;
};

}  // namespace detail

/// One explicit step on a standalone state. Returns the updated state and the
/// step size used. Throws StepCollapseError when the CFL step underflows
/// dt_min, and std::runtime_error on a non-finite state.
inline std::pair<RadialDensity, double> step(const RadialDensity& state,
                                             const SolverConfig& config) {
  config.validate();
  detail::RadialStepper stepper(state.dim(), config.Z, state.faces(), config);
  std::vector<double> rho(state.values().begin(), state.values().end());
  const double dt = stepper.cfl_dt(rho);
  if (dt < config.dt_min) throw StepCollapseError(dt);
  stepper.apply(rho, dt, nullptr);
  return {RadialDensity(state.dim(),
                        std::vector<double>(state.faces().begin(),
                                            state.faces().end()),
                        std::move(rho)),
          dt};
}

/// Integrates rho0 on its own grid until t_end, density-cap exceedance, or
/// dt underflow. Snapshots are recorded at t = 0, every snapshot_every, and
/// at termination.
inline SimulationOutcome run(const SolverConfig& config,
                             const RadialDensity& rho0) {
  config.validate();
  const auto faces_span = rho0.faces();
  const std::vector<double> faces(faces_span.begin(), faces_span.end());
  detail::RadialStepper stepper(rho0.dim(), config.Z, faces_span, config);
  detail::MomentTable moments(rho0.dim(), faces_span);
  std::vector<double> rho(rho0.values().begin(), rho0.values().end());
  const int n = stepper.cells();

  SimulationOutcome out;
  double core_volume_mass = 0.0;  // reused scratch below

  auto record = [&](double t, double dt_last, double maxrho) {
    double m[4];
    moments.eval(rho, m);
    core_volume_mass = 0.0;
    for (int i = 0; i < std::min(4, n); ++i) {
      core_volume_mass += rho[static_cast<std::size_t>(i)] * stepper.cell_volume(i);
    }
    MomentRecord rec;
    rec.t = t;
    rec.m0 = m[0];
    rec.m2 = m[1];
    rec.m_numinus2 = m[2];
    rec.m_nu = m[3];
    rec.max_density = maxrho;
    rec.dt = dt_last;
    rec.core_mass_fraction = m[0] > 0.0 ? core_volume_mass / m[0] : 0.0;
    rec.wall_density = rho[static_cast<std::size_t>(n) - 1];
    out.trajectory.push_back(rec);
    if (config.keep_states) {
      out.states.emplace_back(
          t, RadialDensity(rho0.dim(), faces, std::vector<double>(rho)));
    }
  };

  double t = 0.0;
  double maxrho = 0.0;
  for (double v : rho) maxrho = std::max(maxrho, v);
  record(0.0, 0.0, maxrho);
  double next_snap = config.snapshot_every;
  double last_recorded = 0.0;
  double dt_last = 0.0;

  if (maxrho >= config.rho_cap) {
    out.status = RunStatus::BlowUpDetected;
    out.detected_time = 0.0;
  } else {
    const double t_eps = 1e-12 * config.t_end;
    while (true) {
      if (t >= config.t_end - t_eps) {
        out.status = RunStatus::CompletedToTend;
        break;
      }
      const double target = std::min(next_snap, config.t_end);
      const double dt_cfl = stepper.cfl_dt(rho);
      if (dt_cfl < config.dt_min) {
        out.status = RunStatus::StepCollapse;
        out.detected_time = t;
        break;
      }
      const bool land = dt_cfl >= target - t;
      const double dt = land ? target - t : dt_cfl;
      double clipped = 0.0;
      maxrho = stepper.apply(rho, dt, &clipped);
      out.max_clip_per_step = std::max(out.max_clip_per_step, clipped);
      ++out.total_steps;
      t = land ? target : t + dt;
      dt_last = dt;
      if (!std::isfinite(maxrho)) {
        throw std::runtime_error("run: non-finite density state");
      }
      if (maxrho >= config.rho_cap) {
        out.status = RunStatus::BlowUpDetected;
        out.detected_time = t;
        break;
      }
      if (land && target == next_snap) {
        record(t, dt_last, maxrho);
        last_recorded = t;
        next_snap += config.snapshot_every;
      }
    }
  }

  if (t > last_recorded) {
    record(t, dt_last, maxrho);
  }
  out.final_state.emplace(rho0.dim(), faces, std::move(rho));
  return out;
}

}  // namespace pks
