/// \file lab.hpp
/// Experiment drivers behind the CLI subcommands. Every driver creates the
/// output directory, writes the fully resolved config next to its artifacts,
/// and returns a process exit code. Verdicts and simulation outcomes are
/// data (exit 0); verification violations and config errors are failures.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <future>
#include <ostream>
#include <string>
#include <vector>

#include "pks/config.hpp"
#include "pks/criterion.hpp"
#include "pks/csv.hpp"
#include "pks/density.hpp"
#include "pks/diagnostics.hpp"
#include "pks/kernel.hpp"
#include "pks/solver.hpp"

namespace pks {

inline ProfileFamily make_family(const RunConfig& cfg) {
  if (cfg.family == "gaussian") return GaussianProfile{cfg.sigma};
  if (cfg.family == "uniform_ball") return UniformBallProfile{cfg.radius};
  return RingProfile{cfg.center, cfg.width};
}

inline SolverConfig make_solver_config(const RunConfig& cfg) {
  SolverConfig sc;
  sc.dim = Dimension(cfg.nu);
  sc.Z = SourceStrength(cfg.Z);
  sc.R = cfg.R;
  sc.n_cells = cfg.n_cells;
  sc.stretch = cfg.stretch;
  sc.t_end = cfg.t_end;
  sc.cfl = cfg.cfl;
  sc.dt_min = cfg.dt_min;
  sc.snapshot_every = cfg.snapshot_every;
  sc.keep_states = false;
  sc.rho_cap = 1.0;  // placeholder until resolve_rho_cap
  sc.validate();
  return sc;
}

/// Density cap for detection: explicit when set, otherwise a multiple of the
/// initial maximum.
inline double resolve_rho_cap(const RunConfig& cfg, const RadialDensity& rho0) {
  if (cfg.rho_cap > 0.0) return cfg.rho_cap;
  return cfg.rho_cap_factor * max_density(rho0);
}

namespace detail {

inline std::filesystem::path prepare_out_dir(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  write_text_file(dir / "resolved.ini", serialize_config(cfg));
  return dir;
}

inline double m0_rel_drift(const SimulationOutcome& out) {
  const double m0_0 = out.trajectory.front().m0;
  double drift = 0.0;
  for (const auto& rec : out.trajectory) {
    drift = std::max(drift, std::abs(rec.m0 - m0_0));
  }
  return drift / m0_0;
}

inline void write_snapshots_csv(const std::filesystem::path& path,
                                const RunConfig& cfg,
                                const SimulationOutcome& out) {
  CsvFile csv;
  csv.meta("nu = " + std::to_string(cfg.nu));
  csv.meta("Z = " + fmt_g(cfg.Z));
  csv.meta("family = " + cfg.family + ", mass = " + fmt_g(cfg.mass));
  csv.meta("grid: R = " + fmt_g(cfg.R) +
           ", n_cells = " + std::to_string(cfg.n_cells) +
           ", stretch = " + fmt_g(cfg.stretch));
  csv.meta(std::string("status = ") + to_string(out.status) +
           ", detected_time = " + fmt_g(out.detected_time));
  csv.header({"t", "m0", "m2", "m_numinus2", "m_nu", "max_density", "dt",
              "mass_in_core", "wall_density"});
  for (const auto& r : out.trajectory) {
    csv.row({fmt_g(r.t), fmt_g(r.m0), fmt_g(r.m2), fmt_g(r.m_numinus2),
             fmt_g(r.m_nu), fmt_g(r.max_density), fmt_g(r.dt),
             fmt_g(r.core_mass_fraction), fmt_g(r.wall_density)});
  }
  csv.write(path);
}

inline std::vector<int> parse_nu_list(const std::string& text) {
  std::vector<int> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) continue;
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size() || v < 2) {
      throw std::invalid_argument("config: kernel.nu_list: bad entry '" + t +
                                  "'");
    }
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) {
    throw std::invalid_argument("config: kernel.nu_list is empty");
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline int run_criterion(const RunConfig& cfg, std::ostream& log) {
  const auto dir = detail::prepare_out_dir(cfg);
  const SolverConfig sc = make_solver_config(cfg);
  const RadialDensity rho0 = init_profile(make_family(cfg), cfg.mass, sc);
  const Verdict v = evaluate_criterion(rho0, sc.Z);

  std::string text;
  text += std::string("prediction = ") + to_string(v.predicted) + "\n";
  text += "lhs = " + fmt_g(v.lhs) + "\n";
  text += "rhs = " + fmt_g(v.rhs) + "\n";
  text += "margin = " + fmt_g(v.margin) + "\n";
  text += "nu = " + std::to_string(v.nu) + "\n";
  text += "Z = " + fmt_g(v.Z) + "\n";
  text += "m0 = " + fmt_g(v.m0) + "\n";
  text += "m_nu = " + fmt_g(v.m_nu) + "\n";
  write_text_file(dir / "verdict.txt", text);
  log << to_string(v.predicted) << ": margin = " << fmt_g(v.margin)
      << " (lhs = " << fmt_g(v.lhs) << ", rhs = " << fmt_g(v.rhs) << ")\n";
  return 0;
}

inline int run_simulate(const RunConfig& cfg, std::ostream& log) {
  const auto dir = detail::prepare_out_dir(cfg);
  SolverConfig sc = make_solver_config(cfg);
  const RadialDensity rho0 = init_profile(make_family(cfg), cfg.mass, sc);
  sc.rho_cap = resolve_rho_cap(cfg, rho0);
  const SimulationOutcome out = run(sc, rho0);

  detail::write_snapshots_csv(dir / "snapshots.csv", cfg, out);
  const double final_max = out.trajectory.back().max_density;
  const std::string summary = std::string("status=") + to_string(out.status) +
                              " detected_time=" + fmt_g(out.detected_time) +
                              " final_max_density=" + fmt_g(final_max);
  write_text_file(dir / "outcome.txt", summary + "\n");
  log << summary << " steps=" << out.total_steps
      << " m0_rel_drift=" << fmt_g(detail::m0_rel_drift(out)) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepRow {
  double mass = 0.0;
  RunStatus status = RunStatus::CompletedToTend;
  double detected_time = std::numeric_limits<double>::quiet_NaN();
  double final_max_density = 0.0;
  long steps = 0;
  double m0_rel_drift = 0.0;
  double max_clip = 0.0;  ///< worst per-step negative-value clip (0 = none)
};

namespace detail {

inline SweepRow sweep_one(const RunConfig& cfg, double mass) {
  RunConfig rc = cfg;
  rc.mass = mass;
  SolverConfig sc = make_solver_config(rc);
  const RadialDensity rho0 = init_profile(make_family(rc), mass, sc);
  sc.rho_cap = resolve_rho_cap(rc, rho0);
  const SimulationOutcome out = run(sc, rho0);
  SweepRow row;
  row.mass = mass;
  row.status = out.status;
  row.detected_time = out.detected_time;
  row.final_max_density = out.trajectory.back().max_density;
  row.steps = out.total_steps;
  row.m0_rel_drift = m0_rel_drift(out);
  row.max_clip = out.max_clip_per_step;
  return row;
}

}  // namespace detail

/// Mass sweep at fixed profile shape. Rows appear in scheduling order (the
/// ascending mass grid, then any bisection refinements); execution is
/// concurrent up to cfg.jobs.
inline int run_sweep(const RunConfig& cfg, std::ostream& log) {
  if (cfg.mass_steps < 2) {
    throw std::invalid_argument("config: sweep.mass_steps must be >= 2");
  }
  if (!(cfg.mass_min > 0.0) || !(cfg.mass_max > cfg.mass_min)) {
    throw std::invalid_argument(
        "config: sweep needs 0 < mass_min < mass_max");
  }
  const auto dir = detail::prepare_out_dir(cfg);

  std::vector<double> masses(static_cast<std::size_t>(cfg.mass_steps));
  for (int i = 0; i < cfg.mass_steps; ++i) {
    masses[static_cast<std::size_t>(i)] =
        cfg.mass_min +
        (cfg.mass_max - cfg.mass_min) * i / (cfg.mass_steps - 1);
  }

  std::vector<SweepRow> rows(masses.size());
  const int jobs = std::max(1, cfg.jobs);
  for (std::size_t base = 0; base < masses.size();
       base += static_cast<std::size_t>(jobs)) {
    std::vector<std::future<SweepRow>> batch;
    const std::size_t hi =
        std::min(masses.size(), base + static_cast<std::size_t>(jobs));
    for (std::size_t i = base; i < hi; ++i) {
      batch.push_back(std::async(std::launch::async, detail::sweep_one, cfg,
                                 masses[i]));
    }
    for (std::size_t i = base; i < hi; ++i) {
      rows[i] = batch[i - base].get();
    }
  }

  auto detected = [](const SweepRow& r) {
    return r.status == RunStatus::BlowUpDetected;
  };
  auto completed = [](const SweepRow& r) {
    return r.status == RunStatus::CompletedToTend;
  };

  // Bracket: largest completed mass below, smallest detected mass above.
  double low = std::numeric_limits<double>::quiet_NaN();
  double high = std::numeric_limits<double>::quiet_NaN();
  bool monotone = true;
  bool seen_detected = false;
  for (const auto& r : rows) {
    if (completed(r)) {
      if (std::isnan(low) || r.mass > low) low = r.mass;
      if (seen_detected) monotone = false;
    }
    if (detected(r)) {
      seen_detected = true;
      if (std::isnan(high) || r.mass < high) high = r.mass;
    }
  }

  std::vector<SweepRow> extra;
  if (cfg.bisection && !std::isnan(low) && !std::isnan(high) && monotone) {
    for (int it = 0; it < cfg.bisect_iters; ++it) {
      const double mid = 0.5 * (low + high);
      SweepRow r = detail::sweep_one(cfg, mid);
      extra.push_back(r);
      if (detected(r)) {
        high = mid;
      } else {
        low = mid;
      }
    }
  }

  CsvFile csv;
  csv.meta("nu = " + std::to_string(cfg.nu) + ", Z = " + fmt_g(cfg.Z) +
           ", family = " + cfg.family);
  csv.meta("mass grid: [" + fmt_g(cfg.mass_min) + ", " + fmt_g(cfg.mass_max) +
           "] in " + std::to_string(cfg.mass_steps) + " steps");
  csv.meta("bracket_low = " + fmt_g(low));
  csv.meta("bracket_high = " + fmt_g(high));
  csv.meta(std::string("monotone = ") + (monotone ? "true" : "false"));
  if (!monotone) {
    csv.meta("warning: non-monotone outcomes across the sweep (grid effects)");
  }
  csv.header({"mass", "status", "detected_time", "final_max_density", "steps",
              "m0_rel_drift", "max_clip"});
  auto emit = [&](const SweepRow& r) {
    csv.row({fmt_g(r.mass), to_string(r.status), fmt_g(r.detected_time),
             fmt_g(r.final_max_density), std::to_string(r.steps),
             fmt_g(r.m0_rel_drift), fmt_g(r.max_clip)});
  };
  for (const auto& r : rows) emit(r);
  for (const auto& r : extra) emit(r);
  csv.write(dir / "sweep.csv");

  log << "sweep: bracket = [" << fmt_g(low) << ", " << fmt_g(high) << "]"
      << (monotone ? "" : " (non-monotone outcomes, see sweep.csv)") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

inline int run_verify_kernel(const RunConfig& cfg, std::ostream& log) {
  const auto dir = detail::prepare_out_dir(cfg);
  bool any_violated = false;
  for (int nu : detail::parse_nu_list(cfg.nu_list)) {
    const BoundReport rep = verify_kernel_bound(
        Dimension(nu), cfg.n_tau, cfg.n_u, cfg.bound_scale, cfg.report_tol);
    CsvFile csv;
    csv.meta("nu = " + std::to_string(nu) + ", grid = " + rep.grid_spec());
    csv.meta("min_value = " + fmt_g(rep.min_value) + " at (tau = " +
             fmt_g(rep.argmin_tau) + ", u = " + fmt_g(rep.argmin_u) + ")");
    csv.meta("bound = " + fmt_g(rep.bound) +
             ", bound_scale = " + fmt_g(rep.bound_scale) +
             ", tol = " + fmt_g(rep.tol));
    csv.meta(std::string("violated = ") + (rep.violated ? "true" : "false"));
    csv.header({"tau", "min_over_u", "argmin_u"});
    for (const auto& row : rep.rows) {
      csv.row({fmt_g(row.tau), fmt_g(row.min_over_u), fmt_g(row.argmin_u)});
    }
    csv.write(dir / ("kernel_bound_nu" + std::to_string(nu) + ".csv"));
    log << "nu = " << nu << ": min = " << fmt_g(rep.min_value) << " at (tau = "
        << fmt_g(rep.argmin_tau) << ", u = " << fmt_g(rep.argmin_u)
        << "), bound = " << fmt_g(rep.bound)
        << (rep.violated ? "  VIOLATED" : "  ok") << "\n";
    any_violated = any_violated || rep.violated;
  }
  return any_violated ? 1 : 0;
}

inline int run_verify_moment(const RunConfig& cfg, std::ostream& log) {
  const auto dir = detail::prepare_out_dir(cfg);
  SolverConfig sc = make_solver_config(cfg);
  sc.keep_states = true;
  const RadialDensity rho0 = init_profile(make_family(cfg), cfg.mass, sc);
  sc.rho_cap = resolve_rho_cap(cfg, rho0);
  const SimulationOutcome out = run(sc, rho0);
  detail::write_snapshots_csv(dir / "snapshots.csv", cfg, out);

  MonitorOptions mo;
  mo.rel_tol_fd = cfg.rel_tol_fd;
  mo.rel_tol_chain = cfg.rel_tol_chain;
  mo.abs_tol = cfg.abs_tol;
  mo.near_window = cfg.near_window;
  mo.ended_in_detection = out.status == RunStatus::BlowUpDetected;
  mo.quad.theta_nodes = cfg.theta_nodes;
  mo.quad.max_quad_cells = cfg.quad_max_cells;
  const InequalityReport rep =
      monitor_trajectory(out.states, sc.Z, mo);

  CsvFile csv;
  csv.meta("nu = " + std::to_string(cfg.nu) + ", Z = " + fmt_g(cfg.Z) +
           ", family = " + cfg.family + ", mass = " + fmt_g(cfg.mass));
  csv.meta(std::string("status = ") + to_string(out.status) +
           ", detected_time = " + fmt_g(out.detected_time));
  csv.meta("tolerances: rel_fd = " + fmt_g(cfg.rel_tol_fd) +
           ", rel_chain = " + fmt_g(cfg.rel_tol_chain) +
           ", abs = " + fmt_g(cfg.abs_tol));
  csv.meta("near-singular rows are informational only");
  csv.header({"t", "dmnu_dt_fd", "rhs_exact", "rhs_hoelder", "violation"});
  for (const auto& row : rep.rows) {
    csv.row({fmt_g(row.t), fmt_g(row.lhs_fd), fmt_g(row.rhs_exact),
             fmt_g(row.rhs_hoelder), fmt_g(row.violation)});
  }
  csv.write(dir / "inequality.csv");

  log << "verify-moment: " << rep.rows.size() << " rows, "
      << rep.fd_violations << " fd violations, " << rep.chain_violations
      << " chain violations (max excess " << fmt_g(rep.max_violation) << ")\n";
  return rep.ok() ? 0 : 1;
}

/// Dispatch on cfg.kind.
inline int run_lab(const RunConfig& cfg, std::ostream& log) {
  validate_config(cfg);
  if (cfg.kind == "criterion") return run_criterion(cfg, log);
  if (cfg.kind == "simulate") return run_simulate(cfg, log);
  if (cfg.kind == "sweep") return run_sweep(cfg, log);
  if (cfg.kind == "verify-kernel") return run_verify_kernel(cfg, log);
  return run_verify_moment(cfg, log);
}

}  // namespace pks
