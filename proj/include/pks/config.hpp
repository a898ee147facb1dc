/// \file config.hpp
/// Flat sectioned key = value run configuration.
///
/// Grammar (line oriented):
///   - '#' starts a full-line comment, blank lines ignored
///   - '[section]' switches the active section
///   - 'key = value' assigns; keys are looked up as section.key
/// Unknown keys are rejected by name. serialize() emits every field with
/// %.17g for doubles, so parse(serialize(c)) == c bit for bit.

#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pks {

struct RunConfig {
  // [run]
  std::string kind = "simulate";
  std::string out_dir = "out";
  int jobs = 1;

  // [model]
  int nu = 2;
  double Z = 0.0;

  // [profile]
  std::string family = "gaussian";  ///< gaussian | uniform_ball | ring
  double mass = 10.0;
  double sigma = 1.0;    ///< gaussian
  double radius = 1.0;   ///< uniform_ball
  double center = 1.0;   ///< ring
  double width = 0.1;    ///< ring

  // [grid]
  double R = 8.0;
  int n_cells = 2048;
  double stretch = 1.0;

  // [time]
  double t_end = 6.0;
  double cfl = 0.45;
  double dt_min = 1e-12;
  double snapshot_every = 0.1;

  // [detect]
  double rho_cap = 0.0;         ///< absolute cap; 0 = derive from factor
  double rho_cap_factor = 1e6;  ///< cap = factor * max(rho0) when rho_cap = 0

  // [sweep]
  double mass_min = 5.0;
  double mass_max = 50.0;
  int mass_steps = 5;
  bool bisection = false;
  int bisect_iters = 0;

  // [kernel]
  std::string nu_list = "2,3,4,5,6";
  int n_tau = 512;
  int n_u = 512;
  double bound_scale = 1.0;   ///< test hook: scales the asserted bound
  double report_tol = 1e-10;

  // [moment]
  int theta_nodes = 64;
  int quad_max_cells = 256;
  double rel_tol_fd = 0.05;
  double rel_tol_chain = 0.10;
  double abs_tol = 1e-8;
  int near_window = 5;
};

namespace detail {

using ConfigField = std::variant<int RunConfig::*, double RunConfig::*,
                                 bool RunConfig::*, std::string RunConfig::*>;

struct ConfigFieldDef {
  const char* section;
  const char* key;
  ConfigField field;
};

inline const std::vector<ConfigFieldDef>& config_fields() {
  static const std::vector<ConfigFieldDef> defs = {
      {"run", "kind", &RunConfig::kind},
      {"run", "out_dir", &RunConfig::out_dir},
      {"run", "jobs", &RunConfig::jobs},
      {"model", "nu", &RunConfig::nu},
      {"model", "Z", &RunConfig::Z},
      {"profile", "family", &RunConfig::family},
      {"profile", "mass", &RunConfig::mass},
      {"profile", "sigma", &RunConfig::sigma},
      {"profile", "radius", &RunConfig::radius},
      {"profile", "center", &RunConfig::center},
      {"profile", "width", &RunConfig::width},
      {"grid", "R", &RunConfig::R},
      {"grid", "n_cells", &RunConfig::n_cells},
      {"grid", "stretch", &RunConfig::stretch},
      {"time", "t_end", &RunConfig::t_end},
      {"time", "cfl", &RunConfig::cfl},
      {"time", "dt_min", &RunConfig::dt_min},
      {"time", "snapshot_every", &RunConfig::snapshot_every},
      {"detect", "rho_cap", &RunConfig::rho_cap},
      {"detect", "rho_cap_factor", &RunConfig::rho_cap_factor},
      {"sweep", "mass_min", &RunConfig::mass_min},
      {"sweep", "mass_max", &RunConfig::mass_max},
      {"sweep", "mass_steps", &RunConfig::mass_steps},
      {"sweep", "bisection", &RunConfig::bisection},
      {"sweep", "bisect_iters", &RunConfig::bisect_iters},
      {"kernel", "nu_list", &RunConfig::nu_list},
      {"kernel", "n_tau", &RunConfig::n_tau},
      {"kernel", "n_u", &RunConfig::n_u},
      {"kernel", "bound_scale", &RunConfig::bound_scale},
      {"kernel", "report_tol", &RunConfig::report_tol},
      {"moment", "theta_nodes", &RunConfig::theta_nodes},
      {"moment", "quad_max_cells", &RunConfig::quad_max_cells},
      {"moment", "rel_tol_fd", &RunConfig::rel_tol_fd},
      {"moment", "rel_tol_chain", &RunConfig::rel_tol_chain},
      {"moment", "abs_tol", &RunConfig::abs_tol},
      {"moment", "near_window", &RunConfig::near_window}};
  return defs;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline void assign_config_value(RunConfig& cfg, const ConfigFieldDef& def,
                                const std::string& raw) {
  const std::string text = trim(raw);
  const std::string where = std::string(def.section) + "." + def.key;
  if (const auto* p = std::get_if<int RunConfig::*>(&def.field)) {
    char* end = nullptr;
    const long v = std::strtol(text.c_str(), &end, 10);
    if (text.empty() || end != text.c_str() + text.size()) {
      throw std::invalid_argument("config: " + where + ": not an integer: '" +
                                  text + "'");
    }
    cfg.**p = static_cast<int>(v);
  } else if (const auto* q = std::get_if<double RunConfig::*>(&def.field)) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size()) {
      throw std::invalid_argument("config: " + where + ": not a number: '" +
                                  text + "'");
    }
    cfg.**q = v;
  } else if (const auto* b = std::get_if<bool RunConfig::*>(&def.field)) {
    if (text == "true" || text == "1") {
      cfg.**b = true;
    } else if (text == "false" || text == "0") {
      cfg.**b = false;
    } else {
      throw std::invalid_argument("config: " + where +
                                  ": expected true/false: '" + text + "'");
    }
  } else {
    cfg.*std::get<std::string RunConfig::*>(def.field) = text;
  }
}

inline std::string format_config_value(const RunConfig& cfg,
                                       const ConfigFieldDef& def) {
  if (const auto* p = std::get_if<int RunConfig::*>(&def.field)) {
    return std::to_string(cfg.**p);
  }
  if (const auto* q = std::get_if<double RunConfig::*>(&def.field)) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", cfg.**q);
    return buf;
  }
  if (const auto* b = std::get_if<bool RunConfig::*>(&def.field)) {
    return cfg.**b ? "true" : "false";
  }
  return cfg.*std::get<std::string RunConfig::*>(def.field);
}

inline const ConfigFieldDef& find_config_field(const std::string& section,
                                               const std::string& key) {
  for (const auto& def : config_fields()) {
    if (section == def.section && key == def.key) return def;
  }
  throw std::invalid_argument("config: unknown key: " + section + "." + key);
}

}  // namespace detail

/// Applies one 'section.key=value' override.
inline void apply_override(RunConfig& cfg, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("config: override must be section.key=value: '" +
                                spec + "'");
  }
  const std::string path = detail::trim(spec.substr(0, eq));
  const auto dot = path.find('.');
  if (dot == std::string::npos) {
    throw std::invalid_argument("config: override key must be section.key: '" +
                                path + "'");
  }
  const auto& def =
      detail::find_config_field(path.substr(0, dot), path.substr(dot + 1));
  detail::assign_config_value(cfg, def, spec.substr(eq + 1));
}

/// Parses config text on top of the defaults in `base`.
inline RunConfig parse_config(const std::string& text,
                              const RunConfig& base = {}) {
  RunConfig cfg = base;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                    ": malformed section header: '" + t + "'");
      }
      section = detail::trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  ": expected key = value: '" + t + "'");
    }
    const std::string key = detail::trim(t.substr(0, eq));
    if (section.empty()) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  ": key '" + key + "' before any [section]");
    }
    const auto& def = detail::find_config_field(section, key);
    detail::assign_config_value(cfg, def, t.substr(eq + 1));
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path,
                             const RunConfig& base = {}) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("config: cannot open '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), base);
}

/// Canonical full serialization; includes every field, defaults resolved.
inline std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& def : detail::config_fields()) {
    if (section != def.section) {
      if (!out.empty()) out += "\n";
      section = def.section;
      out += "[" + section + "]\n";
    }
    out += std::string(def.key) + " = " +
           detail::format_config_value(cfg, def) + "\n";
  }
  return out;
}

/// Sanity checks shared by every experiment kind; kind-specific numeric
/// ranges are enforced where the values are consumed.
inline void validate_config(const RunConfig& cfg) {
  static const std::vector<std::string> kinds = {
      "criterion", "simulate", "sweep", "verify-kernel", "verify-moment"};
  static const std::vector<std::string> families = {"gaussian", "uniform_ball",
                                                    "ring"};
  auto in = [](const std::vector<std::string>& set, const std::string& v) {
    for (const auto& s : set) {
      if (s == v) return true;
    }
    return false;
  };
  if (!in(kinds, cfg.kind)) {
    throw std::invalid_argument("config: run.kind: unknown kind '" + cfg.kind +
                                "'");
  }
  if (!in(families, cfg.family)) {
    throw std::invalid_argument("config: profile.family: unknown family '" +
                                cfg.family + "'");
  }
  if (cfg.jobs < 1) throw std::invalid_argument("config: run.jobs must be >= 1");
  if (cfg.nu < 2) throw std::invalid_argument("config: model.nu must be >= 2");
  if (!(cfg.mass > 0.0)) {
    throw std::invalid_argument("config: profile.mass must be > 0");
  }
  if (!(cfg.rho_cap >= 0.0)) {
    throw std::invalid_argument("config: detect.rho_cap must be >= 0");
  }
  if (cfg.rho_cap == 0.0 && !(cfg.rho_cap_factor > 1.0)) {
    throw std::invalid_argument("config: detect.rho_cap_factor must be > 1");
  }
}

}  // namespace pks
