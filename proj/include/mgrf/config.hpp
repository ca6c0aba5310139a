#pragma once

// Job configuration: a sectioned key=value text file, with any entry
// overridable on the command line as --section.key=value. Validation is
// front-loaded so a job either starts with everything it needs or fails
// before touching the solvers.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <set>
#include <string>
#include <vector>

#include "mgrf/csv.hpp"
#include "mgrf/error.hpp"
#include "mgrf/types.hpp"

namespace mgrf {

// Flat "section.key" -> value view of the config file plus overrides.
class KeyValues {
 public:
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback = "") const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  double number(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : parse_double(it->second, key);
  }

  long long integer(const std::string& key, long long fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : parse_int(it->second, key);
  }

  std::uint64_t unsigned64(const std::string& key, std::uint64_t fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    require(!it->second.empty() && it->second[0] != '-', errc::config,
            key + ": not an unsigned integer: '" + it->second + "'");
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(it->second, &pos);
      require(pos == it->second.size(), errc::config, key + ": not an unsigned integer");
      return v;
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      fail(errc::config, key + ": not an unsigned integer: '" + it->second + "'");
    }
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    auto it = kv_.find(key);
    if (it == kv_.end()) return out;
    std::string cur;
    for (char c : it->second + ",") {
      if (c == ',') {
        const std::string f = trim(cur);
        require(!f.empty(), errc::config, key + ": empty list entry");
        out.push_back(parse_double(f, key));
        cur.clear();
      } else {
        cur += c;
      }
    }
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

// Sections, key = value lines, full-line comments starting with '#' or ';'.
// Duplicate keys are rejected rather than silently last-wins.
inline KeyValues parse_ini(const std::string& text, const std::string& origin) {
  KeyValues out;
  std::string section;
  std::size_t lineno = 0;
  std::string line;
  for (std::size_t pos = 0; pos <= text.size(); ++pos) {
    if (pos < text.size() && text[pos] != '\n') {
      line += text[pos];
      continue;
    }
    ++lineno;
    std::string s = trim(line);
    line.clear();
    if (!s.empty() && s.back() == '\r') s.pop_back();
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    const std::string where = origin + " line " + std::to_string(lineno);
    if (s.front() == '[') {
      require(s.back() == ']' && s.size() > 2, errc::parse, where + ": malformed section header");
      section = lower(trim(s.substr(1, s.size() - 2)));
      require(!section.empty(), errc::parse, where + ": empty section name");
      continue;
    }
    const auto eq = s.find('=');
    require(eq != std::string::npos, errc::parse, where + ": expected key = value");
    require(!section.empty(), errc::parse, where + ": key outside any [section]");
    const std::string key = section + "." + lower(trim(s.substr(0, eq)));
    const std::string value = trim(s.substr(eq + 1));
    require(key.back() != '.', errc::parse, where + ": empty key");
    require(!value.empty(), errc::parse, where + ": empty value for " + key);
    require(!out.has(key), errc::parse, where + ": duplicate key " + key);
    out.set(key, value);
  }
  return out;
}

inline KeyValues read_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  require(in.good(), errc::io, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  KeyValues kv = parse_ini(ss.str(), path);
  for (const std::string& o : overrides) {
    require(o.rfind("--", 0) == 0, errc::config, "expected --section.key=value, got '" + o + "'");
    const auto eq = o.find('=');
    require(eq != std::string::npos && eq > 2, errc::config,
            "expected --section.key=value, got '" + o + "'");
    const std::string key = lower(trim(o.substr(2, eq - 2)));
    const std::string value = trim(o.substr(eq + 1));
    require(key.find('.') != std::string::npos, errc::config,
            "override key must be section.key: '" + o + "'");
    require(!value.empty(), errc::config, "empty value in override '" + o + "'");
    kv.set(key, value);
  }
  return kv;
}

struct JobConfig {
  std::string command;

  // mesh source: exactly one of OFF file, vertex/simplex CSV pair, structured grid
  std::string mesh_off;
  std::string mesh_vertices, mesh_simplices;
  int grid_dim = 0;
  std::vector<Index> grid_cells;
  std::vector<double> grid_lengths;

  // anisotropy: per-vertex CSV, or a constant ellipse (2D angle / 3D rotation)
  std::string aniso_file;
  std::vector<double> aniso_ranges;
  double aniso_angle = 0.0;
  std::vector<double> aniso_rotation;  // row-major 3x3

  std::vector<double> p_coeffs;  // explicit spectral polynomial, lowest degree first
  double tau2 = 1.0;
  int p1_degree = 1, p2_degree = 1;
  double eps = 1e-3;

  std::string observations, targets;

  std::uint64_t seed = 1;
  int threads = 0;  // 0 = all cores

  double cg_tol = 1e-8;
  int cg_maxit = 10000;
  int probes = 10;
  int cheb_degree = 256;
  double tail_tol = 1e-8;

  int restarts = 8;
  int max_iterations = 400;
  double ftol = 1e-7;
  double step = 0.25;
  int probes_phase1 = 1;

  int curve_dim = 2;
  int curve_grid = 1024;

  std::string out_field;
  std::string out_format = "csv";
  std::string out_predictions;
  std::string out_report;
  std::string out_curve;

  bool uses_mesh() const { return command != "covcurve"; }
  bool uses_observations() const {
    return command == "krige" || command == "condsim" || command == "loglik" ||
           command == "fit";
  }
};

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "mesh.off", "mesh.vertices", "mesh.simplices",
      "mesh.grid_dim", "mesh.grid_cells", "mesh.grid_lengths",
      "anisotropy.file", "anisotropy.ranges", "anisotropy.angle", "anisotropy.rotation",
      "model.p", "model.tau2", "model.p1_degree", "model.p2_degree", "model.eps",
      "data.observations", "data.targets",
      "run.seed", "run.threads",
      "solver.cg_tol", "solver.cg_maxit", "solver.probes", "solver.cheb_degree",
      "solver.tail_tol",
      "fit.restarts", "fit.max_iterations", "fit.ftol", "fit.step", "fit.probes_phase1",
      "curve.dim", "curve.grid",
      "output.field", "output.format", "output.predictions", "output.report", "output.curve",
  };
  return keys;
}

inline void require_file(const std::string& path, const std::string& key) {
  require(std::filesystem::exists(path), errc::config,
          key + ": file '" + path + "' does not exist");
}

inline int checked_int(const KeyValues& kv, const std::string& key, int fallback, int lo,
                       int hi) {
  const long long v = kv.integer(key, fallback);
  require(v >= lo && v <= hi, errc::config,
          key + " must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(v);
}

}  // namespace detail

// Builds and validates the job description. Anything wrong here is a config
// error: the caller never gets a JobConfig that cannot at least start.
inline JobConfig make_job(const std::string& command, const KeyValues& kv) {
  for (const auto& [key, value] : kv.entries())
    require(detail::known_keys().count(key) != 0, errc::config, "unknown config key '" + key + "'");

  JobConfig c;
  c.command = command;
  const bool ok_command = command == "simulate" || command == "krige" ||
                          command == "condsim" || command == "loglik" ||
                          command == "fit" || command == "covcurve";
  require(ok_command, errc::config,
          "unknown command '" + command +
              "' (expected simulate|krige|condsim|loglik|fit|covcurve)");

  c.mesh_off = kv.get("mesh.off");
  c.mesh_vertices = kv.get("mesh.vertices");
  c.mesh_simplices = kv.get("mesh.simplices");
  require(c.mesh_vertices.empty() == c.mesh_simplices.empty(), errc::config,
          "mesh.vertices and mesh.simplices must be given together");
  const bool has_grid =
      kv.has("mesh.grid_dim") || kv.has("mesh.grid_cells") || kv.has("mesh.grid_lengths");
  if (has_grid) {
    c.grid_dim = detail::checked_int(kv, "mesh.grid_dim", 0, 2, 3);
    for (double v : kv.numbers("mesh.grid_cells")) {
      require(v >= 1 && v == static_cast<Index>(v), errc::config,
              "mesh.grid_cells entries must be positive integers");
      c.grid_cells.push_back(static_cast<Index>(v));
    }
    c.grid_lengths = kv.numbers("mesh.grid_lengths");
    require(static_cast<int>(c.grid_cells.size()) == c.grid_dim &&
                static_cast<int>(c.grid_lengths.size()) == c.grid_dim,
            errc::config, "mesh.grid_cells and mesh.grid_lengths need grid_dim entries");
    for (double v : c.grid_lengths)
      require(v > 0, errc::config, "mesh.grid_lengths entries must be positive");
  }
  const int sources = (!c.mesh_off.empty() ? 1 : 0) + (!c.mesh_vertices.empty() ? 1 : 0) +
                      (has_grid ? 1 : 0);
  if (c.uses_mesh())
    require(sources == 1, errc::config,
            "exactly one mesh source required: mesh.off, mesh.vertices+mesh.simplices, "
            "or mesh.grid_*");
  else
    require(sources <= 1, errc::config, "more than one mesh source given");
  if (!c.mesh_off.empty()) detail::require_file(c.mesh_off, "mesh.off");
  if (!c.mesh_vertices.empty()) {
    detail::require_file(c.mesh_vertices, "mesh.vertices");
    detail::require_file(c.mesh_simplices, "mesh.simplices");
  }

  c.aniso_file = kv.get("anisotropy.file");
  c.aniso_ranges = kv.numbers("anisotropy.ranges");
  c.aniso_angle = kv.number("anisotropy.angle", 0.0);
  c.aniso_rotation = kv.numbers("anisotropy.rotation");
  require(c.aniso_file.empty() || c.aniso_ranges.empty(), errc::config,
          "anisotropy.file and anisotropy.ranges are mutually exclusive");
  if (!c.aniso_file.empty()) detail::require_file(c.aniso_file, "anisotropy.file");
  if (!c.aniso_ranges.empty())
    require(c.aniso_ranges.size() == 2 || c.aniso_ranges.size() == 3, errc::config,
            "anisotropy.ranges needs 2 or 3 entries");
  require(c.aniso_rotation.empty() || c.aniso_rotation.size() == 9, errc::config,
          "anisotropy.rotation needs 9 row-major entries");
  require(c.aniso_rotation.empty() || c.aniso_ranges.size() == 3, errc::config,
          "anisotropy.rotation requires 3-entry anisotropy.ranges");
  require(!kv.has("anisotropy.angle") || c.aniso_ranges.size() == 2, errc::config,
          "anisotropy.angle requires 2-entry anisotropy.ranges");

  c.p_coeffs = kv.numbers("model.p");
  c.tau2 = kv.number("model.tau2", 1.0);
  c.p1_degree = detail::checked_int(kv, "model.p1_degree", 1, 0, 16);
  c.p2_degree = detail::checked_int(kv, "model.p2_degree", 1, 0, 16);
  c.eps = kv.number("model.eps", 1e-3);
  require(c.eps > 0 && std::isfinite(c.eps), errc::config, "model.eps must be positive");
  require(c.tau2 > 0 && std::isfinite(c.tau2), errc::config, "model.tau2 must be positive");
  if (command != "fit")
    require(!c.p_coeffs.empty(), errc::config,
            "model.p (polynomial coefficients, lowest degree first) is required");

  c.observations = kv.get("data.observations");
  c.targets = kv.get("data.targets");
  if (c.uses_observations()) {
    require(!c.observations.empty(), errc::config, "data.observations is required");
    detail::require_file(c.observations, "data.observations");
  }
  if (command == "krige")
    require(!c.targets.empty(), errc::config, "data.targets is required for krige");
  if (!c.targets.empty()) detail::require_file(c.targets, "data.targets");

  c.seed = kv.unsigned64("run.seed", 1);
  c.threads = detail::checked_int(kv, "run.threads", 0, 0, 1024);

  c.cg_tol = kv.number("solver.cg_tol", 1e-8);
  require(c.cg_tol > 0 && std::isfinite(c.cg_tol), errc::config, "solver.cg_tol must be positive");
  c.cg_maxit = detail::checked_int(kv, "solver.cg_maxit", 10000, 1, 1 << 30);
  c.probes = detail::checked_int(kv, "solver.probes", 10, 1, 1 << 20);
  c.cheb_degree = detail::checked_int(kv, "solver.cheb_degree", 256, 1, 1 << 16);
  c.tail_tol = kv.number("solver.tail_tol", 1e-8);
  require(c.tail_tol > 0 && c.tail_tol < 1, errc::config, "solver.tail_tol must be in (0, 1)");

  c.restarts = detail::checked_int(kv, "fit.restarts", 8, 1, 1 << 16);
  c.max_iterations = detail::checked_int(kv, "fit.max_iterations", 400, 1, 1 << 24);
  c.ftol = kv.number("fit.ftol", 1e-7);
  require(c.ftol > 0, errc::config, "fit.ftol must be positive");
  c.step = kv.number("fit.step", 0.25);
  require(c.step > 0, errc::config, "fit.step must be positive");
  c.probes_phase1 = detail::checked_int(kv, "fit.probes_phase1", 1, 1, 1 << 20);

  c.curve_dim = detail::checked_int(kv, "curve.dim", 2, 2, 3);
  c.curve_grid = detail::checked_int(kv, "curve.grid", 1024, 64, 1 << 16);

  c.out_field = kv.get("output.field");
  c.out_format = lower(kv.get("output.format", "csv"));
  require(c.out_format == "csv" || c.out_format == "vtk", errc::config,
          "output.format must be csv or vtk");
  c.out_predictions = kv.get("output.predictions");
  c.out_report = kv.get("output.report");
  c.out_curve = kv.get("output.curve");

  if (command == "simulate" || command == "condsim")
    require(!c.out_field.empty(), errc::config, "output.field is required for " + command);
  if (command == "krige")
    require(!c.out_predictions.empty(), errc::config, "output.predictions is required for krige");
  if (command == "fit")
    require(!c.out_report.empty(), errc::config, "output.report is required for fit");
  if (command == "covcurve")
    require(!c.out_curve.empty(), errc::config, "output.curve is required for covcurve");

  return c;
}

inline JobConfig load_job(const std::string& command, const std::string& config_path,
                          const std::vector<std::string>& overrides) {
  return make_job(command, read_config(config_path, overrides));
}

}  // namespace mgrf
