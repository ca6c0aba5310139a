#pragma once

#include <stdexcept>
#include <string>

namespace mgrf {

// Every failure the library can raise, grouped by how a caller should react:
//   - config/parse/io: bad user input, fix the invocation or the file
//   - solver-class codes: numerics gave up, retry with different settings
//   - the rest: the model or data is structurally invalid
enum class errc {
  config,
  parse,
  io,
  degenerate_simplex,
  index_out_of_range,
  overflow,
  outside_domain,
  missing_field,
  non_positive_mass,
  non_finite_entry,
  dimension_mismatch,
  interval_too_small,
  non_finite_target,
  non_positive_lower_bound,
  breakdown,
  solver,
  all_restarts_failed,
  rank_deficient,
  too_large,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::config: return "config";
    case errc::parse: return "parse";
    case errc::io: return "io";
    case errc::degenerate_simplex: return "degenerate_simplex";
    case errc::index_out_of_range: return "index_out_of_range";
    case errc::overflow: return "overflow";
    case errc::outside_domain: return "outside_domain";
    case errc::missing_field: return "missing_field";
    case errc::non_positive_mass: return "non_positive_mass";
    case errc::non_finite_entry: return "non_finite_entry";
    case errc::dimension_mismatch: return "dimension_mismatch";
    case errc::interval_too_small: return "interval_too_small";
    case errc::non_finite_target: return "non_finite_target";
    case errc::non_positive_lower_bound: return "non_positive_lower_bound";
    case errc::breakdown: return "breakdown";
    case errc::solver: return "solver";
    case errc::all_restarts_failed: return "all_restarts_failed";
    case errc::rank_deficient: return "rank_deficient";
    case errc::too_large: return "too_large";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

  // Process exit code for the CLI: 2 usage, 3 input files, 4 numerics, 5 model/data.
  int exit_code() const noexcept {
    switch (code_) {
      case errc::config: return 2;
      case errc::parse:
      case errc::io: return 3;
      case errc::breakdown:
      case errc::solver:
      case errc::all_restarts_failed: return 4;
      default: return 5;
    }
  }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, errc code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace mgrf
