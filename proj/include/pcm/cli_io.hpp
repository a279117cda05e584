#pragma once

// Line-based run configuration and the command pipeline
// simulate → find-cycle → floquet → manifold → validate.

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pcm {

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;  ///< 0 for --override entries
};

/// `key = value` lines, `#` comments, blank lines. Throws ConfigError with the
/// line number on syntax errors and on duplicate keys (naming both lines).
std::vector<ConfigEntry> parse_config_entries(std::string_view text);

/// `key=value`; replaces an existing entry with the same key.
void apply_override(std::vector<ConfigEntry>& entries, std::string_view assignment);

/// Fully resolved configuration. Optional fields are derived from the
/// spectrum at run time ("auto").
struct RunConfig {
  std::string problem;
  std::string output = "out";
  unsigned seed = 0;

  int m = 64;
  double dt = 0.0;
  double base_time = 0.0;

  double rho_tol = 1e-2;
  int n_t = 8;
  int n_quad = 128;
  double margin = 0.5;

  double cycle_tol = 1e-10;
  int max_newton = 20;
  std::optional<std::string> cycle_file;

  std::optional<double> t_end;
  double initial = 0.1;

  std::optional<double> eta;
  double delta = 0.05;
  std::optional<double> window;
  double eps_trunc = 1e-10;
  double tol_fp = 1e-11;
  int max_iter = 200;
  double r_chart = 0.02;
  int lattice = 5;
  std::optional<double> N;

  double amplitude = 0.02;
  int invariance_times = 4;
  int tangency_points = 5;
  double min_slope = 1.9;
  double max_invariance = 1e-3;
  std::optional<double> max_periodicity;  ///< default 10·tol_fp
  double max_contraction = 0.5;
};

/// Applies defaults (problem-specific ones when `problem` names a benchmark),
/// then checks every value. Throws ConfigError on unknown keys or
/// out-of-range values.
RunConfig resolve_config(const std::vector<ConfigEntry>& entries);

RunConfig parse_config(std::string_view text);

/// Echo in the input format; unresolved fields print as `auto`.
std::string config_to_text(const RunConfig& cfg);

/// Runs one command, writing artifacts and run_report.json under cfg.output.
/// Returns 0 on success, 2 when validation thresholds fail, 1 on errors.
/// Progress and errors go to `log`.
int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log);

/// Known command names in pipeline order.
const std::vector<std::string>& command_names();

}  // namespace pcm
