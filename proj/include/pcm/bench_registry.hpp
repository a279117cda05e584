#pragma once

// Built-in benchmark problems with analytic or independently derived
// reference data.

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pcm/cycle_finder.hpp"
#include "pcm/dde_engine.hpp"

namespace pcm {

/// Per-problem defaults; zero means "resolve automatically".
struct RecommendedSettings {
  int m = 64;
  double dt = 0.0;
  double rho_tol = 1e-2;
  double delta = 0.05;
  double eta = 0.0;
  double window = 0.0;
  double eps_trunc = 1e-10;
  double tol_fp = 1e-11;
  double r_chart = 0.02;
};

struct BenchmarkProblem {
  std::string name;
  std::string description;
  RHSSpec rhs;
  double period = 0.0;  ///< analytic period, or the rough value for numerical cycles
  std::function<Eigen::VectorXd(double)> gamma;   ///< analytic cycle, if known
  std::function<Eigen::VectorXd(double)> dgamma;
  /// Constant initial value and transient length used to seed find_cycle.
  double transient_start = 0.1;
  double transient_time = 0.0;
  RecommendedSettings settings;

  bool has_analytic_cycle() const { return static_cast<bool>(gamma); }
  /// Analytic cycle sampled on the integrator grid.
  CycleSolution analytic(int m, double dt) const;
};

struct ReferenceMultiplier {
  std::complex<double> value;
  std::string provenance;
};

struct ReferenceValues {
  std::vector<ReferenceMultiplier> multipliers;  ///< leading multipliers, descending modulus
  std::string remainder;                         ///< statement about the rest of the spectrum
};

/// Throws LookupError listing the available names.
const BenchmarkProblem& get_problem(const std::string& name);
ReferenceValues reference_values(const std::string& name);
/// (name, one-line description) in registry order.
std::vector<std::pair<std::string, std::string>> list_problems();

/// Analytic cycle, or one found by Newton shooting from a transient guess.
CycleSolution obtain_cycle(const BenchmarkProblem& p, int m, double dt, double tol = 1e-10,
                           int max_newton = 20);

/// Roots of λ = −c·e^{−λ} on branch k (Newton on the Lambert equation w·e^w = −c).
std::complex<double> characteristic_root(double c, int branch);

}  // namespace pcm
