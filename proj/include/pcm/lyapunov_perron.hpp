#pragma once

// Periodic center manifold charts by a truncated-window Lyapunov-Perron
// fixed point: cutoff-modified nonlinearity, the pseudo-inverse K realized as
// a boundary-value correction, and chart diagnostics.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "pcm/cycle_finder.hpp"
#include "pcm/dde_engine.hpp"
#include "pcm/floquet_spectral.hpp"
#include "pcm/mesh_state.hpp"

namespace pcm {

/// 1 on [0,1], 0 on [2,∞), 1 − σ(x−1) in between with the C² quintic
/// σ(y) = 6y⁵ − 15y⁴ + 10y³.
double cutoff_value(double x);

/// Zero entries mean "derive from the spectrum".
struct LPConfig {
  double eta = 0.0;        ///< weight rate; default min{−a,b}/2
  double delta = 0.05;     ///< cutoff radius
  double window = 0.0;     ///< half-width W; default from eps_trunc, rounded up to whole periods
  double dt = 0.0;         ///< step; fitted to the period
  double tol_fp = 1e-11;
  int max_iter = 200;
  double eps_trunc = 1e-10;
  double N = 0.0;          ///< projector bound in the cutoff; default from the split at s
  double rho_tol = 1e-2;
  double margin = 0.5;     ///< trichotomy margin
  double r_chart = 0.02;
  int lattice = 5;         ///< lattice points per chart coordinate
};

/// Configuration after defaults and admissibility checks.
struct LPParameters {
  double eta = 0.0, delta = 0.0, window = 0.0, dt = 0.0, tol_fp = 0.0, N = 1.0;
  double a = -1.0, b = 1.0;
  int max_iter = 0;
};

/// Fills defaults and validates: 0 < η < min{−a,b}, W ≥ ln(1/ε)/min{−a,b},
/// δ > 0. Throws ConfigError.
LPParameters resolve_lp_config(const LPConfig& cfg, const TrichotomyRates& rates, double T);

/// Linearized problem about a cycle plus its discretization.
struct CenterProblem {
  LinearSpec L;
  Remainder G;  ///< empty means G ≡ 0
  int m = 64;
};

/// G(t,u)·ξ(‖P₀u‖/(Nδ))·ξ(‖(P₋+P₊)u‖/(Nδ)) with the split at the base time.
/// Delayed values are read from u at θ = −τ_k.
Eigen::VectorXd modify_nonlinearity(const Remainder& G, const std::vector<double>& delays,
                                    const SpectralSplit& split, double N, double delta, double t,
                                    const HistorySegment& u);

struct FixedPointResult {
  Eigen::VectorXd xi;           ///< chart coordinates
  Eigen::VectorXd phi;          ///< Φ₀ξ on MeshCoord
  Eigen::VectorXd value;        ///< C(s,φ) = u*(s) on MeshCoord
  DenseSolution correction;     ///< v = u* − U₀(·,s)φ on the window
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;
  double contraction_ratio = 0.0;  ///< max d_k/d_{k−1}; 0 when too few iterates
};

/// Everything needed for fixed-point solves at one base time s.
class PerronSolver {
 public:
  PerronSolver(const CenterProblem& problem, double s, const LPConfig& cfg);

  double base() const { return s_; }
  double period() const { return L_.period; }
  int dim() const { return L_.n; }
  int mesh_intervals() const { return m_; }
  double horizon() const { return L_.h; }
  int d0() const { return split_.d0(); }
  int dplus() const { return split_.dplus(); }
  const LPParameters& params() const { return par_; }
  /// Overrides N, e.g. with a bound taken over several base times.
  void set_projector_bound(double N);
  /// max(1, ‖P₀(s)‖_∞, ‖P₋(s)+P₊(s)‖_∞).
  double local_projector_bound() const;
  const SpectralSplit& split() const { return split_; }
  const FloquetSpectrum& spectrum() const { return spectrum_; }
  const TrichotomyRates& rates() const { return rates_; }

  /// Chart basis: Φ₀ with columns scaled to unit sup norm.
  const Eigen::MatrixXd& basis() const { return basis_; }
  /// Chart coordinates of P₀(s)ψ.
  Eigen::VectorXd coordinates(const Eigen::VectorXd& psi) const;

  int grid_size() const { return static_cast<int>(times_.size()); }
  double grid_time(int j) const { return times_[j]; }
  int base_index() const { return base_index_; }

  /// K applied to forcing samples f_j at the grid times (n-vectors,
  /// interpolated in time by 4-point Lagrange). P₀(s)v(s) = 0 and, when
  /// d₊ > 0, P₊(s+W)v(s+W) = 0.
  DenseSolution pseudo_inverse_K(const std::vector<Eigen::VectorXd>& forcing) const;

  /// U₀(t_j,s)φ on MeshCoord for φ = basis()·xi.
  Eigen::VectorXd center_flow(const Eigen::VectorXd& xi, int j) const;

  /// u ← U₀(·,s)φ + K(R̃_δ(u)) from u⁰ = U₀(·,s)φ.
  FixedPointResult solve(const Eigen::VectorXd& xi) const;

  /// u*(t_j) on MeshCoord.
  Eigen::VectorXd trajectory(const FixedPointResult& r, int j) const;

  /// Weighted sup norm of a window trajectory sampled on the grid.
  double weighted_norm(const DenseSolution& v) const;

 private:
  std::vector<Eigen::VectorXd> meshes(const DenseSolution& v) const;
  Eigen::MatrixXd coordinates_matrix(const Eigen::MatrixXd& psi) const;
  Eigen::VectorXd modified(int j, const Eigen::VectorXd& mesh, const Eigen::MatrixXd& delayed) const;

  LinearSpec L_;
  Remainder G_;
  int m_;
  double s_;
  FloquetSpectrum spectrum_;
  SpectralSplit split_;
  TrichotomyRates rates_;
  LPParameters par_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd scale_;  ///< sup norms of the Φ₀ columns
  std::vector<double> times_;
  int base_index_ = 0;
  // Center flow of the basis on MeshCoord and its delayed values per grid time.
  std::vector<Eigen::MatrixXd> flow_;
  std::vector<std::vector<Eigen::MatrixXd>> flow_delayed_;
  // Homogeneous frames for the boundary corrections.
  DenseSolution center_frame_;
  std::vector<DenseSolution> unstable_pieces_;
  std::vector<Eigen::MatrixXd> unstable_Q_;  ///< orthonormal start frame of each piece
  std::vector<Eigen::MatrixXd> unstable_R_;
  Eigen::MatrixXd correction_matrix_;
};

struct ChartPoint {
  Eigen::VectorXd xi;
  Eigen::VectorXd phi;
  Eigen::VectorXd value;   ///< C(s,φ)
  Eigen::VectorXd lifted;  ///< γ_s + C(s,φ); empty without a cycle
  int iterations = 0;
  double residual = 0.0;
  double contraction_ratio = 0.0;
};

struct CenterChart {
  double base = 0.0;
  int n = 1, m = 64, d0 = 0;
  double h = 1.0;
  Eigen::MatrixXd basis;
  std::vector<ChartPoint> points;
  double contraction_ratio = 0.0;
  LPParameters params;
};

/// Lattice of chart coordinates: `per_axis` points on [−r,r] per axis,
/// keeping those with ‖basis·ξ‖_sup ≤ r. Deterministic order.
std::vector<Eigen::VectorXd> chart_lattice(const Eigen::MatrixXd& basis, double r, int per_axis);

/// Solves at every lattice point; errors are tagged with ξ.
CenterChart center_map(const PerronSolver& solver, const std::vector<Eigen::VectorXd>& lattice,
                       const CycleSolution* cycle = nullptr);

/// manifold.csv: `xi_0..xi_{d0-1},theta,comp,value`.
std::string chart_to_csv(const CenterChart& chart);

struct ValidationOptions {
  double amplitude = 0.02;  ///< ‖φ‖_sup for invariance
  int invariance_times = 4;
  int tangency_points = 5;
};

/// Each metric carries its own error; one failing does not stop the others.
struct ValidationReport {
  std::optional<double> tangency_slope;
  bool tangency_exact = false;
  std::optional<double> invariance_residual;
  std::optional<double> periodicity_gap;
  std::optional<double> lipschitz_max;
  std::optional<double> contraction_ratio;
  std::vector<std::pair<std::string, std::string>> errors;  ///< metric, message
  std::vector<double> tangency_eps, tangency_residuals;
};

ValidationReport validate_chart(const CenterProblem& problem, const RHSSpec& rhs,
                                const CycleSolution& cycle, double s, const LPConfig& cfg,
                                const ValidationOptions& opts = {});

/// Flat `key = value` block.
std::string validation_to_text(const ValidationReport& r);

}  // namespace pcm
