#pragma once

// Discretized monodromy operator, Floquet multipliers, spectral projectors
// (ordered real Schur, with a Dunford contour cross-check), fiber bases over
// a period grid, and exponential trichotomy rates.

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <vector>

#include "pcm/dde_engine.hpp"
#include "pcm/mesh_state.hpp"

namespace pcm {

/// Largest step ≤ dt that divides `length` into whole steps.
double fit_step(double length, double dt);

/// Step that divides T/N_t, so a fiber grid of N_t points lands on step boundaries.
double grid_step(double T, int N_t, double dt);

/// Discretized U(t,s) applied to MeshCoord columns. RK4 steps with delayed
/// values interpolated (cubic) from the current mesh, so the discrete maps
/// compose exactly: U(u,t)U(t,s) = U(u,s) on a shared step grid.
Eigen::MatrixXd evolve_mesh(const LinearSpec& L, const Eigen::MatrixXd& Y, double s, double t, int m,
                            double dt);

/// States after every step of evolve_mesh, starting with Y itself.
std::vector<Eigen::MatrixXd> evolve_mesh_path(const LinearSpec& L, const Eigen::MatrixXd& Y, double s,
                                              double t, int m, double dt);

/// Cubic Lagrange interpolation of MeshCoord columns at θ ∈ [-h, 0]; exact
/// at nodes. Returns n × cols.
Eigen::MatrixXd mesh_interpolate(const Eigen::MatrixXd& Y, int n, int m, double h, double theta);

/// Discretized U(t,s) on MeshCoord: column (i,c) is the image of hat (i,c).
Eigen::MatrixXd evolution_matrix(const LinearSpec& L, double s, double t, int m, double dt);

struct MonodromyMatrix {
  double base = 0.0;
  double period = 1.0;
  int n = 1;
  int m = 64;
  double h = 1.0;
  double dt = 0.0;
  Eigen::MatrixXd matrix;

  Eigen::Index size() const { return matrix.rows(); }
};

/// U(s+T,s) discretized with m mesh intervals; the step is fitted to T.
MonodromyMatrix build_monodromy(const LinearSpec& L, double s, double T, int m, double dt);

enum class Stability { stable, center, unstable };
std::string to_string(Stability s);

/// Band classification: unstable iff |λ| > 1+ρ, center iff ||λ|−1| ≤ ρ.
Stability classify(std::complex<double> lambda, double rho_tol);

struct FloquetSpectrum {
  std::vector<std::complex<double>> multipliers;  ///< descending modulus, conjugates adjacent
  std::vector<Stability> classes;
  int d_minus = 0;
  int d_zero = 0;
  int d_plus = 0;
  double rho_tol = 1e-2;
};

FloquetSpectrum compute_floquet(const Eigen::MatrixXd& M, double rho_tol);
inline FloquetSpectrum compute_floquet(const MonodromyMatrix& M, double rho_tol) {
  return compute_floquet(M.matrix, rho_tol);
}

/// Spectral splitting at one base time. P_i = Φ_i W_iᵀ with W_iᵀΦ_i = I and
/// Φ_i orthonormal.
struct SpectralSplit {
  double base = 0.0;
  Eigen::MatrixXd P0, Pplus, Pminus;
  Eigen::MatrixXd Phi0, Phiplus;
  Eigen::MatrixXd W0, Wplus;
  double gap = 0.0;  ///< smallest relative distance between a selected cluster and the rest

  int d0() const { return static_cast<int>(Phi0.cols()); }
  int dplus() const { return static_cast<int>(Phiplus.cols()); }
};

/// Ordered-Schur projectors for the center and unstable clusters of `spec`.
/// Throws ClusterError when a cluster is closer than `min_gap` (relative) to
/// the rest of the spectrum.
SpectralSplit projectors_schur(const Eigen::MatrixXd& M, const FloquetSpectrum& spec,
                               double min_gap = 1e-6);

/// Real Schur form M = Q T Qᵀ with the eigenvalues of class `which` moved to
/// the leading k×k block.
struct OrderedSchur {
  Eigen::MatrixXd Q, T;
  std::vector<int> blocks;  ///< diagonal block sizes, in order
  int k = 0;
};
OrderedSchur ordered_schur(const Eigen::MatrixXd& M, double rho_tol, Stability which);

/// (1/2πi)∮(zI − M)^{-1}dz on the circle |z − z0| = r, trapezoid rule.
Eigen::MatrixXd projector_dunford(const Eigen::MatrixXd& M, std::complex<double> z0, double r,
                                  int n_quad);

/// Fiber data over the grid t_k = s + kT/N_t, k = 0..N_t.
struct FiberBundleData {
  double base = 0.0;
  double period = 1.0;
  int n = 1;
  int m = 64;
  double h = 1.0;
  double dt = 0.0;
  FloquetSpectrum spectrum;
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> Phi0, Phiplus;  ///< propagated orthonormal bases
  std::vector<Eigen::MatrixXd> C0, Cplus;      ///< U Φ(t_{k−1}) = Φ(t_k) C(t_k); C[0] = I
  std::vector<SpectralSplit> splits;           ///< direct splits at each t_k
  double projector_bound = 1.0;                ///< max ∞-norm of P_0 and P_− + P_+ over the grid

  /// Split at the grid time nearest to t (periodic extension).
  const SpectralSplit& split_near(double t) const;
};

/// Propagates the bases of `split` around one period and builds the direct
/// splits at every grid time from local monodromy matrices.
FiberBundleData propagate_fiber_bases(const LinearSpec& L, double s, double T, int N_t,
                                      const FloquetSpectrum& spectrum, const SpectralSplit& split,
                                      int m, double dt);

/// Spectrum and split at one base time.
SpectralSplit split_at(const LinearSpec& L, double s, int m, double dt, double rho_tol,
                       FloquetSpectrum* spectrum_out = nullptr);

/// Largest principal angle (radians) between the column spans of A and B.
double max_principal_angle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Spectral 2-norm.
double norm2(const Eigen::MatrixXd& A);

/// Exponential trichotomy rates a < 0 < b.
struct TrichotomyRates {
  double a = -1.0;
  double b = 1.0;
  double margin = 0.5;
  bool b_default = false;  ///< b = −a because there are no unstable multipliers
};

/// Moduli below this floor (exact zeros of the shift semigroup) are clamped
/// before taking logarithms.
inline constexpr double kMultiplierFloor = 1e-16;

TrichotomyRates estimate_trichotomy(const FloquetSpectrum& spec, double T, double margin = 0.5);

/// Fitted K in ‖U(s+kT,s)ψ‖ ≤ K e^{a kT}‖ψ‖ over k = 1..k_max for the given
/// stable vectors (MeshCoord columns), using powers of M.
double fit_decay_constant(const Eigen::MatrixXd& M, const Eigen::MatrixXd& psi, double a, double T,
                          int k_max);

/// floquet.csv: `re,im,modulus,class`.
std::string floquet_to_csv(const FloquetSpectrum& spec);
/// Whitespace-delimited matrix with header `rows cols basetime`.
std::string matrix_to_text(const Eigen::MatrixXd& A, double base_time);

}  // namespace pcm
