#pragma once

// Fixed-step RK4 method of steps for discrete-delay DDEs, with a cubic
// Hermite continuous extension. One kernel serves the nonlinear semiflow,
// the linear periodic evolution U(t,s) (batched over many initial segments)
// and the inhomogeneous linear problem used for the convolution integrals.

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pcm/mesh_state.hpp"

namespace pcm {

/// Overflow guard for all integrations.
inline constexpr double kBlowupThreshold = 1e12;

/// ẋ(t) = f(t, x(t-τ_0), ..., x(t-τ_K)) with τ_0 = 0.
///
/// `delayed` is the n×(K+1) matrix whose column k holds x(t-τ_k).
struct RHSSpec {
  using Function = std::function<Eigen::VectorXd(double t, const Eigen::MatrixXd& delayed)>;
  /// ∂f/∂x(t-τ_k) at the given arguments.
  using Jacobian =
      std::function<Eigen::MatrixXd(double t, const Eigen::MatrixXd& delayed, int k)>;

  int n = 1;
  double h = 1.0;
  std::vector<double> delays{0.0};
  Function f;
  Jacobian jacobian;  ///< optional

  void validate() const;
  double min_positive_delay() const;
};

/// ẏ(t) = L(t)y_t = Σ_k A_k(t) y(t-τ_k), with A_k T-periodic.
struct LinearSpec {
  using Coefficients = std::function<std::vector<Eigen::MatrixXd>(double t)>;

  int n = 1;
  double h = 1.0;
  std::vector<double> delays{0.0};
  double period = 1.0;
  Coefficients coefficients;

  void validate() const;
  double min_positive_delay() const;
  /// L(t)φ.
  Eigen::VectorXd apply(double t, const HistorySegment& phi) const;
};

/// Max deviation ‖A_k(t+T) − A_k(t)‖ over `samples` points in [0,T).
double periodicity_defect(const LinearSpec& L, int samples);

/// Piecewise cubic Hermite trajectory on [s, e] (possibly a batch of `cols`
/// trajectories integrated together), preceded by the initial segments that
/// cover [s-h, s].
class DenseSolution {
 public:
  DenseSolution() = default;
  /// Node data: x[k], dx[k] are n×cols matrices at t_k = start + k·step.
  DenseSolution(double start, double step, std::vector<HistorySegment> initial,
                std::vector<Eigen::MatrixXd> x, std::vector<Eigen::MatrixXd> dx);

  double start() const { return start_; }
  double end() const { return start_ + step_ * steps(); }
  double step() const { return step_; }
  int steps() const { return static_cast<int>(x_.size()) - 1; }
  int dim() const { return n_; }
  int cols() const { return cols_; }
  double time(int k) const { return start_ + k * step_; }

  const std::vector<HistorySegment>& initial() const { return initial_; }
  const Eigen::MatrixXd& node_state(int k) const { return x_[k]; }
  const Eigen::MatrixXd& node_derivative(int k) const { return dx_[k]; }

  /// x(t) for t ∈ [s-h, e] (initial segment for t < s). n×cols.
  Eigen::MatrixXd state(double t) const;
  Eigen::VectorXd state(double t, int col) const;
  /// ẋ(t) for t ∈ [s, e] from the Hermite extension.
  Eigen::MatrixXd derivative(double t) const;

  /// x_t sampled at the nodes of the initial segment's mesh (or `m` nodes if
  /// given); derivative data is attached when every node has it.
  HistorySegment history_at(double t, int col = 0, int m = -1) const;
  std::vector<HistorySegment> histories_at(double t, int m = -1) const;

 private:
  double start_ = 0.0;
  double step_ = 1.0;
  int n_ = 0;
  int cols_ = 0;
  std::vector<HistorySegment> initial_;
  std::vector<Eigen::MatrixXd> x_;
  std::vector<Eigen::MatrixXd> dx_;
};

inline HistorySegment history_at(const DenseSolution& sol, double t) { return sol.history_at(t); }

/// Semiflow of the nonlinear DDE from φ at time s, integrated to e with step Δt.
DenseSolution integrate_nonlinear(const RHSSpec& rhs, const HistorySegment& phi, double s, double e,
                                  double dt);

using Forcing = std::function<Eigen::VectorXd(double t)>;

/// Linear periodic DDE for a batch of initial segments (one column each).
/// A forcing term, when given, requires a single column.
DenseSolution integrate_linear(const LinearSpec& L, std::span<const HistorySegment> initial,
                               double s, double e, double dt, const Forcing& forcing = {});

/// y_t = U(t,s)φ.
HistorySegment apply_evolution(const LinearSpec& L, const HistorySegment& phi, double s, double t,
                               double dt);
std::vector<HistorySegment> apply_evolution(const LinearSpec& L,
                                            std::span<const HistorySegment> phis, double s,
                                            double t, double dt);

/// ẏ = L(t)y_t + w(t), y_s = ψ.
DenseSolution solve_inhomogeneous(const LinearSpec& L, const Forcing& w, const HistorySegment& psi,
                                  double s, double e, double dt);

/// Dense solution assembled from uniformly spaced samples (rows of `samples`
/// at start + k·step); derivatives from fourth-order finite differences.
DenseSolution dense_from_samples(double start, double step, const Eigen::MatrixXd& samples,
                                 const HistorySegment& initial);

/// CSV `t,x0..x{n-1}` at the grid times of column `col`.
std::string trajectory_to_csv(const DenseSolution& sol, int col = 0);

}  // namespace pcm
