#pragma once

// Periodic orbits of autonomous DDEs by Newton shooting, and the periodic
// linearization / nonlinear remainder about a cycle.

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "pcm/dde_engine.hpp"
#include "pcm/mesh_state.hpp"

namespace pcm {

/// A T-periodic solution γ, stored as a dense solution on [0,T] and
/// extended to all of R by periodic wrap.
class CycleSolution {
 public:
  CycleSolution() = default;
  CycleSolution(double period, double dt, int m, DenseSolution gamma);

  double period() const { return period_; }
  double dt() const { return dt_; }
  int mesh() const { return m_; }
  int dim() const { return gamma_.dim(); }
  double horizon() const { return gamma_.initial().front().horizon(); }
  const DenseSolution& dense() const { return gamma_; }

  Eigen::VectorXd state(double t) const;
  Eigen::VectorXd velocity(double t) const;
  /// γ_t on an m-interval mesh, with γ̇ attached as Hermite data.
  HistorySegment history(double t, int m = -1) const;
  /// γ̇_t on an m-interval mesh (values only).
  HistorySegment velocity_history(double t, int m = -1) const;

  /// Newton statistics (empty for analytic cycles).
  double residual = 0.0;
  int newton_iterations = 0;
  std::vector<double> residual_history;

 private:
  double wrap(double t) const;

  double period_ = 1.0;
  double dt_ = 1.0;
  int m_ = 64;
  DenseSolution gamma_;
};

/// Cycle built from exact samples of an analytic periodic solution.
CycleSolution analytic_cycle(int n, double h, double period, double dt, int m,
                             const std::function<Eigen::VectorXd(double)>& gamma,
                             const std::function<Eigen::VectorXd(double)>& dgamma);

struct CycleOptions {
  int m = 64;
  double dt = 0.0;          ///< nominal step; the step count is fixed from T_guess
  double tol = 1e-10;       ///< on the sup norm of the shooting residual
  int max_newton = 20;
  double fd_step = 1e-7;    ///< relative finite-difference step
};

/// ∫₀¹⟨γ̇_ref(σT_ref), x(σT) − γ_ref(σT_ref)⟩dσ · T_ref, trapezoid rule on
/// `samples` intervals. Both solutions are read relative to their start times.
double phase_condition(const DenseSolution& ref, double T_ref, const DenseSolution& x, double T,
                       int samples);

/// Newton shooting for (γ_0, T): residual x_T − x_0 on the mesh plus the
/// integral phase condition against the guess. `guess` is read on
/// [start-h, start+T_guess].
CycleSolution find_cycle(const RHSSpec& rhs, const DenseSolution& guess, double T_guess,
                         const CycleOptions& opts);

struct CycleGuess {
  DenseSolution guess;
  double period = 0.0;
};

/// Guess from a long transient: integrates from φ over [0, t_transient] and
/// cuts one period between the last two upward crossings of the mean of
/// component 0.
CycleGuess guess_from_transient(const RHSSpec& rhs, const HistorySegment& phi, double t_transient,
                                double dt, int m);

/// ‖x_T − γ_0‖_sup after re-integrating one period from γ_0.
double cycle_residual(const RHSSpec& rhs, const CycleSolution& cycle);

/// G(t, ·) acting on delayed values: column k of `delayed` is φ(−τ_k).
using Remainder = std::function<Eigen::VectorXd(double t, const Eigen::MatrixXd& delayed)>;

struct Linearization {
  LinearSpec L;
  Remainder G;
};

/// L(t) = DF(γ_t) and G(t,φ) = F(γ_t+φ) − F(γ_t) − L(t)φ. Uses the RHS
/// Jacobians when present, central differences otherwise.
Linearization linearize_about_cycle(const RHSSpec& rhs, const CycleSolution& cycle);

/// Delayed values φ(−τ_k) as the columns of an n×(K+1) matrix.
Eigen::MatrixXd delayed_values(const HistorySegment& phi, const std::vector<double>& delays);

/// CSV `t,gamma_0..` at t = k·dt covering [−h, T].
std::string cycle_to_csv(const CycleSolution& cycle);
/// Reads the format above; the result wraps with the period given by the last row.
CycleSolution cycle_from_csv(std::string_view text, double h, int m);

}  // namespace pcm
