#pragma once

// Discretized state space X = C([-h,0], R^n): history segments on a uniform
// mesh, the node-major flattening used by every matrix in the library, and
// the exponentially weighted sup norm on window trajectories.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pcm {

/// Uniform mesh parameters shared by all segments of one computation.
struct Discretization {
  int m = 64;        ///< mesh intervals on [-h,0]
  double dt = 0.0;   ///< integrator step
};

/// A function on [-h,0] sampled at θ_i = -h + i·h/m, i = 0..m.
///
/// Values are stored as an (m+1)×n matrix (row = node). When derivative data
/// is present the segment is interpolated by piecewise cubic Hermite
/// polynomials, otherwise piecewise linearly. Both interpolants are exact at
/// the nodes.
class HistorySegment {
 public:
  HistorySegment() = default;
  HistorySegment(double h, Eigen::MatrixXd values,
                 std::optional<Eigen::MatrixXd> derivs = std::nullopt);

  static HistorySegment zero(double h, int n, int m, bool with_derivs = false);
  static HistorySegment constant(double h, int m, const Eigen::VectorXd& c);
  /// Samples f (and optionally df) at the nodes.
  static HistorySegment sample(double h, int n, int m,
                               const std::function<Eigen::VectorXd(double)>& f,
                               const std::function<Eigen::VectorXd(double)>& df = {});

  double horizon() const { return h_; }
  int dim() const { return static_cast<int>(values_.cols()); }
  int intervals() const { return static_cast<int>(values_.rows()) - 1; }
  double spacing() const { return h_ / intervals(); }
  double node(int i) const { return -h_ + i * spacing(); }

  const Eigen::MatrixXd& values() const { return values_; }
  bool has_derivs() const { return derivs_.has_value(); }
  const Eigen::MatrixXd& derivs() const { return *derivs_; }

  /// Point evaluation; throws DomainError for θ outside [-h,0].
  Eigen::VectorXd eval(double theta) const;
  /// Derivative of the interpolant (Hermite derivative, or the linear slope).
  Eigen::VectorXd eval_derivative(double theta) const;
  /// Sup norm over the nodes (max |value| over nodes and components).
  double sup_norm() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }

  HistorySegment without_derivs() const { return HistorySegment(h_, values_); }

  HistorySegment& operator+=(const HistorySegment& other);
  HistorySegment& operator-=(const HistorySegment& other);
  HistorySegment& operator*=(double a);

  /// this += a·other.
  HistorySegment& axpy(double a, const HistorySegment& other);

 private:
  void check_compatible(const HistorySegment& other) const;

  double h_ = 1.0;
  Eigen::MatrixXd values_;
  std::optional<Eigen::MatrixXd> derivs_;
};

HistorySegment operator+(HistorySegment a, const HistorySegment& b);
HistorySegment operator-(HistorySegment a, const HistorySegment& b);
HistorySegment operator*(double a, HistorySegment b);

inline Eigen::VectorXd eval_history(const HistorySegment& seg, double theta) {
  return seg.eval(theta);
}

/// Flattened node-major coordinates: component c of node i sits at i·n + c.
Eigen::VectorXd to_mesh(const HistorySegment& seg);
HistorySegment from_mesh(const Eigen::Ref<const Eigen::VectorXd>& coords, double h, int n, int m);
/// As from_mesh, attaching the flattened derivative vector as Hermite data.
HistorySegment from_mesh(const Eigen::Ref<const Eigen::VectorXd>& coords,
                         const Eigen::Ref<const Eigen::VectorXd>& deriv_coords, double h, int n,
                         int m);

/// Sup norm of a flattened coordinate vector (same as the segment's nodal sup norm).
inline double mesh_sup_norm(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

/// Nodal basis: element i·n + c is the piecewise-linear hat with value e_c at node i.
std::vector<HistorySegment> hat_basis(int n, int m, double h);

/// Attaches fourth-order finite-difference derivative estimates to a segment
/// that lacks them.
HistorySegment with_fd_derivs(const HistorySegment& seg);

/// Fourth-order finite-difference derivative of uniformly spaced samples
/// (rows = samples); one-sided stencils at both ends.
Eigen::MatrixXd fd_derivative(const Eigen::MatrixXd& samples, double spacing);

/// Uniform grid t_k = start + k·step on [start, end].
struct TimeGrid {
  double start = 0.0;
  double end = 0.0;
  double step = 1.0;

  int steps() const;
  double at(int k) const { return start + k * step; }
};

/// Validating constructor: step > 0, end ≥ start, (end-start)/step integral
/// within 1e-12 relative. The stored step is snapped to (end-start)/steps.
TimeGrid make_time_grid(double start, double end, double step);

/// Trajectory u: window → X on a uniform grid around a base time s.
struct WeightedTrajectory {
  double base = 0.0;
  TimeGrid grid;
  std::vector<HistorySegment> segments;  ///< one per grid point

  int size() const { return static_cast<int>(segments.size()); }
  double time(int k) const { return grid.at(k); }
  /// Index of the grid point closest to t.
  int index_of(double t) const;
};

/// max_k e^{-η|t_k - s|}·‖u(t_k)‖_sup.
double weighted_sup_norm(const WeightedTrajectory& traj, double eta, double s);

/// CSV with header `theta,x0,...,x{n-1}[,dx0,...]`, one row per node.
std::string history_to_csv(const HistorySegment& seg);
HistorySegment history_from_csv(std::string_view text);

}  // namespace pcm
