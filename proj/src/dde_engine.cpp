#include "pcm/dde_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "csv_util.hpp"
#include "pcm/errors.hpp"

namespace pcm {

namespace {

void validate_delays(int n, double h, const std::vector<double>& delays) {
  if (n < 1) throw DomainError("state dimension must be at least 1");
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("delay horizon must be positive");
  if (delays.empty() || delays[0] != 0.0) throw DomainError("delay list must start with 0");
  for (double tau : delays)
    if (!(tau >= 0.0) || tau > h * (1 + 1e-12))
      throw DomainError("delays must lie in [0,h]");
}

double min_positive(const std::vector<double>& delays) {
  double best = std::numeric_limits<double>::infinity();
  for (double tau : delays)
    if (tau > 0.0) best = std::min(best, tau);
  return best;
}

struct Hermite {
  double h00, h10, h01, h11;
  double d00, d10, d01, d11;
};

Hermite hermite_weights(double r, double dt) {
  const double r2 = r * r;
  const double r3 = r2 * r;
  Hermite w;
  w.h00 = 2 * r3 - 3 * r2 + 1;
  w.h10 = (r3 - 2 * r2 + r) * dt;
  w.h01 = -2 * r3 + 3 * r2;
  w.h11 = (r3 - r2) * dt;
  w.d00 = (6 * r2 - 6 * r) / dt;
  w.d10 = 3 * r2 - 4 * r + 1;
  w.d01 = -w.d00;
  w.d11 = 3 * r2 - 2 * r;
  return w;
}

// Batched right-hand side: fills `out` (n×cols) from delayed[k] = x(t-τ_k).
using BatchRhs =
    std::function<void(double t, const std::vector<Eigen::MatrixXd>& delayed, Eigen::MatrixXd& out)>;

DenseSolution run_rk4(int n, const std::vector<double>& delays, std::vector<HistorySegment> initial,
                      double s, double e, double dt, const BatchRhs& rhs) {
  if (initial.empty()) throw DomainError("integration needs at least one initial segment");
  const double hmax = *std::max_element(delays.begin(), delays.end());
  for (const auto& seg : initial) {
    if (seg.dim() != n) throw DomainError("initial segment dimension does not match the equation");
    if (seg.horizon() < hmax * (1 - 1e-12))
      throw DomainError("initial segment shorter than the largest delay");
  }
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  if (dt > min_positive(delays) * (1 + 1e-9))
    throw DomainError("time step exceeds the smallest positive delay");
  const TimeGrid grid = make_time_grid(s, e, dt);
  const int K = grid.steps();
  const double step = K > 0 ? grid.step : dt;
  const int cols = static_cast<int>(initial.size());

  std::vector<Eigen::MatrixXd> x(K + 1, Eigen::MatrixXd::Zero(n, cols));
  std::vector<Eigen::MatrixXd> dx(K + 1, Eigen::MatrixXd::Zero(n, cols));
  for (int c = 0; c < cols; ++c) x[0].col(c) = initial[c].values().row(initial[c].intervals()).transpose();

  // x(tq) while step j is in progress (nodes 0..j and dx[0..j] are final).
  auto lookup = [&](double tq, int j, Eigen::MatrixXd& out) {
    if (tq <= s) {
      for (int c = 0; c < cols; ++c)
        out.col(c) = initial[c].eval(std::max(tq - s, -initial[c].horizon()));
      return;
    }
    const double u = (tq - s) / step;
    const int i = static_cast<int>(std::floor(u));
    if (i >= j) {
      out = x[j];
      return;
    }
    const Hermite w = hermite_weights(u - i, step);
    out = w.h00 * x[i] + w.h10 * dx[i] + w.h01 * x[i + 1] + w.h11 * dx[i + 1];
  };

  const int nd = static_cast<int>(delays.size());
  std::vector<Eigen::MatrixXd> delayed(nd, Eigen::MatrixXd(n, cols));
  auto stage = [&](double t, int j, const Eigen::MatrixXd& current, Eigen::MatrixXd& out) {
    for (int k = 0; k < nd; ++k) {
      if (delays[k] == 0.0)
        delayed[k] = current;
      else
        lookup(t - delays[k], j, delayed[k]);
    }
    rhs(t, delayed, out);
    if (!out.allFinite())
      throw RhsError("right-hand side returned a non-finite value at t = " + detail::format_double(t));
  };

  Eigen::MatrixXd k1(n, cols), k2(n, cols), k3(n, cols), k4(n, cols), tmp(n, cols);
  for (int j = 0; j < K; ++j) {
    const double t = grid.at(j);
    stage(t, j, x[j], k1);
    dx[j] = k1;
    tmp = x[j] + 0.5 * step * k1;
    stage(t + 0.5 * step, j, tmp, k2);
    tmp = x[j] + 0.5 * step * k2;
    stage(t + 0.5 * step, j, tmp, k3);
    tmp = x[j] + step * k3;
    stage(t + step, j, tmp, k4);
    x[j + 1] = x[j] + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double norm = x[j + 1].cwiseAbs().maxCoeff();
    if (!(norm <= kBlowupThreshold)) {
      const double tb = grid.at(j + 1);
      throw DivergenceError("solution blew up (|x| > 1e12) at t = " + detail::format_double(tb), tb);
    }
  }
  stage(grid.at(K), K, x[K], k1);
  dx[K] = k1;
  return DenseSolution(s, step, std::move(initial), std::move(x), std::move(dx));
}

}  // namespace

void RHSSpec::validate() const {
  validate_delays(n, h, delays);
  if (!f) throw DomainError("right-hand side callback missing");
}

double RHSSpec::min_positive_delay() const { return min_positive(delays); }

void LinearSpec::validate() const {
  validate_delays(n, h, delays);
  if (!(period > 0.0)) throw DomainError("period must be positive");
  if (!coefficients) throw DomainError("coefficient callback missing");
}

double LinearSpec::min_positive_delay() const { return min_positive(delays); }

Eigen::VectorXd LinearSpec::apply(double t, const HistorySegment& phi) const {
  const auto A = coefficients(t);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < delays.size(); ++k) out += A[k] * phi.eval(-delays[k]);
  return out;
}

double periodicity_defect(const LinearSpec& L, int samples) {
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double t = L.period * i / samples;
    const auto a = L.coefficients(t);
    const auto b = L.coefficients(t + L.period);
    for (std::size_t k = 0; k < a.size(); ++k)
      worst = std::max(worst, (a[k] - b[k]).cwiseAbs().maxCoeff());
  }
  return worst;
}

DenseSolution::DenseSolution(double start, double step, std::vector<HistorySegment> initial,
                             std::vector<Eigen::MatrixXd> x, std::vector<Eigen::MatrixXd> dx)
    : start_(start), step_(step), initial_(std::move(initial)), x_(std::move(x)), dx_(std::move(dx)) {
  if (x_.empty() || x_.size() != dx_.size()) throw DomainError("dense solution needs node data");
  if (!(step_ > 0.0)) throw DomainError("dense solution step must be positive");
  n_ = static_cast<int>(x_[0].rows());
  cols_ = static_cast<int>(x_[0].cols());
  if (static_cast<int>(initial_.size()) != cols_)
    throw DomainError("one initial segment per column required");
}

Eigen::MatrixXd DenseSolution::state(double t) const {
  const double tol = 1e-10 * std::max(1.0, std::abs(end()));
  if (t < start_) {
    Eigen::MatrixXd out(n_, cols_);
    for (int c = 0; c < cols_; ++c) out.col(c) = initial_[c].eval(t - start_);
    return out;
  }
  if (t > end() + tol || !std::isfinite(t))
    throw DomainError("time outside dense solution: t = " + detail::format_double(t));
  const int K = steps();
  if (K == 0) return x_[0];
  const double u = (t - start_) / step_;
  const int i = std::min(static_cast<int>(std::floor(u)), K - 1);
  const Hermite w = hermite_weights(std::min(u - i, 1.0), step_);
  return w.h00 * x_[i] + w.h10 * dx_[i] + w.h01 * x_[i + 1] + w.h11 * dx_[i + 1];
}

Eigen::VectorXd DenseSolution::state(double t, int col) const {
  if (t < start_) return initial_[col].eval(t - start_);
  return state(t).col(col);
}

Eigen::MatrixXd DenseSolution::derivative(double t) const {
  const double tol = 1e-10 * std::max(1.0, std::abs(end()));
  if (t < start_ - tol || t > end() + tol || !std::isfinite(t))
    throw DomainError("time outside dense solution: t = " + detail::format_double(t));
  const int K = steps();
  if (K == 0) return dx_[0];
  const double u = std::max(0.0, (t - start_) / step_);
  const int i = std::min(static_cast<int>(std::floor(u)), K - 1);
  const Hermite w = hermite_weights(std::min(u - i, 1.0), step_);
  return w.d00 * x_[i] + w.d10 * dx_[i] + w.d01 * x_[i + 1] + w.d11 * dx_[i + 1];
}

HistorySegment DenseSolution::history_at(double t, int col, int m) const {
  const double tol = 1e-10 * std::max(1.0, std::abs(end()));
  if (t < start_ - tol || t > end() + tol || !std::isfinite(t))
    throw DomainError("history requested outside [s,e]: t = " + detail::format_double(t));
  if (col < 0 || col >= cols_) throw DomainError("column index out of range");
  const HistorySegment& init = initial_[col];
  const double h = init.horizon();
  if (m < 0) m = init.intervals();
  Eigen::MatrixXd v(m + 1, n_);
  Eigen::MatrixXd d(m + 1, n_);
  bool derivs_ok = true;
  for (int i = 0; i <= m; ++i) {
    const double theta = (i == m) ? 0.0 : -h + i * (h / m);
    const double tq = t + theta;
    if (tq <= start_) {
      const double off = std::max(tq - start_, -h);
      v.row(i) = init.eval(off).transpose();
      if (init.has_derivs())
        d.row(i) = init.eval_derivative(off).transpose();
      else
        derivs_ok = false;
    } else {
      const double tc = std::min(tq, end());
      v.row(i) = state(tc).col(col).transpose();
      d.row(i) = derivative(tc).col(col).transpose();
    }
  }
  if (derivs_ok) return HistorySegment(h, std::move(v), std::move(d));
  return HistorySegment(h, std::move(v));
}

std::vector<HistorySegment> DenseSolution::histories_at(double t, int m) const {
  const double tol = 1e-10 * std::max(1.0, std::abs(end()));
  if (t < start_ - tol || t > end() + tol || !std::isfinite(t))
    throw DomainError("history requested outside [s,e]: t = " + detail::format_double(t));
  // Evaluate the whole batch once per node.
  const double h = initial_.front().horizon();
  if (m < 0) m = initial_.front().intervals();
  const bool uniform = std::all_of(initial_.begin(), initial_.end(),
                                   [h](const HistorySegment& seg) { return seg.horizon() == h; });
  if (!uniform) {
    std::vector<HistorySegment> out;
    for (int c = 0; c < cols_; ++c) out.push_back(history_at(t, c, m));
    return out;
  }
  std::vector<Eigen::MatrixXd> v(cols_, Eigen::MatrixXd(m + 1, n_)), d(cols_, Eigen::MatrixXd(m + 1, n_));
  std::vector<char> derivs_ok(cols_, 1);
  for (int i = 0; i <= m; ++i) {
    const double theta = (i == m) ? 0.0 : -h + i * (h / m);
    const double tq = t + theta;
    if (tq <= start_) {
      const double off = std::max(tq - start_, -h);
      for (int c = 0; c < cols_; ++c) {
        v[c].row(i) = initial_[c].eval(off).transpose();
        if (initial_[c].has_derivs())
          d[c].row(i) = initial_[c].eval_derivative(off).transpose();
        else
          derivs_ok[c] = 0;
      }
    } else {
      const double tc = std::min(tq, end());
      const Eigen::MatrixXd S = state(tc);
      const Eigen::MatrixXd D = derivative(tc);
      for (int c = 0; c < cols_; ++c) {
        v[c].row(i) = S.col(c).transpose();
        d[c].row(i) = D.col(c).transpose();
      }
    }
  }
  std::vector<HistorySegment> out;
  out.reserve(cols_);
  for (int c = 0; c < cols_; ++c) {
    if (derivs_ok[c])
      out.emplace_back(h, std::move(v[c]), std::move(d[c]));
    else
      out.emplace_back(h, std::move(v[c]));
  }
  return out;
}

DenseSolution integrate_nonlinear(const RHSSpec& rhs, const HistorySegment& phi, double s, double e,
                                  double dt) {
  rhs.validate();
  const int nd = static_cast<int>(rhs.delays.size());
  Eigen::MatrixXd args(rhs.n, nd);
  BatchRhs batch = [&](double t, const std::vector<Eigen::MatrixXd>& delayed, Eigen::MatrixXd& out) {
    for (int k = 0; k < nd; ++k) args.col(k) = delayed[k].col(0);
    Eigen::VectorXd v = rhs.f(t, args);
    if (v.size() != rhs.n) throw RhsError("right-hand side returned a vector of the wrong size");
    out.col(0) = v;
  };
  return run_rk4(rhs.n, rhs.delays, {phi}, s, e, dt, batch);
}

DenseSolution integrate_linear(const LinearSpec& L, std::span<const HistorySegment> initial,
                               double s, double e, double dt, const Forcing& forcing) {
  L.validate();
  if (forcing && initial.size() != 1) throw DomainError("forcing requires a single initial segment");
  const int nd = static_cast<int>(L.delays.size());
  BatchRhs batch = [&](double t, const std::vector<Eigen::MatrixXd>& delayed, Eigen::MatrixXd& out) {
    const auto A = L.coefficients(t);
    if (static_cast<int>(A.size()) != nd) throw DomainError("coefficient count does not match delays");
    out.noalias() = A[0] * delayed[0];
    for (int k = 1; k < nd; ++k) out.noalias() += A[k] * delayed[k];
    if (forcing) out.col(0) += forcing(t);
  };
  return run_rk4(L.n, L.delays, std::vector<HistorySegment>(initial.begin(), initial.end()), s, e, dt,
                 batch);
}

HistorySegment apply_evolution(const LinearSpec& L, const HistorySegment& phi, double s, double t,
                               double dt) {
  if (t < s) throw DomainError("evolution requires t >= s");
  if (t == s) return phi;
  return integrate_linear(L, std::span<const HistorySegment>(&phi, 1), s, t, dt).history_at(t);
}

std::vector<HistorySegment> apply_evolution(const LinearSpec& L,
                                            std::span<const HistorySegment> phis, double s,
                                            double t, double dt) {
  if (t < s) throw DomainError("evolution requires t >= s");
  if (t == s) return {phis.begin(), phis.end()};
  return integrate_linear(L, phis, s, t, dt).histories_at(t);
}

DenseSolution solve_inhomogeneous(const LinearSpec& L, const Forcing& w, const HistorySegment& psi,
                                  double s, double e, double dt) {
  return integrate_linear(L, std::span<const HistorySegment>(&psi, 1), s, e, dt, w);
}

DenseSolution dense_from_samples(double start, double step, const Eigen::MatrixXd& samples,
                                 const HistorySegment& initial) {
  const Eigen::MatrixXd d = fd_derivative(samples, step);
  std::vector<Eigen::MatrixXd> x, dx;
  x.reserve(samples.rows());
  dx.reserve(samples.rows());
  for (Eigen::Index k = 0; k < samples.rows(); ++k) {
    x.emplace_back(samples.row(k).transpose());
    dx.emplace_back(d.row(k).transpose());
  }
  return DenseSolution(start, step, {initial}, std::move(x), std::move(dx));
}

std::string trajectory_to_csv(const DenseSolution& sol, int col) {
  std::ostringstream out;
  out << 't';
  for (int c = 0; c < sol.dim(); ++c) out << ",x" << c;
  out << '\n';
  for (int k = 0; k <= sol.steps(); ++k) {
    out << detail::format_double(sol.time(k));
    for (int c = 0; c < sol.dim(); ++c) out << ',' << detail::format_double(sol.node_state(k)(c, col));
    out << '\n';
  }
  return out.str();
}

}  // namespace pcm
