#include "pcm/cycle_finder.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csv_util.hpp"
#include "pcm/errors.hpp"

namespace pcm {

CycleSolution::CycleSolution(double period, double dt, int m, DenseSolution gamma)
    : period_(period), dt_(dt), m_(m), gamma_(std::move(gamma)) {
  if (!(period_ > 0.0)) throw DomainError("cycle period must be positive");
  if (std::abs(gamma_.end() - gamma_.start() - period_) > 1e-9 * period_)
    throw DomainError("cycle dense data must span exactly one period");
}

double CycleSolution::wrap(double t) const {
  double u = std::fmod(t, period_);
  if (u < 0) u += period_;
  return gamma_.start() + u;
}

Eigen::VectorXd CycleSolution::state(double t) const { return gamma_.state(wrap(t)).col(0); }

Eigen::VectorXd CycleSolution::velocity(double t) const { return gamma_.derivative(wrap(t)).col(0); }

HistorySegment CycleSolution::history(double t, int m) const {
  if (m < 0) m = m_;
  const double h = horizon();
  Eigen::MatrixXd v(m + 1, dim()), d(m + 1, dim());
  for (int i = 0; i <= m; ++i) {
    const double theta = (i == m) ? 0.0 : -h + i * (h / m);
    v.row(i) = state(t + theta).transpose();
    d.row(i) = velocity(t + theta).transpose();
  }
  return HistorySegment(h, std::move(v), std::move(d));
}

HistorySegment CycleSolution::velocity_history(double t, int m) const {
  if (m < 0) m = m_;
  const double h = horizon();
  Eigen::MatrixXd v(m + 1, dim());
  for (int i = 0; i <= m; ++i) v.row(i) = velocity(t + ((i == m) ? 0.0 : -h + i * (h / m))).transpose();
  return HistorySegment(h, std::move(v));
}

CycleSolution analytic_cycle(int n, double h, double period, double dt, int m,
                             const std::function<Eigen::VectorXd(double)>& gamma,
                             const std::function<Eigen::VectorXd(double)>& dgamma) {
  const TimeGrid grid = make_time_grid(0.0, period, dt);
  const int K = grid.steps();
  std::vector<Eigen::MatrixXd> x, dx;
  for (int k = 0; k <= K; ++k) {
    const double t = k == K ? 0.0 : grid.at(k);  // exact periodic closure
    x.emplace_back(gamma(t));
    dx.emplace_back(dgamma(t));
  }
  auto initial = HistorySegment::sample(h, n, m, gamma, dgamma);
  return CycleSolution(period, grid.step, m, DenseSolution(0.0, grid.step, {initial}, x, dx));
}

double phase_condition(const DenseSolution& ref, double T_ref, const DenseSolution& x, double T,
                       int samples) {
  if (samples < 1) throw DomainError("phase condition needs at least one interval");
  double sum = 0.0;
  for (int k = 0; k <= samples; ++k) {
    const double sigma = static_cast<double>(k) / samples;
    const double tr = ref.start() + sigma * T_ref;
    const double tx = x.start() + sigma * T;
    const double val = ref.derivative(tr).col(0).dot(x.state(tx).col(0) - ref.state(tr).col(0));
    sum += (k == 0 || k == samples) ? 0.5 * val : val;
  }
  return sum / samples * T_ref;
}

namespace {

struct ShootingEval {
  Eigen::VectorXd F;
  DenseSolution sol;
  double period_residual = 0.0;
};

}  // namespace

CycleSolution find_cycle(const RHSSpec& rhs, const DenseSolution& guess, double T_guess,
                         const CycleOptions& opts) {
  rhs.validate();
  if (!(T_guess > 0.0)) throw DomainError("period guess must be positive");
  if (!(opts.dt > 0.0)) throw DomainError("cycle step must be positive");
  const int n = rhs.n;
  const int m = opts.m;
  const double h = rhs.h;
  const int N = n * (m + 1);
  const int K = std::max(1, static_cast<int>(std::lround(T_guess / opts.dt)));

  Eigen::VectorXd z(N + 1);
  {
    Eigen::MatrixXd v(m + 1, n);
    for (int i = 0; i <= m; ++i) {
      const double theta = (i == m) ? 0.0 : -h + i * (h / m);
      v.row(i) = guess.state(guess.start() + theta).col(0).transpose();
    }
    z.head(N) = to_mesh(HistorySegment(h, v));
    z(N) = T_guess;
  }

  auto evaluate = [&](const Eigen::VectorXd& zz) {
    const double T = zz(N);
    if (!(T > 0.0)) throw DomainError("Newton iterate has non-positive period");
    auto seg = with_fd_derivs(from_mesh(zz.head(N), h, n, m));
    ShootingEval ev{Eigen::VectorXd(N + 1), integrate_nonlinear(rhs, seg, 0.0, T, T / K), 0.0};
    ev.F.head(N) = to_mesh(ev.sol.history_at(T)) - zz.head(N);
    ev.period_residual = ev.F.head(N).cwiseAbs().maxCoeff();
    ev.F(N) = phase_condition(guess, T_guess, ev.sol, T, K);
    return ev;
  };

  std::vector<double> history;
  ShootingEval cur = evaluate(z);
  for (int it = 0;; ++it) {
    const double r = cur.F.cwiseAbs().maxCoeff();
    history.push_back(r);
    if (r <= opts.tol) {
      CycleSolution out(z(N), z(N) / K, m, std::move(cur.sol));
      out.residual = cur.period_residual;
      out.newton_iterations = it;
      out.residual_history = history;
      return out;
    }
    if (it >= opts.max_newton)
      throw ConvergenceError("Newton shooting did not converge in " + std::to_string(opts.max_newton) +
                                 " iterations (residual " + detail::format_double(r) + ")",
                             history);
    Eigen::MatrixXd J(N + 1, N + 1);
    for (int j = 0; j <= N; ++j) {
      const double eps = opts.fd_step * std::max(1.0, std::abs(z(j)));
      Eigen::VectorXd zp = z;
      zp(j) += eps;
      J.col(j) = (evaluate(zp).F - cur.F) / eps;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
    qr.setThreshold(1e-12);
    if (qr.rank() < N + 1)
      throw RankError("singular Newton matrix in cycle shooting (rank " + std::to_string(qr.rank()) +
                      " of " + std::to_string(N + 1) + "); check the period guess");
    const Eigen::VectorXd delta = qr.solve(-cur.F);
    double lambda = 1.0;
    while (true) {
      Eigen::VectorXd trial = z + lambda * delta;
      bool ok = false;
      ShootingEval ev;
      try {
        ev = evaluate(trial);
        ok = ev.F.cwiseAbs().maxCoeff() < r || lambda < 1.0 / 16;
      } catch (const DivergenceError&) {
      } catch (const DomainError&) {
      }
      if (ok) {
        z = trial;
        cur = std::move(ev);
        break;
      }
      lambda *= 0.5;
      if (lambda < 1.0 / 64)
        throw ConvergenceError("Newton step failed to reduce the shooting residual", history);
    }
  }
}

CycleGuess guess_from_transient(const RHSSpec& rhs, const HistorySegment& phi, double t_transient,
                                double dt, int m) {
  const auto sol = integrate_nonlinear(rhs, phi, 0.0, t_transient, dt);
  const int K = sol.steps();
  double mean = 0.0;
  for (int k = K / 2; k <= K; ++k) mean += sol.node_state(k)(0, 0);
  mean /= (K - K / 2 + 1);
  std::vector<double> up;
  for (int k = K / 2; k < K; ++k) {
    const double a = sol.node_state(k)(0, 0) - mean;
    const double b = sol.node_state(k + 1)(0, 0) - mean;
    if (a < 0.0 && b >= 0.0) up.push_back(sol.time(k) + sol.step() * a / (a - b));
  }
  if (up.size() < 2) throw NumericalError("transient did not settle on an oscillation");
  const double t0 = up[up.size() - 2];
  const double T = up.back() - t0;
  const int Kg = std::max(8, static_cast<int>(std::lround(T / dt)));
  const double step = T / Kg;
  Eigen::MatrixXd samples(Kg + 1, rhs.n);
  for (int k = 0; k <= Kg; ++k) samples.row(k) = sol.state(t0 + k * step).col(0).transpose();
  return {dense_from_samples(0.0, step, samples, sol.history_at(t0, 0, m)), T};
}

double cycle_residual(const RHSSpec& rhs, const CycleSolution& cycle) {
  const auto g0 = cycle.history(0.0);
  const auto sol = integrate_nonlinear(rhs, g0, 0.0, cycle.period(), cycle.dt());
  return (sol.history_at(cycle.period()).values() - g0.values()).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd delayed_values(const HistorySegment& phi, const std::vector<double>& delays) {
  Eigen::MatrixXd out(phi.dim(), static_cast<Eigen::Index>(delays.size()));
  for (std::size_t k = 0; k < delays.size(); ++k) out.col(k) = phi.eval(-delays[k]);
  return out;
}

Linearization linearize_about_cycle(const RHSSpec& rhs, const CycleSolution& cycle) {
  rhs.validate();
  if (cycle.dim() != rhs.n) throw DomainError("cycle dimension does not match the equation");
  const auto delays = rhs.delays;
  const int nd = static_cast<int>(delays.size());
  const int n = rhs.n;

  auto gamma_args = [cycle, delays, n, nd](double t) {
    Eigen::MatrixXd args(n, nd);
    for (int k = 0; k < nd; ++k) args.col(k) = cycle.state(t - delays[k]);
    return args;
  };

  auto jac = [rhs, n, nd](double t, const Eigen::MatrixXd& args) {
    std::vector<Eigen::MatrixXd> A(nd);
    if (rhs.jacobian) {
      for (int k = 0; k < nd; ++k) A[k] = rhs.jacobian(t, args, k);
      return A;
    }
    const double eps = 1e-6 * (1.0 + args.cwiseAbs().maxCoeff());
    for (int k = 0; k < nd; ++k) {
      A[k].resize(n, n);
      for (int j = 0; j < n; ++j) {
        Eigen::MatrixXd p = args, q = args;
        p(j, k) += eps;
        q(j, k) -= eps;
        A[k].col(j) = (rhs.f(t, p) - rhs.f(t, q)) / (2 * eps);
      }
    }
    return A;
  };

  Linearization out;
  out.L.n = n;
  out.L.h = rhs.h;
  out.L.delays = delays;
  out.L.period = cycle.period();
  out.L.coefficients = [gamma_args, jac](double t) { return jac(t, gamma_args(t)); };
  out.G = [rhs, gamma_args, jac, nd](double t, const Eigen::MatrixXd& phi) {
    const Eigen::MatrixXd args = gamma_args(t);
    const auto A = jac(t, args);
    Eigen::VectorXd g = rhs.f(t, args + phi) - rhs.f(t, args);
    for (int k = 0; k < nd; ++k) g -= A[k] * phi.col(k);
    return g;
  };
  return out;
}

std::string cycle_to_csv(const CycleSolution& cycle) {
  std::ostringstream out;
  out << 't';
  for (int c = 0; c < cycle.dim(); ++c) out << ",gamma_" << c;
  out << '\n';
  const double dt = cycle.dt();
  const int K = static_cast<int>(std::lround(cycle.period() / dt));
  const int kneg = static_cast<int>(std::ceil(cycle.horizon() / dt - 1e-9));
  for (int k = -kneg; k <= K; ++k) {
    const double t = k * dt;
    const Eigen::VectorXd x =
        (k >= 0) ? Eigen::VectorXd(cycle.dense().node_state(k).col(0)) : cycle.state(t);
    out << detail::format_double(t);
    for (int c = 0; c < cycle.dim(); ++c) out << ',' << detail::format_double(x(c));
    out << '\n';
  }
  return out.str();
}

CycleSolution cycle_from_csv(std::string_view text, double h, int m) {
  auto rows = detail::lines(text);
  if (rows.size() < 3) throw DomainError("cycle CSV needs a header and data rows");
  auto header = detail::split(rows[0], ',');
  if (detail::trim(header[0]) != "t") throw DomainError("cycle CSV header must start with 't'");
  const int n = static_cast<int>(header.size()) - 1;
  if (n < 1) throw DomainError("cycle CSV has no state columns");
  std::vector<double> ts;
  std::vector<Eigen::VectorXd> xs;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    auto cells = detail::split(rows[r], ',');
    if (static_cast<int>(cells.size()) != n + 1)
      throw DomainError("cycle CSV row " + std::to_string(r + 1) + " has wrong width");
    const double t = detail::parse_double(cells[0]);
    if (t < -1e-12) continue;
    Eigen::VectorXd x(n);
    for (int c = 0; c < n; ++c) x(c) = detail::parse_double(cells[1 + c]);
    ts.push_back(t);
    xs.push_back(x);
  }
  if (ts.size() < 5) throw DomainError("cycle CSV needs at least five rows on [0,T]");
  const int K = static_cast<int>(ts.size()) - 1;
  const double T = ts.back();
  const double step = T / K;
  Eigen::MatrixXd samples(K + 1, n);
  for (int k = 0; k <= K; ++k) {
    if (std::abs(ts[k] - k * step) > 1e-9 * std::max(1.0, T))
      throw DomainError("cycle CSV times are not uniform");
    samples.row(k) = xs[k].transpose();
  }
  // Provisional initial segment; replaced by the periodic history below.
  auto provisional = CycleSolution(T, step, m,
                                   dense_from_samples(0.0, step, samples,
                                                      HistorySegment::zero(h, n, m)));
  return CycleSolution(T, step, m, dense_from_samples(0.0, step, samples, provisional.history(0.0, m)));
}

}  // namespace pcm
