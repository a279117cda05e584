#include "pcm/lyapunov_perron.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "csv_util.hpp"
#include "pcm/errors.hpp"

namespace pcm {

double cutoff_value(double x) {
  if (!(x >= 0.0)) throw DomainError("cutoff argument must be non-negative");
  if (x <= 1.0) return 1.0;
  if (x >= 2.0) return 0.0;
  const double y = x - 1.0;
  return 1.0 - y * y * y * (10.0 + y * (-15.0 + 6.0 * y));
}

LPParameters resolve_lp_config(const LPConfig& cfg, const TrichotomyRates& rates, double T) {
  const double gap = std::min(-rates.a, rates.b);
  if (!(gap > 0.0)) throw ConfigError("trichotomy rates must satisfy a < 0 < b");
  if (!(T > 0.0)) throw ConfigError("period must be positive");
  LPParameters p;
  p.a = rates.a;
  p.b = rates.b;
  p.eta = cfg.eta == 0.0 ? 0.5 * gap : cfg.eta;
  if (!(p.eta > 0.0 && p.eta < gap))
    throw ConfigError("lp.eta = " + detail::format_double(p.eta) + " outside the admissible interval (0, " +
                      detail::format_double(gap) + ") = (0, min{-a,b})");
  if (!(cfg.delta > 0.0)) throw ConfigError("lp.delta must be positive");
  if (!(cfg.tol_fp > 0.0)) throw ConfigError("lp.tol_fp must be positive");
  if (cfg.max_iter < 1) throw ConfigError("lp.max_iter must be at least 1");
  if (!(cfg.eps_trunc > 0.0 && cfg.eps_trunc < 1.0)) throw ConfigError("lp.eps_trunc must lie in (0,1)");
  if (!(cfg.dt > 0.0)) throw ConfigError("time step must be positive");
  const double w_min = std::log(1.0 / cfg.eps_trunc) / gap;
  double W = w_min;
  if (cfg.window > 0.0) {
    if (cfg.window < w_min * (1.0 - 1e-12))
      throw ConfigError("lp.window = " + detail::format_double(cfg.window) + " too small: truncation estimate " +
                        detail::format_double(std::exp(-gap * cfg.window)) + " exceeds lp.eps_trunc = " +
                        detail::format_double(cfg.eps_trunc) + " (need W >= " + detail::format_double(w_min) + ")");
    W = cfg.window;
  }
  // Whole periods, so s-W and s+W share the fibers of s.
  p.window = T * std::max(1.0, std::ceil(W / T - 1e-9));
  p.delta = cfg.delta;
  p.dt = cfg.dt;
  p.tol_fp = cfg.tol_fp;
  p.max_iter = cfg.max_iter;
  p.N = cfg.N;
  return p;
}

namespace {

double inf_norm(const Eigen::MatrixXd& A) {
  return A.size() ? A.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
}

double sup(const Eigen::Ref<const Eigen::VectorXd>& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double cutoff_factor(const SpectralSplit& split, const Eigen::VectorXd& u, double N, double delta) {
  const Eigen::VectorXd c = split.Phi0 * (split.W0.transpose() * u);
  const double f0 = cutoff_value(sup(c) / (N * delta));
  if (f0 == 0.0) return 0.0;
  return f0 * cutoff_value(sup(u - c) / (N * delta));
}

HistorySegment segment(const Eigen::Ref<const Eigen::VectorXd>& mesh, double h, int n, int m) {
  return with_fd_derivs(from_mesh(mesh, h, n, m));
}

Eigen::VectorXd mesh_at(const DenseSolution& sol, double t, int col, int m) {
  return to_mesh(sol.history_at(t, col, m));
}

Eigen::MatrixXd meshes_at(const DenseSolution& sol, double t, int m, int rows) {
  Eigen::MatrixXd out(rows, sol.cols());
  for (int c = 0; c < sol.cols(); ++c) out.col(c) = mesh_at(sol, t, c, m);
  return out;
}

std::string xi_text(const Eigen::VectorXd& xi) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < xi.size(); ++i) s += (i ? "," : "") + detail::format_double(xi(i));
  return s + ")";
}

}  // namespace

Eigen::VectorXd modify_nonlinearity(const Remainder& G, const std::vector<double>& delays,
                                    const SpectralSplit& split, double N, double delta, double t,
                                    const HistorySegment& u) {
  const int n = u.dim();
  if (!G) return Eigen::VectorXd::Zero(n);
  const double f = cutoff_factor(split, to_mesh(u), N, delta);
  if (f == 0.0) return Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd delayed(n, delays.size());
  for (std::size_t k = 0; k < delays.size(); ++k) delayed.col(k) = u.eval(-delays[k]);
  return f * G(t, delayed);
}

PerronSolver::PerronSolver(const CenterProblem& problem, double s, const LPConfig& cfg)
    : L_(problem.L), G_(problem.G), m_(problem.m), s_(s) {
  L_.validate();
  const double T = L_.period;
  if (!(cfg.dt > 0.0)) throw ConfigError("time step must be positive");
  const double dt = fit_step(T, cfg.dt);
  split_ = split_at(L_, s, m_, dt, cfg.rho_tol, &spectrum_);
  rates_ = estimate_trichotomy(spectrum_, T, cfg.margin);
  LPConfig fitted = cfg;
  fitted.dt = dt;
  par_ = resolve_lp_config(fitted, rates_, T);
  if (!(par_.N > 0.0)) par_.N = local_projector_bound();

  const int n = L_.n, d0 = split_.d0(), dp = split_.dplus();
  const Eigen::Index N = static_cast<Eigen::Index>(n) * (m_ + 1);
  scale_.resize(d0);
  basis_ = split_.Phi0;
  for (int i = 0; i < d0; ++i) {
    scale_(i) = sup(split_.Phi0.col(i));
    basis_.col(i) /= scale_(i);
  }

  const double W = par_.window;
  const long half = std::lround(W / dt);
  const long periods = std::lround(W / T);
  times_.resize(2 * half + 1);
  for (long j = 0; j <= 2 * half; ++j) times_[j] = s - W + j * dt;
  base_index_ = static_cast<int>(half);

  // Center flow: forward from s; backward via the monodromy restricted to the
  // center space, U₀(s-W,s) = basis·B^{-K}.
  if (d0 > 0) {
    const Eigen::MatrixXd MB = evolve_mesh(L_, basis_, s, s + T, m_, dt);
    const Eigen::MatrixXd B = coordinates_matrix(MB);
    Eigen::MatrixXd Binv_K = Eigen::MatrixXd::Identity(d0, d0);
    const Eigen::MatrixXd Binv = B.inverse();
    for (long k = 0; k < periods; ++k) Binv_K = Binv * Binv_K;
    auto back = evolve_mesh_path(L_, basis_ * Binv_K, s - W, s, m_, dt);
    auto fwd = evolve_mesh_path(L_, basis_, s, s + W, m_, dt);
    flow_.reserve(times_.size());
    for (long j = 0; j < half; ++j) flow_.push_back(std::move(back[j]));
    for (auto& X : fwd) flow_.push_back(std::move(X));
  } else {
    flow_.assign(times_.size(), Eigen::MatrixXd::Zero(N, 0));
  }
  flow_delayed_.resize(times_.size());
  for (std::size_t j = 0; j < times_.size(); ++j)
    for (double tau : L_.delays) flow_delayed_[j].push_back(mesh_interpolate(flow_[j], n, m_, L_.h, -tau));

  // Dense homogeneous frames used by K.
  std::vector<HistorySegment> c_init;
  for (int i = 0; i < d0; ++i) c_init.push_back(segment(split_.Phi0.col(i), L_.h, n, m_));
  const double s0 = s - W, s1 = s + W;
  Eigen::MatrixXd Hc_s = Eigen::MatrixXd::Zero(N, d0), Hc_e = Eigen::MatrixXd::Zero(N, d0);
  if (d0 > 0) {
    center_frame_ = integrate_linear(L_, c_init, s0, s1, dt);
    Hc_s = meshes_at(center_frame_, s, m_, static_cast<int>(N));
    Hc_e = meshes_at(center_frame_, s1, m_, static_cast<int>(N));
  }

  // Unstable frame, one period at a time with QR rescaling:
  // U(t,s-W)Q₀ = Y_j(t) R_{j-1}···R₀ on piece j.
  Eigen::MatrixXd Hu_s = Eigen::MatrixXd::Zero(N, dp), Hu_e = Eigen::MatrixXd::Zero(N, dp);
  if (dp > 0) {
    Eigen::MatrixXd Q = split_.Phiplus;
    for (long j = 0; j < 2 * periods; ++j) {
      std::vector<HistorySegment> init;
      for (int i = 0; i < dp; ++i) init.push_back(segment(Q.col(i), L_.h, n, m_));
      unstable_Q_.push_back(Q);
      unstable_pieces_.push_back(integrate_linear(L_, init, s0 + j * T, s0 + (j + 1) * T, dt));
      const Eigen::MatrixXd Y = meshes_at(unstable_pieces_.back(), s0 + (j + 1) * T, m_, static_cast<int>(N));
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
      Q = qr.householderQ() * Eigen::MatrixXd::Identity(N, dp);
      Eigen::MatrixXd R = qr.matrixQR().topRows(dp).triangularView<Eigen::Upper>();
      if (!(R.diagonal().cwiseAbs().minCoeff() > 1e-12 * R.diagonal().cwiseAbs().maxCoeff()))
        throw NumericalError("degenerate propagation: unstable frame lost rank");
      unstable_R_.push_back(std::move(R));
    }
    // c_{mid} = R_mid^{-1}···R_{J-1}^{-1} c_J.
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(dp, dp);
    for (long j = 2 * periods - 1; j >= periods; --j)
      S = unstable_R_[j].triangularView<Eigen::Upper>().solve(S);
    Hu_s = meshes_at(unstable_pieces_[periods], s, m_, static_cast<int>(N)) * S;
    Hu_e = Q;
  }

  correction_matrix_.resize(d0 + dp, d0 + dp);
  if (d0 + dp > 0) {
    correction_matrix_.topLeftCorner(d0, d0) = split_.W0.transpose() * Hc_s;
    correction_matrix_.topRightCorner(d0, dp) = split_.W0.transpose() * Hu_s;
    correction_matrix_.bottomLeftCorner(dp, d0) = split_.Wplus.transpose() * Hc_e;
    correction_matrix_.bottomRightCorner(dp, dp) = split_.Wplus.transpose() * Hu_e;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(correction_matrix_);
    const auto& sv = svd.singularValues();
    if (!(sv(sv.size() - 1) > 1e-12 * sv(0)))
      throw NumericalError("ill-conditioned center/unstable coordinate solve (condition " +
                           detail::format_double(sv(0) / sv(sv.size() - 1)) + ")");
  }
}

Eigen::MatrixXd PerronSolver::coordinates_matrix(const Eigen::MatrixXd& psi) const {
  return scale_.asDiagonal() * (split_.W0.transpose() * psi);
}

Eigen::VectorXd PerronSolver::coordinates(const Eigen::VectorXd& psi) const { return coordinates_matrix(psi); }

void PerronSolver::set_projector_bound(double N) {
  if (!(N > 0.0)) throw ConfigError("projector bound must be positive");
  par_.N = N;
}

double PerronSolver::local_projector_bound() const {
  return std::max({1.0, inf_norm(split_.P0), inf_norm(split_.Pminus + split_.Pplus)});
}

Eigen::VectorXd PerronSolver::center_flow(const Eigen::VectorXd& xi, int j) const { return flow_[j] * xi; }

DenseSolution PerronSolver::pseudo_inverse_K(const std::vector<Eigen::VectorXd>& forcing) const {
  const int J = grid_size() - 1;
  if (static_cast<int>(forcing.size()) != J + 1) throw DomainError("forcing must have one sample per grid time");
  if (J < 3) throw DomainError("window grid too short for forcing interpolation");
  const int n = L_.n, d0 = split_.d0(), dp = split_.dplus();
  const double t0 = times_.front(), dt = par_.dt, W = par_.window;

  auto f = [&](double t) -> Eigen::VectorXd {
    const double x = (t - t0) / dt;
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9) return forcing[std::clamp(static_cast<int>(r), 0, J)];
    const int i0 = std::clamp(static_cast<int>(std::floor(x)) - 1, 0, J - 3);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < 4; ++j) {
      double w = 1.0;
      for (int l = 0; l < 4; ++l)
        if (l != j) w *= (x - (i0 + l)) / (j - l);
      v += w * forcing[i0 + j];
    }
    return v;
  };
  // Particular solution from zero at s-W. With unstable directions it is
  // restarted every period with its unstable part moved into the piece
  // coefficients, so nothing grows across the window.
  const int pieces = static_cast<int>(unstable_pieces_.size());
  const int per_piece = pieces > 0 ? J / pieces : J;
  std::vector<DenseSolution> p;
  std::vector<Eigen::VectorXd> beta(std::max(pieces, 1));
  HistorySegment start = HistorySegment::zero(L_.h, n, m_, true);
  for (int j = 0; j < std::max(pieces, 1); ++j) {
    const double a = times_[j * per_piece], b = times_[(j + 1) * per_piece];
    if (j > 0) {
      start = p.back().history_at(a, 0, m_);
      const Eigen::VectorXd y = to_mesh(start);
      beta[j] = unstable_Q_[j].transpose() * (split_.Phiplus * (split_.Wplus.transpose() * y));
      start.axpy(-1.0, segment(unstable_Q_[j] * beta[j], L_.h, n, m_));
    }
    p.push_back(solve_inhomogeneous(L_, f, start, a, b, dt));
  }
  auto piece_of = [&](int k) { return std::min(k / per_piece, static_cast<int>(p.size()) - 1); };
  if (d0 + dp == 0) return std::move(p.front());

  // Unstable coefficients satisfy c_{j-1} = R_{j-1}^{-1}(c_j - beta_j); the
  // part independent of c_J shifts the center condition at s.
  const int mid = pieces / 2;
  auto backward = [&](const Eigen::VectorXd& cJ) {
    std::vector<Eigen::VectorXd> c(pieces + 1);
    c[pieces] = cJ;
    for (int j = pieces; j >= 1; --j) {
      Eigen::VectorXd r = c[j];
      if (j < pieces) r -= beta[j];
      c[j - 1] = unstable_R_[j - 1].triangularView<Eigen::Upper>().solve(r);
    }
    return c;
  };

  Eigen::VectorXd rhs(d0 + dp);
  Eigen::VectorXd ps = mesh_at(p[piece_of(base_index_)], s_, 0, m_);
  if (dp > 0) ps += unstable_Q_[mid] * backward(Eigen::VectorXd::Zero(dp))[mid];
  rhs.head(d0) = -split_.W0.transpose() * ps;
  if (dp > 0) rhs.tail(dp) = -split_.Wplus.transpose() * mesh_at(p.back(), s_ + W, 0, m_);
  const Eigen::VectorXd sol = correction_matrix_.fullPivLu().solve(rhs);
  const Eigen::VectorXd a0 = sol.head(d0);
  std::vector<Eigen::VectorXd> c;
  if (dp > 0) c = backward(sol.tail(dp));

  std::vector<Eigen::MatrixXd> x(J + 1), dx(J + 1);
  for (int k = 0; k <= J; ++k) {
    const int j = piece_of(k), local = k - j * per_piece;
    x[k] = p[j].node_state(local);
    dx[k] = p[j].node_derivative(local);
    if (d0 > 0) {
      x[k] += center_frame_.node_state(k) * a0;
      dx[k] += center_frame_.node_derivative(k) * a0;
    }
    if (dp > 0) {
      x[k] += unstable_pieces_[j].node_state(local) * c[j];
      dx[k] += unstable_pieces_[j].node_derivative(local) * c[j];
    }
  }
  HistorySegment init = p.front().initial()[0];
  for (int i = 0; i < d0; ++i) init.axpy(a0(i), center_frame_.initial()[i]);
  for (int i = 0; i < dp; ++i) init.axpy(c[0](i), unstable_pieces_[0].initial()[i]);
  return DenseSolution(t0, dt, {std::move(init)}, std::move(x), std::move(dx));
}

std::vector<Eigen::VectorXd> PerronSolver::meshes(const DenseSolution& v) const {
  std::vector<Eigen::VectorXd> out(times_.size());
  for (std::size_t j = 0; j < times_.size(); ++j) out[j] = mesh_at(v, times_[j], 0, m_);
  return out;
}

Eigen::VectorXd PerronSolver::modified(int j, const Eigen::VectorXd& mesh, const Eigen::MatrixXd& delayed) const {
  if (!G_) return Eigen::VectorXd::Zero(L_.n);
  const double f = cutoff_factor(split_, mesh, par_.N, par_.delta);
  if (f == 0.0) return Eigen::VectorXd::Zero(L_.n);
  return f * G_(times_[j], delayed);
}

double PerronSolver::weighted_norm(const DenseSolution& v) const {
  double out = 0.0;
  for (std::size_t j = 0; j < times_.size(); ++j)
    out = std::max(out, std::exp(-par_.eta * std::abs(times_[j] - s_)) * sup(mesh_at(v, times_[j], 0, m_)));
  return out;
}

FixedPointResult PerronSolver::solve(const Eigen::VectorXd& xi) const {
  const int d0 = split_.d0(), n = L_.n;
  if (xi.size() != d0) throw DomainError("chart coordinates must have d0 entries");
  const std::size_t J1 = times_.size(), nd = L_.delays.size();
  const Eigen::Index N = static_cast<Eigen::Index>(n) * (m_ + 1);

  FixedPointResult r;
  r.xi = xi;
  r.phi = basis_ * xi;
  std::vector<Eigen::VectorXd> u0(J1);
  std::vector<Eigen::MatrixXd> u0_delayed(J1, Eigen::MatrixXd(n, nd));
  for (std::size_t j = 0; j < J1; ++j) {
    u0[j] = flow_[j] * xi;
    for (std::size_t k = 0; k < nd; ++k) u0_delayed[j].col(k) = flow_delayed_[j][k] * xi;
  }
  std::vector<double> weight(J1);
  for (std::size_t j = 0; j < J1; ++j) weight[j] = std::exp(-par_.eta * std::abs(times_[j] - s_));

  std::vector<Eigen::VectorXd> vmesh(J1, Eigen::VectorXd::Zero(N));
  std::optional<DenseSolution> v;
  std::vector<Eigen::VectorXd> F(J1);
  const double floor = 10.0 * par_.tol_fp;
  for (int it = 1; it <= par_.max_iter; ++it) {
    for (std::size_t j = 0; j < J1; ++j) {
      Eigen::MatrixXd delayed = u0_delayed[j];
      if (v)
        for (std::size_t k = 0; k < nd; ++k) delayed.col(k) += v->state(times_[j] - L_.delays[k], 0);
      F[j] = modified(static_cast<int>(j), u0[j] + vmesh[j], delayed);
    }
    DenseSolution next = pseudo_inverse_K(F);
    auto next_mesh = meshes(next);
    double d = 0.0;
    for (std::size_t j = 0; j < J1; ++j) d = std::max(d, weight[j] * sup(next_mesh[j] - vmesh[j]));
    r.residual_history.push_back(d);
    v = std::move(next);
    vmesh = std::move(next_mesh);
    const auto& h = r.residual_history;
    if (h.size() >= 2 && h[h.size() - 2] > floor) {
      r.contraction_ratio = std::max(r.contraction_ratio, d / h[h.size() - 2]);
      if (r.contraction_ratio >= 1.0)
        throw ContractionError("fixed-point map does not contract (ratio " + detail::format_double(r.contraction_ratio) +
                                   "); reduce lp.delta",
                               r.contraction_ratio);
    }
    if (d <= par_.tol_fp) {
      r.iterations = it;
      r.residual = d;
      r.value = u0[base_index_] + vmesh[base_index_];
      r.correction = std::move(*v);
      return r;
    }
  }
  throw ConvergenceError("fixed-point iteration did not reach lp.tol_fp in " + std::to_string(par_.max_iter) +
                             " iterations",
                         r.residual_history);
}

Eigen::VectorXd PerronSolver::trajectory(const FixedPointResult& r, int j) const {
  return flow_[j] * r.xi + mesh_at(r.correction, times_[j], 0, m_);
}

std::vector<Eigen::VectorXd> chart_lattice(const Eigen::MatrixXd& basis, double r, int per_axis) {
  if (per_axis < 1) throw ConfigError("lp.lattice must be at least 1");
  if (!(r >= 0.0)) throw ConfigError("chart radius must be non-negative");
  const int d = static_cast<int>(basis.cols());
  std::vector<Eigen::VectorXd> out;
  if (d == 0) {
    out.emplace_back(0);
    return out;
  }
  auto coord = [&](int k) { return per_axis == 1 ? 0.0 : -r + 2.0 * r * k / (per_axis - 1); };
  std::vector<int> idx(d, 0);
  while (true) {
    Eigen::VectorXd xi(d);
    for (int i = 0; i < d; ++i) xi(i) = coord(idx[i]);
    if (sup(basis * xi) <= r * (1.0 + 1e-12)) out.push_back(xi);
    int i = d - 1;
    while (i >= 0 && ++idx[i] == per_axis) idx[i--] = 0;
    if (i < 0) break;
  }
  return out;
}

CenterChart center_map(const PerronSolver& solver, const std::vector<Eigen::VectorXd>& lattice,
                       const CycleSolution* cycle) {
  CenterChart chart;
  chart.base = solver.base();
  chart.d0 = solver.d0();
  chart.basis = solver.basis();
  chart.params = solver.params();
  chart.n = solver.dim();
  chart.m = solver.mesh_intervals();
  chart.h = solver.horizon();
  Eigen::VectorXd gamma;
  if (cycle) gamma = to_mesh(cycle->history(solver.base(), chart.m));
  for (const auto& xi : lattice) {
    FixedPointResult r;
    try {
      r = solver.solve(xi);
    } catch (const ContractionError& e) {
      throw ContractionError("at xi = " + xi_text(xi) + ": " + e.what(), e.ratio());
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("at xi = " + xi_text(xi) + ": " + e.what(), e.residual_history());
    }
    ChartPoint p;
    p.xi = xi;
    p.phi = r.phi;
    p.value = r.value;
    if (cycle && gamma.size() == r.value.size()) p.lifted = gamma + r.value;
    p.iterations = r.iterations;
    p.residual = r.residual;
    p.contraction_ratio = r.contraction_ratio;
    chart.contraction_ratio = std::max(chart.contraction_ratio, r.contraction_ratio);
    chart.points.push_back(std::move(p));
  }
  return chart;
}

std::string chart_to_csv(const CenterChart& chart) {
  std::ostringstream out;
  for (int i = 0; i < chart.d0; ++i) out << "xi_" << i << ',';
  out << "theta,comp,value\n";
  const double dth = chart.h / chart.m;
  for (const auto& p : chart.points) {
    std::string prefix;
    for (int i = 0; i < chart.d0; ++i) prefix += detail::format_double(p.xi(i)) + ',';
    for (int i = 0; i <= chart.m; ++i)
      for (int c = 0; c < chart.n; ++c)
        out << prefix << detail::format_double(-chart.h + i * dth) << ',' << c << ','
            << detail::format_double(p.value(static_cast<Eigen::Index>(i) * chart.n + c)) << '\n';
  }
  return out.str();
}

namespace {

double lipschitz(const std::vector<FixedPointResult>& rs) {
  double L = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i)
    for (std::size_t j = i + 1; j < rs.size(); ++j) {
      const double dphi = sup(rs[i].phi - rs[j].phi);
      if (dphi > 0.0) L = std::max(L, sup(rs[i].value - rs[j].value) / dphi);
    }
  return L;
}

}  // namespace

ValidationReport validate_chart(const CenterProblem& problem, const RHSSpec& rhs, const CycleSolution& cycle,
                                double s, const LPConfig& cfg, const ValidationOptions& opts) {
  ValidationReport rep;
  const double T = problem.L.period;
  const int Nt = std::max(1, opts.invariance_times);
  const int m = problem.m;
  auto fail_all = [&](const std::string& msg) {
    for (const char* k : {"tangency_slope", "invariance_residual", "periodicity_gap", "lipschitz_max",
                          "contraction_ratio"})
      rep.errors.emplace_back(k, msg);
  };

  std::unique_ptr<PerronSolver> base;
  try {
    base = std::make_unique<PerronSolver>(problem, s, cfg);
  } catch (const Error& e) {
    fail_all(e.what());
    return rep;
  }
  // Independent charts at s + kT/Nt; the last one is the periodicity chart.
  std::vector<std::unique_ptr<PerronSolver>> at(Nt + 1);
  std::vector<std::string> at_error(Nt + 1);
  for (int k = 1; k <= Nt; ++k) {
    try {
      at[k] = std::make_unique<PerronSolver>(problem, s + k * T / Nt, cfg);
    } catch (const Error& e) {
      at_error[k] = e.what();
    }
  }
  if (!(cfg.N > 0.0)) {
    double N = base->local_projector_bound();
    for (const auto& a : at)
      if (a) N = std::max(N, a->local_projector_bound());
    base->set_projector_bound(N);
    for (auto& a : at)
      if (a) a->set_projector_bound(N);
  }
  auto solver_at = [&](int k) -> const PerronSolver& {
    if (!at[k]) throw NumericalError("chart at base time index " + std::to_string(k) + ": " + at_error[k]);
    return *at[k];
  };

  double ratio = 0.0;
  bool any = false;
  auto solve = [&](const PerronSolver& sv, const Eigen::VectorXd& xi) {
    auto r = sv.solve(xi);
    ratio = std::max(ratio, r.contraction_ratio);
    any = true;
    return r;
  };
  const int d0 = base->d0();
  const double r_chart = std::min(cfg.r_chart, cfg.delta);
  const auto& P = base->split();

  try {
    if (d0 == 0) throw NumericalError("no center directions");
    const int np = std::max(2, opts.tangency_points);
    for (int i = 0; i < np; ++i) {
      const double eps = std::pow(10.0, -4.0 + 2.0 * i / (np - 1));
      Eigen::VectorXd xi = Eigen::VectorXd::Zero(d0);
      xi(0) = eps;
      const auto r = solve(*base, xi);
      rep.tangency_eps.push_back(eps);
      rep.tangency_residuals.push_back(sup(r.value - P.Phi0 * (P.W0.transpose() * r.value)));
    }
    const double worst = *std::max_element(rep.tangency_residuals.begin(), rep.tangency_residuals.end());
    if (worst <= 1e-12) {
      rep.tangency_exact = true;
    } else {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      int k = 0;
      for (std::size_t i = 0; i < rep.tangency_eps.size(); ++i) {
        if (!(rep.tangency_residuals[i] > 0.0)) continue;
        const double x = std::log(rep.tangency_eps[i]), y = std::log(rep.tangency_residuals[i]);
        sx += x, sy += y, sxx += x * x, sxy += x * y, ++k;
      }
      if (k < 2) throw NumericalError("too few nonzero tangency residuals for a slope");
      rep.tangency_slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    }
  } catch (const Error& e) {
    rep.errors.emplace_back("tangency_slope", e.what());
  }

  try {
    if (d0 == 0) throw NumericalError("no center directions");
    double worst = 0.0;
    for (double sign : {1.0, -1.0}) {
      Eigen::VectorXd xi = Eigen::VectorXd::Zero(d0);
      xi(0) = sign * opts.amplitude;
      const auto r = solve(*base, xi);
      const HistorySegment x0 = cycle.history(s, m) + segment(r.value, problem.L.h, problem.L.n, m);
      const auto sol = integrate_nonlinear(rhs, x0, s, s + T, base->params().dt);
      for (int k = 1; k <= Nt; ++k) {
        const double tk = s + k * T / Nt;
        const Eigen::VectorXd y = to_mesh(sol.history_at(tk, 0, m)) - to_mesh(cycle.history(tk, m));
        const auto& sv = solver_at(k);
        const auto rk = solve(sv, sv.coordinates(y));
        worst = std::max(worst, sup(y - rk.value));
      }
    }
    rep.invariance_residual = worst;
  } catch (const Error& e) {
    rep.errors.emplace_back("invariance_residual", e.what());
  }

  std::vector<FixedPointResult> base_chart;
  try {
    for (const auto& xi : chart_lattice(base->basis(), r_chart, cfg.lattice)) base_chart.push_back(solve(*base, xi));
  } catch (const Error& e) {
    rep.errors.emplace_back("periodicity_gap", e.what());
    rep.errors.emplace_back("lipschitz_max", e.what());
    base_chart.clear();
  }

  if (!base_chart.empty()) {
    try {
      const auto& sv = solver_at(Nt);
      double gap = 0.0;
      for (const auto& rb : base_chart) {
        const auto rT = solve(sv, sv.coordinates(rb.phi));
        gap = std::max(gap, sup(rT.value - rb.value));
      }
      rep.periodicity_gap = gap;
    } catch (const Error& e) {
      rep.errors.emplace_back("periodicity_gap", e.what());
    }

    try {
      double L = lipschitz(base_chart);
      for (int k = 1; k < Nt; ++k) {
        const auto& sv = solver_at(k);
        std::vector<FixedPointResult> chart;
        for (const auto& xi : chart_lattice(sv.basis(), r_chart, cfg.lattice)) chart.push_back(solve(sv, xi));
        L = std::max(L, lipschitz(chart));
      }
      rep.lipschitz_max = L;
    } catch (const Error& e) {
      rep.errors.emplace_back("lipschitz_max", e.what());
    }
  }

  if (any)
    rep.contraction_ratio = ratio;
  else
    rep.errors.emplace_back("contraction_ratio", "no fixed-point solve completed");
  return rep;
}

std::string validation_to_text(const ValidationReport& r) {
  std::ostringstream out;
  auto line = [&](const std::string& key, const std::optional<double>& v) {
    out << key << " = ";
    if (v) {
      out << detail::format_double(*v);
    } else if (key == "tangency_slope" && r.tangency_exact) {
      out << "exact";
    } else {
      std::string msg = "unavailable";
      for (const auto& [k, e] : r.errors)
        if (k == key) msg = e;
      out << "error: " << msg;
    }
    out << '\n';
  };
  line("tangency_slope", r.tangency_slope);
  line("invariance_residual", r.invariance_residual);
  line("periodicity_gap", r.periodicity_gap);
  line("lipschitz_max", r.lipschitz_max);
  line("contraction_ratio", r.contraction_ratio);
  return out.str();
}

}  // namespace pcm
