#include "pcm/floquet_spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "csv_util.hpp"
#include "pcm/errors.hpp"

namespace pcm {

double fit_step(double length, double dt) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  if (length <= 0.0) return dt;
  const double k = std::ceil(length / dt - 1e-9);
  return length / std::max(1.0, k);
}

double grid_step(double T, int N_t, double dt) {
  if (N_t < 1) throw DomainError("fiber grid needs N_t >= 1");
  return fit_step(T / N_t, dt);
}

Eigen::MatrixXd mesh_interpolate(const Eigen::MatrixXd& Y, int n, int m, double h, double theta) {
  if (m < 3) throw DomainError("cubic mesh interpolation needs m >= 3");
  const double x = (theta + h) / (h / m);
  const double r = std::round(x);
  auto node = [&](int i) { return Y.middleRows(static_cast<Eigen::Index>(i) * n, n); };
  if (std::abs(x - r) <= 1e-9) return node(std::clamp(static_cast<int>(r), 0, m));
  const int i0 = std::clamp(static_cast<int>(std::floor(x)) - 1, 0, m - 3);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, Y.cols());
  for (int j = 0; j < 4; ++j) {
    double w = 1.0;
    for (int l = 0; l < 4; ++l)
      if (l != j) w *= (x - (i0 + l)) / (j - l);
    v += w * node(i0 + j);
  }
  return v;
}

namespace {

// One-step map on mesh states. Delayed values come from cubic Lagrange
// interpolation of the current mesh only, so evolving over [s,t] and then
// [t,u] is exactly the product of the two maps.
class MeshStepper {
 public:
  MeshStepper(const LinearSpec& L, int m, double dt) : L_(L), m_(m), dt_(dt), dth_(L.h / m) {
    if (m < 3) throw DomainError("mesh stepping needs m >= 3");
    if (!(dt > 0.0) || dt > L.min_positive_delay() * (1 + 1e-9))
      throw DomainError("step must be positive and at most the smallest positive delay");
  }

  // Y is n(m+1) x C; returns the state one step later.
  Eigen::MatrixXd step(double t, const Eigen::MatrixXd& Y) const {
    const int n = L_.n;
    const Eigen::Index C = Y.cols();
    const Eigen::MatrixXd y0 = node(Y, m_);
    static constexpr double c[5] = {0.0, 0.5, 0.5, 1.0, 1.0};
    Eigen::MatrixXd k[5];
    Eigen::MatrixXd stage = y0;
    // Stages 0..3 are RK4; stage 4 is the slope at the new point, used by
    // the Hermite extension inside the step.
    for (int q = 0; q < 5; ++q) {
      const double tc = t + c[q] * dt_;
      const auto A = L_.coefficients(tc);
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, C);
      for (std::size_t d = 0; d < L_.delays.size(); ++d) {
        if (L_.delays[d] == 0.0)
          acc.noalias() += A[d] * stage;
        else
          acc.noalias() += A[d] * mesh_interpolate(Y, n, m_, L_.h, c[q] * dt_ - L_.delays[d]);
      }
      k[q] = std::move(acc);
      if (q < 2) stage = y0 + 0.5 * dt_ * k[q];
      if (q == 2) stage = y0 + dt_ * k[q];
      if (q == 3) stage = y0 + dt_ / 6.0 * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3]);
    }
    const Eigen::MatrixXd& y1 = stage;

    Eigen::MatrixXd out(Y.rows(), C);
    for (int i = 0; i <= m_; ++i) {
      const double u = dt_ - L_.h + i * dth_;
      auto rows = out.middleRows(static_cast<Eigen::Index>(i) * n, n);
      if (u <= 1e-9 * dth_) {
        rows = mesh_interpolate(Y, n, m_, L_.h, std::min(u, 0.0));
      } else if (std::abs(u - dt_) <= 1e-9 * dth_) {
        rows = y1;
      } else {
        const double r = u / dt_, r2 = r * r, r3 = r2 * r;
        rows = (2 * r3 - 3 * r2 + 1) * y0 + (r3 - 2 * r2 + r) * dt_ * k[0] + (3 * r2 - 2 * r3) * y1 +
               (r3 - r2) * dt_ * k[4];
      }
    }
    return out;
  }

 private:
  Eigen::MatrixXd node(const Eigen::MatrixXd& Y, int i) const {
    return Y.middleRows(static_cast<Eigen::Index>(i) * L_.n, L_.n);
  }

  const LinearSpec& L_;
  int m_;
  double dt_, dth_;
};

}  // namespace

Eigen::MatrixXd evolve_mesh(const LinearSpec& L, const Eigen::MatrixXd& Y, double s, double t, int m,
                            double dt) {
  if (Y.rows() != L.n * (m + 1)) throw DomainError("mesh state has the wrong length");
  if (t < s) throw DomainError("evolution requires t >= s");
  if (t == s) return Y;
  const double step = fit_step(t - s, dt);
  const long K = std::lround((t - s) / step);
  const MeshStepper stepper(L, m, step);
  Eigen::MatrixXd X = Y;
  for (long j = 0; j < K; ++j) X = stepper.step(s + j * step, X);
  return X;
}

std::vector<Eigen::MatrixXd> evolve_mesh_path(const LinearSpec& L, const Eigen::MatrixXd& Y, double s,
                                              double t, int m, double dt) {
  if (Y.rows() != L.n * (m + 1)) throw DomainError("mesh state has the wrong length");
  if (t < s) throw DomainError("evolution requires t >= s");
  std::vector<Eigen::MatrixXd> path{Y};
  if (t == s) return path;
  const double step = fit_step(t - s, dt);
  const long K = std::lround((t - s) / step);
  const MeshStepper stepper(L, m, step);
  path.reserve(K + 1);
  for (long j = 0; j < K; ++j) path.push_back(stepper.step(s + j * step, path.back()));
  return path;
}

Eigen::MatrixXd evolution_matrix(const LinearSpec& L, double s, double t, int m, double dt) {
  const int N = L.n * (m + 1);
  return evolve_mesh(L, Eigen::MatrixXd::Identity(N, N), s, t, m, dt);
}

MonodromyMatrix build_monodromy(const LinearSpec& L, double s, double T, int m, double dt) {
  MonodromyMatrix M;
  M.base = s;
  M.period = T;
  M.n = L.n;
  M.m = m;
  M.h = L.h;
  M.dt = fit_step(T, dt);
  M.matrix = evolution_matrix(L, s, s + T, m, dt);
  return M;
}

std::string to_string(Stability s) {
  switch (s) {
    case Stability::stable:
      return "stable";
    case Stability::center:
      return "center";
    default:
      return "unstable";
  }
}

Stability classify(std::complex<double> lambda, double rho_tol) {
  const double r = std::abs(lambda);
  if (r > 1.0 + rho_tol) return Stability::unstable;
  if (std::abs(r - 1.0) <= rho_tol) return Stability::center;
  return Stability::stable;
}

FloquetSpectrum compute_floquet(const Eigen::MatrixXd& M, double rho_tol) {
  if (!(rho_tol > 0.0 && rho_tol < 0.5)) throw DomainError("rho_tol must lie in (0, 0.5)");
  if (!M.allFinite()) throw NumericalError("monodromy matrix has non-finite entries");
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
  std::vector<std::complex<double>> ev(es.eigenvalues().begin(), es.eigenvalues().end());
  std::stable_sort(ev.begin(), ev.end(), [](auto x, auto y) {
    if (std::abs(x) != std::abs(y)) return std::abs(x) > std::abs(y);
    return x.imag() > y.imag();
  });
  // Keep each conjugate right after its partner.
  for (std::size_t i = 0; i + 1 < ev.size(); ++i) {
    if (ev[i].imag() <= 0.0) continue;
    std::size_t best = i + 1;
    for (std::size_t j = i + 1; j < ev.size(); ++j)
      if (std::abs(ev[j] - std::conj(ev[i])) < std::abs(ev[best] - std::conj(ev[i]))) best = j;
    if (best != i + 1) std::rotate(ev.begin() + i + 1, ev.begin() + best, ev.begin() + best + 1);
    ++i;
  }
  FloquetSpectrum spec;
  spec.rho_tol = rho_tol;
  spec.multipliers = ev;
  for (auto l : ev) {
    const auto c = classify(l, rho_tol);
    spec.classes.push_back(c);
    if (c == Stability::stable) ++spec.d_minus;
    if (c == Stability::center) ++spec.d_zero;
    if (c == Stability::unstable) ++spec.d_plus;
  }
  return spec;
}

namespace {

std::vector<std::complex<double>> block_eigenvalues(const Eigen::MatrixXd& T, int i, int size) {
  if (size == 1) return {T(i, i)};
  const double a = T(i, i), b = T(i, i + 1), c = T(i + 1, i), d = T(i + 1, i + 1);
  const double tr = 0.5 * (a + d);
  const std::complex<double> disc = std::sqrt(std::complex<double>(0.25 * (a - d) * (a - d) + b * c));
  return {tr + disc, tr - disc};
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

// Solves A X − X B = C for small A (p×p), B (q×q).
Eigen::MatrixXd small_sylvester(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& C) {
  const Eigen::Index p = A.rows(), q = B.rows();
  const Eigen::MatrixXd K =
      kron(Eigen::MatrixXd::Identity(q, q), A) - kron(B.transpose(), Eigen::MatrixXd::Identity(p, p));
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible()) throw NumericalError("Sylvester equation is singular (clusters overlap)");
  const Eigen::VectorXd x = lu.solve(Eigen::Map<const Eigen::VectorXd>(C.data(), C.size()));
  return Eigen::Map<const Eigen::MatrixXd>(x.data(), p, q);
}

// Swaps the adjacent diagonal blocks starting at i (sizes p then q).
void swap_blocks(Eigen::MatrixXd& T, Eigen::MatrixXd& Q, int i, int p, int q) {
  const Eigen::MatrixXd X =
      small_sylvester(T.block(i, i, p, p), T.block(i + p, i + p, q, q), T.block(i, i + p, p, q));
  // Columns of [−X; I] span the invariant subspace of the second block.
  Eigen::MatrixXd Z(p + q, q);
  Z.topRows(p) = -X;
  Z.bottomRows(q).setIdentity();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z);
  const Eigen::MatrixXd Qs = qr.householderQ();
  T.middleCols(i, p + q) = T.middleCols(i, p + q) * Qs;
  T.middleRows(i, p + q) = Qs.transpose() * T.middleRows(i, p + q);
  Q.middleCols(i, p + q) = Q.middleCols(i, p + q) * Qs;
  T.block(i + q, i, p, q).setZero();
}

}  // namespace

OrderedSchur ordered_schur(const Eigen::MatrixXd& M, double rho_tol, Stability which) {
  Eigen::RealSchur<Eigen::MatrixXd> rs(M);
  if (rs.info() != Eigen::Success) throw NumericalError("real Schur decomposition failed");
  OrderedSchur out;
  out.T = rs.matrixT();
  out.Q = rs.matrixU();
  const int N = static_cast<int>(M.rows());
  std::vector<char> selected;
  for (int i = 0; i < N;) {
    const int size = (i + 1 < N && out.T(i + 1, i) != 0.0) ? 2 : 1;
    out.blocks.push_back(size);
    selected.push_back(classify(block_eigenvalues(out.T, i, size)[0], rho_tol) == which);
    i += size;
  }
  // Bubble each selected block to the front, preserving relative order.
  int placed = 0;
  for (std::size_t b = 0; b < out.blocks.size(); ++b) {
    if (!selected[b]) continue;
    for (std::size_t j = b; j > static_cast<std::size_t>(placed); --j) {
      int offset = 0;
      for (std::size_t l = 0; l + 1 < j; ++l) offset += out.blocks[l];
      swap_blocks(out.T, out.Q, offset, out.blocks[j - 1], out.blocks[j]);
      std::swap(out.blocks[j - 1], out.blocks[j]);
      std::swap(selected[j - 1], selected[j]);
    }
    ++placed;
  }
  for (int b = 0; b < placed; ++b) out.k += out.blocks[b];
  return out;
}

namespace {

struct InvariantPair {
  Eigen::MatrixXd V, W;
  double gap = std::numeric_limits<double>::infinity();
};

// Right basis V (orthonormal) and left data W with WᵀV = I for the leading
// cluster of an ordered Schur form; P = V Wᵀ.
InvariantPair invariant_pair(const OrderedSchur& os) {
  const int N = static_cast<int>(os.T.rows());
  const int k = os.k;
  InvariantPair out;
  out.V = os.Q.leftCols(k);
  if (k == 0) {
    out.W = Eigen::MatrixXd::Zero(N, 0);
    return out;
  }
  if (k == N) {
    out.W = out.V;
    return out;
  }
  const Eigen::MatrixXd T11 = os.T.topLeftCorner(k, k);
  // R solves T11 R − R T22 = T12, column block by column block of T22.
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(k, N - k);
  std::vector<std::complex<double>> cluster;
  int b = 0;
  for (int i = 0; i < k; i += os.blocks[b++]) {
    auto ev = block_eigenvalues(os.T, i, os.blocks[b]);
    cluster.insert(cluster.end(), ev.begin(), ev.end());
  }
  for (int j = 0; j < N - k; j += os.blocks[b++]) {
    const int size = os.blocks[b];
    const int col = k + j;
    for (auto mu : block_eigenvalues(os.T, col, size))
      for (auto lam : cluster)
        out.gap = std::min(out.gap, std::abs(lam - mu) / std::max(std::abs(lam), std::abs(mu)));
    Eigen::MatrixXd rhs = os.T.block(0, col, k, size);
    if (j > 0) rhs += R.leftCols(j) * os.T.block(k, col, j, size);
    R.middleCols(j, size) = small_sylvester(T11, os.T.block(col, col, size, size), rhs);
  }
  out.W = out.V + os.Q.rightCols(N - k) * R.transpose();
  return out;
}

}  // namespace

SpectralSplit projectors_schur(const Eigen::MatrixXd& M, const FloquetSpectrum& spec, double min_gap) {
  const int N = static_cast<int>(M.rows());
  SpectralSplit out;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
  out.gap = std::numeric_limits<double>::infinity();
  auto build = [&](Stability which, int expected, Eigen::MatrixXd& P, Eigen::MatrixXd& Phi,
                   Eigen::MatrixXd& W) {
    if (expected == 0) {
      P = Eigen::MatrixXd::Zero(N, N);
      Phi = Eigen::MatrixXd::Zero(N, 0);
      W = Eigen::MatrixXd::Zero(N, 0);
      return;
    }
    const auto os = ordered_schur(M, spec.rho_tol, which);
    if (os.k != expected)
      throw NumericalError("Schur and eigenvalue classifications disagree for the " +
                           to_string(which) + " cluster");
    auto pair = invariant_pair(os);
    out.gap = std::min(out.gap, pair.gap);
    if (pair.gap < min_gap)
      throw ClusterError("the " + to_string(which) + " cluster is too close to the rest of the spectrum (gap " +
                             detail::format_double(pair.gap) + ")",
                         pair.gap);
    Phi = pair.V;
    W = pair.W;
    P = Phi * W.transpose();
  };
  build(Stability::center, spec.d_zero, out.P0, out.Phi0, out.W0);
  build(Stability::unstable, spec.d_plus, out.Pplus, out.Phiplus, out.Wplus);
  out.Pminus = I - out.P0 - out.Pplus;
  return out;
}

Eigen::MatrixXd projector_dunford(const Eigen::MatrixXd& M, std::complex<double> z0, double r,
                                  int n_quad) {
  if (!(r > 0.0) || n_quad < 1) throw DomainError("contour needs r > 0 and n_quad >= 1");
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
  for (auto l : es.eigenvalues())
    if (std::abs(std::abs(l - z0) - r) < 1e-8)
      throw NumericalError("contour passes through the spectrum");
  using CMat = Eigen::MatrixXcd;
  const Eigen::Index N = M.rows();
  const CMat Mc = M.cast<std::complex<double>>();
  CMat sum = CMat::Zero(N, N);
  for (int k = 0; k < n_quad; ++k) {
    const std::complex<double> e = std::polar(1.0, 2 * std::numbers::pi * k / n_quad);
    const std::complex<double> z = z0 + r * e;
    Eigen::PartialPivLU<CMat> lu(z * CMat::Identity(N, N) - Mc);
    if (lu.rcond() < 1e-14) throw NumericalError("resolvent is near-singular on the contour");
    sum += (r * e) * lu.inverse();
  }
  return (sum / static_cast<double>(n_quad)).real();
}

SpectralSplit split_at(const LinearSpec& L, double s, int m, double dt, double rho_tol,
                       FloquetSpectrum* spectrum_out) {
  const auto M = build_monodromy(L, s, L.period, m, dt);
  const auto spec = compute_floquet(M, rho_tol);
  auto split = projectors_schur(M.matrix, spec);
  split.base = s;
  if (spectrum_out) *spectrum_out = spec;
  return split;
}

namespace {

double inf_norm(const Eigen::MatrixXd& A) { return A.cwiseAbs().rowwise().sum().maxCoeff(); }

// Orthonormal Q with Y = Q C; throws on rank loss.
void orthonormalize(const Eigen::MatrixXd& Y, Eigen::MatrixXd& Q, Eigen::MatrixXd& C) {
  const Eigen::Index d = Y.cols();
  if (d == 0) {
    Q = Y;
    C = Eigen::MatrixXd::Zero(0, 0);
    return;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
  Q = qr.householderQ() * Eigen::MatrixXd::Identity(Y.rows(), d);
  C = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
  const double big = C.diagonal().cwiseAbs().maxCoeff();
  if (!(C.diagonal().cwiseAbs().minCoeff() > 1e-12 * big))
    throw NumericalError("degenerate propagation: fiber basis lost rank");
}

}  // namespace

FiberBundleData propagate_fiber_bases(const LinearSpec& L, double s, double T, int N_t,
                                      const FloquetSpectrum& spectrum, const SpectralSplit& split,
                                      int m, double dt) {
  if (N_t < 1) throw DomainError("fiber grid needs N_t >= 1");
  FiberBundleData fb;
  fb.base = s;
  fb.period = T;
  fb.n = L.n;
  fb.m = m;
  fb.h = L.h;
  // Common step so every grid time is a step boundary.
  dt = grid_step(T, N_t, dt);
  fb.dt = dt;
  fb.spectrum = spectrum;
  for (int k = 0; k <= N_t; ++k) fb.times.push_back(s + k * T / N_t);
  fb.Phi0.push_back(split.Phi0);
  fb.Phiplus.push_back(split.Phiplus);
  fb.C0.push_back(Eigen::MatrixXd::Identity(split.d0(), split.d0()));
  fb.Cplus.push_back(Eigen::MatrixXd::Identity(split.dplus(), split.dplus()));
  fb.splits.push_back(split);
  for (int k = 1; k <= N_t; ++k) {
    Eigen::MatrixXd Q, C;
    orthonormalize(evolve_mesh(L, fb.Phi0.back(), fb.times[k - 1], fb.times[k], m, dt), Q, C);
    fb.Phi0.push_back(Q);
    fb.C0.push_back(C);
    orthonormalize(evolve_mesh(L, fb.Phiplus.back(), fb.times[k - 1], fb.times[k], m, dt), Q, C);
    fb.Phiplus.push_back(Q);
    fb.Cplus.push_back(C);
    auto sk = split_at(L, fb.times[k], m, dt, spectrum.rho_tol);
    if (sk.d0() != split.d0() || sk.dplus() != split.dplus())
      throw NumericalError("fiber dimensions change along the period grid");
    fb.splits.push_back(std::move(sk));
  }
  fb.projector_bound = 1.0;
  for (const auto& sp : fb.splits)
    fb.projector_bound = std::max({fb.projector_bound, inf_norm(sp.P0), inf_norm(sp.Pminus + sp.Pplus)});
  return fb;
}

const SpectralSplit& FiberBundleData::split_near(double t) const {
  const int N_t = static_cast<int>(times.size()) - 1;
  const double step = period / N_t;
  long k = std::lround((t - base) / step) % N_t;
  if (k < 0) k += N_t;
  return splits[k];
}

double max_principal_angle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.cols() != B.cols()) throw DomainError("principal angles need subspaces of equal dimension");
  if (A.cols() == 0) return 0.0;
  Eigen::HouseholderQR<Eigen::MatrixXd> qa(A), qb(B);
  const Eigen::MatrixXd Qa = qa.householderQ() * Eigen::MatrixXd::Identity(A.rows(), A.cols());
  const Eigen::MatrixXd Qb = qb.householderQ() * Eigen::MatrixXd::Identity(B.rows(), B.cols());
  const Eigen::MatrixXd D = Qa - Qb * (Qb.transpose() * Qa);
  return std::asin(std::min(1.0, norm2(D)));
}

double norm2(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues()(0);
}

TrichotomyRates estimate_trichotomy(const FloquetSpectrum& spec, double T, double margin) {
  if (!(margin >= 0.0 && margin < 1.0)) throw DomainError("margin must lie in [0,1)");
  if (!(T > 0.0)) throw DomainError("period must be positive");
  if (spec.d_minus == 0) throw DomainError("no stable multipliers: trichotomy rate a is undefined");
  double max_stable = 0.0;
  double min_unstable = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.multipliers.size(); ++i) {
    const double r = std::abs(spec.multipliers[i]);
    if (spec.classes[i] == Stability::stable) max_stable = std::max(max_stable, r);
    if (spec.classes[i] == Stability::unstable) min_unstable = std::min(min_unstable, r);
  }
  if (max_stable >= 1.0) throw NumericalError("stable multiplier with modulus >= 1: inconsistent classification");
  TrichotomyRates out;
  out.margin = margin;
  out.a = (1.0 - margin) * std::log(std::max(max_stable, kMultiplierFloor)) / T;
  if (spec.d_plus > 0) {
    out.b = (1.0 - margin) * std::log(min_unstable) / T;
  } else {
    out.b = -out.a;
    out.b_default = true;
  }
  return out;
}

double fit_decay_constant(const Eigen::MatrixXd& M, const Eigen::MatrixXd& psi, double a, double T,
                          int k_max) {
  double K = 0.0;
  for (Eigen::Index j = 0; j < psi.cols(); ++j) {
    const double n0 = mesh_sup_norm(psi.col(j));
    if (n0 == 0.0) continue;
    Eigen::VectorXd v = psi.col(j);
    for (int k = 1; k <= k_max; ++k) {
      v = M * v;
      K = std::max(K, mesh_sup_norm(v) / (std::exp(a * k * T) * n0));
    }
  }
  return K;
}

std::string floquet_to_csv(const FloquetSpectrum& spec) {
  std::ostringstream out;
  out << "re,im,modulus,class\n";
  for (std::size_t i = 0; i < spec.multipliers.size(); ++i) {
    const auto l = spec.multipliers[i];
    out << detail::format_double(l.real()) << ',' << detail::format_double(l.imag()) << ','
        << detail::format_double(std::abs(l)) << ',' << to_string(spec.classes[i]) << '\n';
  }
  return out.str();
}

std::string matrix_to_text(const Eigen::MatrixXd& A, double base_time) {
  std::ostringstream out;
  out << A.rows() << ' ' << A.cols() << ' ' << detail::format_double(base_time) << '\n';
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (j) out << ' ';
      out << detail::format_double(A(i, j));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace pcm
