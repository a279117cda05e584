#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "pcm/bench_registry.hpp"
#include "pcm/cycle_finder.hpp"
#include "pcm/errors.hpp"
#include "pcm/floquet_spectral.hpp"

using namespace pcm;
using std::numbers::pi;

namespace {

Eigen::MatrixXd diag3() { return Eigen::Vector3d(2.0, 1.0, 0.5).asDiagonal(); }

LinearSpec zero_spec(int n, double T) {
  LinearSpec L;
  L.n = n;
  L.h = 1.0;
  L.delays = {0.0, 1.0};
  L.period = T;
  L.coefficients = [n](double) { return std::vector<Eigen::MatrixXd>(2, Eigen::MatrixXd::Zero(n, n)); };
  return L;
}

struct Linearized {
  CycleSolution cycle;
  Linearization lin;
};

const Linearized& linearized(const std::string& name) {
  static std::map<std::string, Linearized> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    const auto& p = get_problem(name);
    auto cyc = obtain_cycle(p, 64, p.settings.dt, 1e-10);
    auto lin = linearize_about_cycle(p.rhs, cyc);
    it = cache.emplace(name, Linearized{std::move(cyc), std::move(lin)}).first;
  }
  return it->second;
}

double max_abs(const Eigen::MatrixXd& A) { return A.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(FitStepTest, DividesLength) {
  EXPECT_DOUBLE_EQ(fit_step(1.0, 0.25), 0.25);
  const double s = fit_step(4.0204, 1.0 / 64);
  EXPECT_LE(s, 1.0 / 64);
  EXPECT_NEAR(4.0204 / s, std::round(4.0204 / s), 1e-9);
  EXPECT_THROW(fit_step(1.0, 0.0), DomainError);
  const double g = grid_step(4.0204, 8, 1.0 / 64);
  EXPECT_NEAR(4.0204 / 8 / g, std::round(4.0204 / 8 / g), 1e-9);
}

TEST(MonodromyTest, ZeroOperatorIsShiftToConstant) {
  for (int n : {1, 2}) {
    const int m = 16;
    auto M = build_monodromy(zero_spec(n, 1.5), 0.0, 1.5, m, 1.0 / 16);
    ASSERT_EQ(M.size(), n * (m + 1));
    // Each hat maps to the constant segment of its value at θ = 0.
    for (int j = 0; j < M.size(); ++j) {
      const int node = j / n, comp = j % n;
      for (int i = 0; i <= m; ++i)
        for (int c = 0; c < n; ++c)
          EXPECT_NEAR(M.matrix(i * n + c, j), (node == m && c == comp) ? 1.0 : 0.0, 1e-13);
    }
    auto spec = compute_floquet(M, 1e-2);
    EXPECT_EQ(spec.d_zero, n);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(std::abs(spec.multipliers[i] - 1.0), 0.0, 1e-12);
    for (std::size_t i = n; i < spec.multipliers.size(); ++i) EXPECT_LT(std::abs(spec.multipliers[i]), 1e-12);
  }
}

TEST(MonodromyTest, ScalarOdeDominantMultiplier) {
  const double a = -0.7;
  LinearSpec L;
  L.n = 1;
  L.h = 1.0;
  L.delays = {0.0};
  L.period = 1.0;
  L.coefficients = [a](double) { return std::vector<Eigen::MatrixXd>{Eigen::MatrixXd::Constant(1, 1, a)}; };
  auto spec = compute_floquet(build_monodromy(L, 0.0, 1.0, 32, 1.0 / 64), 1e-2);
  EXPECT_NEAR(spec.multipliers[0].real(), std::exp(a), 1e-8);
}

TEST(MonodromyTest, EvolutionComposes) {
  const auto& L = linearized("hutchinson").lin.L;
  const double dt = grid_step(L.period, 4, 1.0 / 64), t1 = L.period / 4, t2 = L.period / 2;
  const auto A = evolution_matrix(L, 0.3, 0.3 + t1, 32, dt);
  const auto B = evolution_matrix(L, 0.3 + t1, 0.3 + t2, 32, dt);
  const auto C = evolution_matrix(L, 0.3, 0.3 + t2, 32, dt);
  EXPECT_LE(max_abs(B * A - C), 1e-12 * max_abs(C));
}

TEST(FloquetTest, DiagonalCounts) {
  auto spec = compute_floquet(diag3(), 0.01);
  EXPECT_EQ(spec.d_plus, 1);
  EXPECT_EQ(spec.d_zero, 1);
  EXPECT_EQ(spec.d_minus, 1);
  EXPECT_EQ(spec.multipliers[0], std::complex<double>(2.0));
  EXPECT_THROW(compute_floquet(diag3(), 0.6), DomainError);
}

TEST(FloquetTest, BandEdges) {
  EXPECT_EQ(classify(1.0 + 0.005, 0.01), Stability::center);
  EXPECT_EQ(classify(std::polar(1.0 - 0.005, 1.0), 0.01), Stability::center);
  EXPECT_EQ(classify(1.02, 0.01), Stability::unstable);
  EXPECT_EQ(classify(-0.98, 0.01), Stability::stable);
}

TEST(FloquetTest, ConjugatesAdjacent) {
  Eigen::MatrixXd M(4, 4);
  M << 0.5, -0.6, 0, 0, 0.6, 0.5, 0, 0, 0, 0, 0.1, 0, 0, 0, 0, 0.9;
  auto spec = compute_floquet(M, 0.01);
  EXPECT_NEAR(std::abs(spec.multipliers[0]), 0.9, 1e-14);
  EXPECT_EQ(spec.multipliers[1], std::conj(spec.multipliers[2]));
}

TEST(FloquetTest, HopfMultipliers) {
  const auto& L = linearized("hopf_embed").lin.L;
  auto spec = compute_floquet(build_monodromy(L, 0.0, 2 * pi, 64, 2 * pi / 512), 1e-2);
  EXPECT_EQ(spec.d_zero, 1);
  EXPECT_EQ(spec.d_plus, 0);
  EXPECT_NEAR(std::abs(spec.multipliers[0] - 1.0), 0.0, 1e-6);
  EXPECT_NEAR(std::abs(spec.multipliers[1]) / std::exp(-4 * pi), 1.0, 0.05);
}

TEST(FloquetTest, PiHalfMultipliers) {
  const auto& L = linearized("linear_pi_half").lin.L;
  auto spec = compute_floquet(build_monodromy(L, 0.0, 4.0, 64, 1.0 / 64), 1e-2);
  int near_one = 0;
  for (auto l : spec.multipliers) {
    if (std::abs(l - 1.0) <= 1e-3)
      ++near_one;
    else
      EXPECT_LT(std::abs(l), 0.95);
  }
  EXPECT_EQ(near_one, 2);
  // Next multiplier against the characteristic-equation oracle.
  const auto ref = reference_values("linear_pi_half");
  EXPECT_NEAR(std::abs(spec.multipliers[2]), std::abs(ref.multipliers[2].value), 1e-5);
}

TEST(FloquetTest, HutchinsonTrivialMultiplier) {
  const auto& L = linearized("hutchinson").lin.L;
  auto spec = compute_floquet(build_monodromy(L, 0.0, L.period, 64, 1.0 / 64), 1e-2);
  EXPECT_NEAR(std::abs(spec.multipliers[0] - 1.0), 0.0, 5e-4);
}

TEST(FloquetTest, SpectrumIndependentOfBaseTime) {
  for (const std::string name : {"hutchinson", "linear_pi_half"}) {
    const auto& L = linearized(name).lin.L;
    const double dt = get_problem(name).settings.dt;
    auto a = compute_floquet(build_monodromy(L, 0.0, L.period, 64, dt), 1e-2);
    auto b = compute_floquet(build_monodromy(L, L.period / 3, L.period, 64, dt), 1e-2);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(a.multipliers[i]), std::abs(b.multipliers[i]), 1e-6) << name;
  }
}

TEST(SchurTest, DiagonalCenterProjector) {
  auto spec = compute_floquet(diag3(), 0.01);
  auto sp = projectors_schur(diag3(), spec);
  EXPECT_EQ(sp.P0, Eigen::Matrix3d(Eigen::Vector3d(0, 1, 0).asDiagonal()).eval());
  EXPECT_LE(max_abs(sp.Pplus - Eigen::Matrix3d(Eigen::Vector3d(1, 0, 0).asDiagonal())), 1e-15);
}

TEST(SchurTest, NonNormalProjectorAlgebra) {
  std::mt19937 rng(5);
  std::normal_distribution<double> N;
  Eigen::MatrixXd S(6, 6);
  for (int i = 0; i < 36; ++i) S(i / 6, i % 6) = N(rng);
  Eigen::VectorXd d(6);
  d << 1.5, 1.0, 0.7, 0.3, -0.2, 0.05;
  Eigen::MatrixXd M = S * d.asDiagonal() * S.inverse();
  auto sp = projectors_schur(M, compute_floquet(M, 0.05));
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(6, 6);
  for (const auto* P : {&sp.P0, &sp.Pplus, &sp.Pminus}) EXPECT_LE(max_abs(*P * *P - *P), 1e-10 * max_abs(*P));
  EXPECT_LE(max_abs(sp.P0 * sp.Pplus), 1e-10);
  EXPECT_LE(max_abs(sp.P0 * sp.Pminus), 1e-10);
  EXPECT_LE(max_abs(sp.P0 + sp.Pplus + sp.Pminus - I), 1e-12);
  EXPECT_LE(max_abs(M * sp.P0 - sp.P0 * M), 1e-10);
  EXPECT_LE(max_abs(sp.Phi0.transpose() * sp.Phi0 - Eigen::MatrixXd::Identity(1, 1)), 1e-14);
}

TEST(SchurTest, ComplexPairStaysTogether) {
  Eigen::MatrixXd M(3, 3);
  M << std::cos(1.0), -std::sin(1.0), 0.3, std::sin(1.0), std::cos(1.0), 0.2, 0, 0, 0.4;
  auto sp = projectors_schur(M, compute_floquet(M, 0.01));
  EXPECT_EQ(sp.d0(), 2);
  EXPECT_LE(max_abs(sp.P0 * sp.P0 - sp.P0), 1e-13);
  auto os = ordered_schur(M, 0.01, Stability::center);
  EXPECT_EQ(os.k, 2);
  EXPECT_LE(max_abs(os.Q * os.T * os.Q.transpose() - M), 1e-13);
}

TEST(SchurTest, TightClusterRaises) {
  Eigen::Matrix3d M = Eigen::Vector3d(1.0, 0.9895 + 5e-9, 0.9895 - 5e-9).asDiagonal();
  M(0, 2) = 0.1;
  auto spec = compute_floquet(M, 0.0105);
  try {
    projectors_schur(M, spec);
    FAIL() << "expected cluster error";
  } catch (const ClusterError& e) {
    EXPECT_LT(e.gap(), 1e-6);
  }
}

TEST(SchurTest, PiHalfRankTwo) {
  const auto& L = linearized("linear_pi_half").lin.L;
  auto sp = split_at(L, 0.0, 64, 1.0 / 64, 1e-2);
  EXPECT_EQ(sp.d0(), 2);
  EXPECT_EQ(sp.dplus(), 0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sp.P0);
  svd.setThreshold(1e-8);
  EXPECT_EQ(svd.rank(), 2);
}

TEST(DunfordTest, DiagonalAndConvergence) {
  const Eigen::Matrix3d ref = Eigen::Vector3d(0, 1, 0).asDiagonal();
  const auto P64 = projector_dunford(diag3(), 1.0, 0.25, 64);
  EXPECT_LE(norm2(P64 - ref), 1e-10);
  const double e32 = norm2(projector_dunford(diag3(), 1.0, 0.25, 32) - ref);
  const double e64 = norm2(P64 - ref);
  EXPECT_GE(e32 / std::max(e64, 1e-300), 10.0);
}

TEST(DunfordTest, ContourThroughEigenvalueRaises) {
  EXPECT_THROW(projector_dunford(diag3(), 1.0, 0.5, 64), NumericalError);
}

TEST(DunfordTest, AgreesWithSchurOnHopf) {
  const auto& L = linearized("hopf_embed").lin.L;
  auto M = build_monodromy(L, 0.0, 2 * pi, 64, 2 * pi / 512);
  auto sp = projectors_schur(M.matrix, compute_floquet(M, 1e-2));
  EXPECT_LE(norm2(projector_dunford(M.matrix, 1.0, 0.5, 64) - sp.P0), 1e-6);
}

TEST(FiberTest, TrivialDirectionOnHopf) {
  const auto& d = linearized("hopf_embed");
  FloquetSpectrum spec;
  auto sp = split_at(d.lin.L, 0.0, 64, 2 * pi / 512, 1e-2, &spec);
  const Eigen::VectorXd gdot = to_mesh(d.cycle.velocity_history(0.0, 64));
  EXPECT_LE(max_principal_angle(sp.Phi0, gdot), 1e-4);
}

TEST(FiberTest, PeriodicityAndCommutation) {
  for (const std::string name : {"hopf_embed", "linear_pi_half", "hutchinson", "shift_only"}) {
    const auto& L = linearized(name).lin.L;
    const double T = L.period;
    const int Nt = 8, m = 64;
    const double dt = grid_step(T, Nt, get_problem(name).settings.dt);
    FloquetSpectrum spec;
    auto sp = split_at(L, 0.0, m, dt, 1e-2, &spec);
    auto fb = propagate_fiber_bases(L, 0.0, T, Nt, spec, sp, m, dt);
    ASSERT_EQ(fb.times.size(), 9u);
    EXPECT_LE(max_principal_angle(fb.Phi0.front(), fb.Phi0.back()), 1e-6) << name;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(sp.P0.rows(), sp.P0.cols());
    for (int k = 0; k <= Nt; ++k) {
      const auto& s = fb.splits[k];
      EXPECT_LE(max_abs(s.P0 * s.P0 - s.P0), 1e-8) << name;
      EXPECT_LE(max_abs(s.P0 * s.Pminus), 1e-8) << name;
      EXPECT_LE(max_abs(s.P0 + s.Pplus + s.Pminus - I), 1e-9) << name;
      EXPECT_EQ(s.d0(), sp.d0());
      // Propagated and direct center spaces agree.
      EXPECT_LE(max_principal_angle(fb.Phi0[k], s.Phi0), 1e-6) << name << " k=" << k;
    }
    for (int k = 1; k <= 4; ++k) {
      const auto U = evolution_matrix(L, 0.0, fb.times[k], m, dt);
      const double rel = norm2(U * sp.P0 - fb.splits[k].P0 * U) / norm2(U);
      EXPECT_LE(rel, 1e-6) << name << " k=" << k;
    }
  }
}

TEST(FiberTest, CoordinateTransitions) {
  const auto& L = linearized("hutchinson").lin.L;
  const double dt = grid_step(L.period, 4, 1.0 / 64);
  FloquetSpectrum spec;
  auto sp = split_at(L, 0.0, 32, dt, 1e-2, &spec);
  auto fb = propagate_fiber_bases(L, 0.0, L.period, 4, spec, sp, 32, dt);
  for (int k = 1; k <= 4; ++k) {
    const auto U = evolution_matrix(L, fb.times[k - 1], fb.times[k], 32, dt);
    EXPECT_LE(max_abs(U * fb.Phi0[k - 1] - fb.Phi0[k] * fb.C0[k]), 1e-12);
  }
  EXPECT_EQ(&fb.split_near(L.period / 4 + 1e-3), &fb.splits[1]);
  EXPECT_EQ(&fb.split_near(L.period), &fb.splits[0]);
}

TEST(TrichotomyTest, Examples) {
  auto spec = compute_floquet(diag3(), 0.01);
  auto r = estimate_trichotomy(spec, 1.0, 0.0);
  EXPECT_NEAR(r.a, std::log(0.5), 1e-15);
  EXPECT_NEAR(r.b, std::log(2.0), 1e-15);
  EXPECT_FALSE(r.b_default);

  const auto& L = linearized("hopf_embed").lin.L;
  auto hs = compute_floquet(build_monodromy(L, 0.0, 2 * pi, 64, 2 * pi / 512), 1e-2);
  auto h = estimate_trichotomy(hs, 2 * pi);
  EXPECT_NEAR(h.a, -1.0, 1e-4);
  EXPECT_TRUE(h.b_default);
  EXPECT_EQ(h.b, -h.a);
}

TEST(TrichotomyTest, NoStableMultipliersRaises) {
  auto spec = compute_floquet(Eigen::Matrix2d::Identity().eval(), 0.01);
  EXPECT_THROW(estimate_trichotomy(spec, 1.0), DomainError);
}

TEST(TrichotomyTest, DecayConstantBounded) {
  for (const std::string name : {"linear_pi_half", "hutchinson"}) {
    const auto& L = linearized(name).lin.L;
    auto M = build_monodromy(L, 0.0, L.period, 64, get_problem(name).settings.dt);
    auto spec = compute_floquet(M, 1e-2);
    auto sp = projectors_schur(M.matrix, spec);
    auto r = estimate_trichotomy(spec, L.period, 0.0);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> U(-1, 1);
    Eigen::MatrixXd psi(M.size(), 5);
    for (Eigen::Index i = 0; i < psi.size(); ++i) psi(i) = U(rng);
    psi = sp.Pminus * psi;
    EXPECT_LE(fit_decay_constant(M.matrix, psi, r.a, L.period, 3), 10.0) << name;
  }
}

TEST(WritersTest, FloquetCsvAndMatrixText) {
  auto spec = compute_floquet(diag3(), 0.01);
  EXPECT_EQ(floquet_to_csv(spec), "re,im,modulus,class\n2,0,2,unstable\n1,0,1,center\n0.5,0,0.5,stable\n");
  Eigen::Matrix2d A;
  A << 1, 0.5, -2, 0;
  EXPECT_EQ(matrix_to_text(A, 0.25), "2 2 0.25\n1 0.5\n-2 0\n");
}
