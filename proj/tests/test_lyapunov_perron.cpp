#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <memory>
#include <random>

#include "pcm/bench_registry.hpp"
#include "pcm/errors.hpp"
#include "pcm/lyapunov_perron.hpp"

using namespace pcm;

namespace {

struct Setup {
  const BenchmarkProblem* p = nullptr;
  CycleSolution cycle;
  CenterProblem problem;
  LPConfig cfg;
};

const Setup& setup(const std::string& name) {
  static std::map<std::string, Setup> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    Setup s;
    s.p = &get_problem(name);
    s.cycle = obtain_cycle(*s.p, 64, s.p->settings.dt, 1e-10);
    auto lin = linearize_about_cycle(s.p->rhs, s.cycle);
    s.problem = CenterProblem{lin.L, lin.G, 64};
    s.cfg.dt = s.p->settings.dt;
    s.cfg.delta = s.p->settings.delta;
    s.cfg.rho_tol = s.p->settings.rho_tol;
    s.cfg.tol_fp = s.p->settings.tol_fp;
    it = cache.emplace(name, std::move(s)).first;
  }
  return it->second;
}

const PerronSolver& solver(const std::string& name) {
  static std::map<std::string, std::unique_ptr<PerronSolver>> cache;
  auto& slot = cache[name];
  if (!slot) {
    const auto& s = setup(name);
    slot = std::make_unique<PerronSolver>(s.problem, 0.0, s.cfg);
  }
  return *slot;
}

double sup(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

Eigen::VectorXd unit(int d, double amp) {
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(d);
  xi(0) = amp;
  return xi;
}

// Lagrange interpolation of grid samples, matching the forcing model of K.
Forcing interpolated(const PerronSolver& S, const std::vector<Eigen::VectorXd>& F) {
  return [&S, &F](double t) -> Eigen::VectorXd {
    const int J = S.grid_size() - 1;
    const double x = (t - S.grid_time(0)) / S.params().dt, r = std::round(x);
    if (std::abs(x - r) <= 1e-9) return F[std::clamp(static_cast<int>(r), 0, J)];
    const int i0 = std::clamp(static_cast<int>(std::floor(x)) - 1, 0, J - 3);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(F[0].size());
    for (int j = 0; j < 4; ++j) {
      double w = 1.0;
      for (int l = 0; l < 4; ++l)
        if (l != j) w *= (x - (i0 + l)) / (j - l);
      out += w * F[i0 + j];
    }
    return out;
  };
}

std::vector<Eigen::VectorXd> random_forcing(const PerronSolver& S, int n, std::mt19937& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXd A(n), B(n);
  for (int i = 0; i < n; ++i) A(i) = g(rng), B(i) = g(rng);
  const double w1 = 0.5 + std::abs(g(rng)), w2 = 0.1 + 0.3 * std::abs(g(rng));
  std::vector<Eigen::VectorXd> F(S.grid_size());
  for (int j = 0; j < S.grid_size(); ++j) {
    const double t = S.grid_time(j);
    F[j] = A * std::sin(w1 * t) + B * std::cos(w2 * t + 0.3);
  }
  return F;
}

// ẋ = diag(0.3, 0, −1)x: one unstable, one center, one stable direction.
CenterProblem saddle_problem() {
  CenterProblem p;
  p.L.n = 3;
  p.L.h = 1.0;
  p.L.delays = {0.0};
  p.L.period = 1.0;
  p.L.coefficients = [](double) {
    return std::vector<Eigen::MatrixXd>{Eigen::Vector3d(0.3, 0.0, -1.0).asDiagonal().toDenseMatrix()};
  };
  p.m = 8;
  return p;
}

}  // namespace

TEST(CutoffTest, Values) {
  EXPECT_EQ(cutoff_value(0.0), 1.0);
  EXPECT_EQ(cutoff_value(0.5), 1.0);
  EXPECT_EQ(cutoff_value(1.0), 1.0);
  EXPECT_DOUBLE_EQ(cutoff_value(1.5), 0.5);
  EXPECT_EQ(cutoff_value(2.0), 0.0);
  EXPECT_EQ(cutoff_value(3.0), 0.0);
  EXPECT_THROW(cutoff_value(-0.1), DomainError);
}

TEST(CutoffTest, MonotoneAndFlatAtEnds) {
  double prev = 1.0;
  for (int i = 1; i <= 100; ++i) {
    const double v = cutoff_value(1.0 + i / 100.0);
    EXPECT_LE(v, prev);
    prev = v;
  }
  const double e = 1e-4;
  EXPECT_NEAR((1.0 - cutoff_value(1.0 + e)) / e, 0.0, 1e-6);
  EXPECT_NEAR(cutoff_value(2.0 - e) / e, 0.0, 1e-6);
}

TEST(LPConfigTest, DefaultsAndAdmissibility) {
  TrichotomyRates r;
  r.a = -1.0;
  r.b = 2.0;
  LPConfig cfg;
  cfg.dt = 0.01;
  const auto p = resolve_lp_config(cfg, r, 2.0);
  EXPECT_DOUBLE_EQ(p.eta, 0.5);
  EXPECT_GE(p.window, std::log(1e10));
  EXPECT_NEAR(p.window / 2.0, std::round(p.window / 2.0), 1e-12);

  cfg.eta = 1.0;
  EXPECT_THROW(resolve_lp_config(cfg, r, 2.0), ConfigError);
  cfg.eta = -0.1;
  EXPECT_THROW(resolve_lp_config(cfg, r, 2.0), ConfigError);
  cfg.eta = 0.0;
  cfg.window = 5.0;
  EXPECT_THROW(resolve_lp_config(cfg, r, 2.0), ConfigError);
  cfg.window = 0.0;
  cfg.delta = 0.0;
  EXPECT_THROW(resolve_lp_config(cfg, r, 2.0), ConfigError);
}

TEST(LPConfigTest, EtaMessageNamesInterval) {
  TrichotomyRates r;
  r.a = -0.5;
  r.b = 0.5;
  LPConfig cfg;
  cfg.dt = 0.01;
  cfg.eta = 0.7;
  try {
    resolve_lp_config(cfg, r, 1.0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("min{-a,b}"), std::string::npos);
  }
}

TEST(ModifyTest, SmallInputUnmodified) {
  const auto& s = setup("hopf_embed");
  const auto& S = solver("hopf_embed");
  const double N = S.params().N, delta = S.params().delta;
  const Eigen::VectorXd mesh = S.basis().col(0) * (0.5 * delta / N) + Eigen::VectorXd::Constant(S.basis().rows(), 1e-4);
  const auto u = with_fd_derivs(from_mesh(mesh, s.problem.L.h, 2, 64));
  const auto out = modify_nonlinearity(s.problem.G, s.problem.L.delays, S.split(), N, delta, 0.3, u);
  const Eigen::VectorXd expect = s.problem.G(0.3, delayed_values(u, s.problem.L.delays));
  EXPECT_LE(sup(out - expect), 1e-15);
  EXPECT_GT(sup(expect), 0.0);
}

TEST(ModifyTest, LargeCenterComponentCutOff) {
  const auto& s = setup("hopf_embed");
  const auto& S = solver("hopf_embed");
  const double N = S.params().N, delta = S.params().delta;
  const auto u = with_fd_derivs(from_mesh(S.basis().col(0) * (2.5 * N * delta), s.problem.L.h, 2, 64));
  EXPECT_EQ(sup(modify_nonlinearity(s.problem.G, s.problem.L.delays, S.split(), N, delta, 0.0, u)), 0.0);
}

TEST(ModifyTest, ZeroRemainder) {
  const auto& s = setup("hopf_embed");
  const auto& S = solver("hopf_embed");
  const auto u = with_fd_derivs(from_mesh(S.basis().col(0) * 0.01, s.problem.L.h, 2, 64));
  EXPECT_EQ(sup(modify_nonlinearity(Remainder{}, s.problem.L.delays, S.split(), 1.0, 0.05, 0.0, u)), 0.0);
}

TEST(PseudoInverseTest, ZeroForcingGivesZero) {
  const auto& S = solver("linear_pi_half");
  const std::vector<Eigen::VectorXd> F(S.grid_size(), Eigen::VectorXd::Zero(1));
  const auto v = S.pseudo_inverse_K(F);
  EXPECT_EQ(S.weighted_norm(v), 0.0);
}

TEST(PseudoInverseTest, ContractOnPiHalf) {
  const auto& s = setup("linear_pi_half");
  const auto& S = solver("linear_pi_half");
  ASSERT_EQ(S.d0(), 2);
  ASSERT_EQ(S.dplus(), 0);
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const auto F = random_forcing(S, 1, rng);
    const auto v = S.pseudo_inverse_K(F);
    const Eigen::VectorXd vs = to_mesh(v.history_at(0.0, 0, 64));
    double vmax = 0.0;
    for (int j = 0; j < S.grid_size(); ++j) vmax = std::max(vmax, sup(v.state(S.grid_time(j), 0)));
    EXPECT_LE(sup(S.split().P0 * vs), 1e-9 * vmax);

    const int J = S.grid_size() - 1;
    const auto y =
        solve_inhomogeneous(s.problem.L, interpolated(S, F), v.initial()[0], S.grid_time(0), S.grid_time(J), S.params().dt);
    double res = 0.0;
    for (int j = 0; j <= J; ++j) res = std::max(res, sup(y.state(S.grid_time(j), 0) - v.state(S.grid_time(j), 0)));
    EXPECT_LE(res, 1e-7);
  }
}

TEST(PseudoInverseTest, UnstableCorrection) {
  LPConfig cfg;
  cfg.dt = 1.0 / 16;
  cfg.eps_trunc = 1e-4;
  const auto problem = saddle_problem();
  PerronSolver S(problem, 0.0, cfg);
  ASSERT_EQ(S.d0(), 1);
  ASSERT_EQ(S.dplus(), 1);
  std::mt19937 rng(5);
  const auto F = random_forcing(S, 3, rng);
  const auto v = S.pseudo_inverse_K(F);
  const double W = S.params().window;
  const Eigen::VectorXd vs = to_mesh(v.history_at(0.0, 0, problem.m));
  const Eigen::VectorXd ve = to_mesh(v.history_at(W, 0, problem.m));
  EXPECT_LE(sup(S.split().P0 * vs), 1e-9);
  EXPECT_LE(sup(S.split().Pplus * ve), 1e-9);

  // The unstable component stays bounded: no e^{0.3·2W} blow-up.
  double vmax = 0.0;
  for (int j = 0; j < S.grid_size(); ++j) vmax = std::max(vmax, sup(v.state(S.grid_time(j), 0)));
  EXPECT_LE(vmax, 20.0);

  // Re-integrate one period at a time from v's own history.
  const auto f = interpolated(S, F);
  const int per = static_cast<int>(std::lround(problem.L.period / S.params().dt));
  double res = 0.0;
  for (int j0 = 0; j0 + per < S.grid_size(); j0 += per) {
    const double a = S.grid_time(j0), b = S.grid_time(j0 + per);
    const auto y = solve_inhomogeneous(problem.L, f, v.history_at(a), a, b, S.params().dt);
    for (int k = 0; k <= per; ++k) res = std::max(res, sup(y.state(S.grid_time(j0 + k), 0) - v.state(S.grid_time(j0 + k), 0)));
  }
  EXPECT_LE(res, 1e-7);
}

TEST(FixedPointTest, ZeroRemainderIsIdentity) {
  const auto& s = setup("hopf_embed");
  CenterProblem linear = s.problem;
  linear.G = Remainder{};
  PerronSolver S(linear, 0.0, s.cfg);
  for (double amp : {0.01, 0.05, -0.03}) {
    const auto r = S.solve(unit(S.d0(), amp));
    EXPECT_EQ(r.iterations, 1);
    EXPECT_LE(r.residual, 1e-12);
    EXPECT_LE(sup(r.value - r.phi), 1e-12);
  }
}

TEST(FixedPointTest, ZeroCoordinatesGiveZero) {
  const auto& S = solver("hopf_embed");
  const auto r = S.solve(Eigen::VectorXd::Zero(S.d0()));
  EXPECT_LE(sup(r.value), S.params().tol_fp);
}

TEST(FixedPointTest, CenterComponentIsPhi) {
  for (const std::string name : {"hopf_embed", "linear_pi_half"}) {
    const auto& S = solver(name);
    const auto r = S.solve(Eigen::VectorXd::Constant(S.d0(), 0.02));
    EXPECT_LE(sup(S.split().P0 * (r.value - r.phi)), S.params().tol_fp * (1.0 + sup(r.phi))) << name;
  }
}

TEST(FixedPointTest, ContractionAtDefaultDeltaAndMonotone) {
  const auto& s = setup("hopf_embed");
  double prev = 1.0;
  for (double f : {1.0, 0.5, 0.25}) {
    LPConfig cfg = s.cfg;
    cfg.delta = s.cfg.delta * f;
    PerronSolver S(s.problem, 0.0, cfg);
    const auto r = S.solve(unit(S.d0(), cfg.delta));
    if (f == 1.0) {
      EXPECT_LE(r.contraction_ratio, 0.5);
    }
    EXPECT_LE(r.contraction_ratio, prev);
    EXPECT_GT(r.contraction_ratio, 0.0);
    prev = r.contraction_ratio;
  }
}

TEST(FixedPointTest, NonContractionRaises) {
  const auto& s = setup("hopf_embed");
  LPConfig cfg = s.cfg;
  cfg.delta = 50.0;
  PerronSolver S(s.problem, 0.0, cfg);
  EXPECT_THROW(S.solve(unit(S.d0(), 20.0)), NumericalError);
}

TEST(FixedPointTest, IterationCapRaises) {
  const auto& s = setup("hopf_embed");
  LPConfig cfg = s.cfg;
  cfg.max_iter = 2;
  PerronSolver S(s.problem, 0.0, cfg);
  try {
    S.solve(unit(S.d0(), 0.04));
    FAIL();
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.residual_history().size(), 2u);
  }
}

TEST(FixedPointTest, TrajectoryAtBaseIsValue) {
  const auto& S = solver("hopf_embed");
  const auto r = S.solve(unit(S.d0(), 0.03));
  EXPECT_LE(sup(S.trajectory(r, S.base_index()) - r.value), 1e-15);
  EXPECT_DOUBLE_EQ(S.grid_time(S.base_index()), 0.0);
}

TEST(FixedPointTest, WindowConvergence) {
  const auto& s = setup("hopf_embed");
  const auto& S = solver("hopf_embed");
  LPConfig cfg = s.cfg;
  cfg.window = 2.0 * S.params().window;
  PerronSolver S2(s.problem, 0.0, cfg);
  const auto xi = unit(S.d0(), 0.03);
  const double gap = std::min(-S.params().a, S.params().b);
  EXPECT_LE(sup(S.solve(xi).value - S2.solve(xi).value), 10.0 * std::exp(-gap * S.params().window));
}

TEST(FixedPointTest, StepHalvingConsistency) {
  const auto& s = setup("hopf_embed");
  LPConfig cfg = s.cfg;
  cfg.dt = 0.5 * s.cfg.dt;
  const auto& S = solver("hopf_embed");
  PerronSolver S2(s.problem, 0.0, cfg);
  const auto xi = unit(S.d0(), 0.03);
  EXPECT_LE(sup(S.solve(xi).value - S2.solve(xi).value), 1e-4);
}

TEST(ChartTest, LatticeWithinRadius) {
  Eigen::MatrixXd basis(3, 2);
  basis << 1, 0, 0, 1, 1, 1;
  const auto pts = chart_lattice(basis, 0.1, 3);
  for (const auto& xi : pts) EXPECT_LE(sup(basis * xi), 0.1 + 1e-14);
  EXPECT_EQ(pts.size(), 7u);
  EXPECT_THROW(chart_lattice(basis, 0.1, 0), ConfigError);
}

TEST(ChartTest, HopfPointsLieOnOrbitCylinder) {
  const auto& s = setup("hopf_embed");
  const auto& S = solver("hopf_embed");
  const auto chart = center_map(S, chart_lattice(S.basis(), 0.05, 5), &s.cycle);
  ASSERT_EQ(chart.points.size(), 5u);
  EXPECT_EQ(chart.n, 2);
  EXPECT_EQ(chart.m, 64);
  const double T = s.cycle.period();
  for (const auto& pt : chart.points) {
    double best = 1e300;
    for (int k = 0; k < 4096; ++k)
      best = std::min(best, sup(to_mesh(s.cycle.history(k * T / 4096, 64)) - pt.lifted));
    EXPECT_LE(best, 5e-3);
  }
  EXPECT_LE(chart.contraction_ratio, 0.5);
}

TEST(ChartTest, ZeroRemainderChartIsCenterSpace) {
  const auto& s = setup("linear_pi_half");
  CenterProblem linear = s.problem;
  linear.G = Remainder{};
  PerronSolver S(linear, 0.0, s.cfg);
  const auto chart = center_map(S, chart_lattice(S.basis(), 0.02, 3));
  for (const auto& pt : chart.points) EXPECT_LE(sup(pt.value - pt.phi), s.cfg.tol_fp);
  EXPECT_TRUE(chart.points.front().lifted.size() == 0);
}

TEST(ChartTest, CsvLayout) {
  CenterChart chart;
  chart.n = 1;
  chart.m = 1;
  chart.h = 1.0;
  chart.d0 = 1;
  ChartPoint p;
  p.xi = Eigen::VectorXd::Constant(1, 0.5);
  p.value = Eigen::Vector2d(0.25, -1.0);
  chart.points.push_back(p);
  EXPECT_EQ(chart_to_csv(chart), "xi_0,theta,comp,value\n0.5,-1,0,0.25\n0.5,0,0,-1\n");
}

TEST(ValidateTest, HopfMetrics) {
  const auto& s = setup("hopf_embed");
  const auto rep = validate_chart(s.problem, s.p->rhs, s.cycle, 0.0, s.cfg);
  EXPECT_TRUE(rep.errors.empty());
  ASSERT_TRUE(rep.tangency_slope);
  EXPECT_GE(*rep.tangency_slope, 1.9);
  ASSERT_TRUE(rep.invariance_residual);
  EXPECT_LE(*rep.invariance_residual, 1e-3);
  ASSERT_TRUE(rep.periodicity_gap);
  EXPECT_LE(*rep.periodicity_gap, 10.0 * s.cfg.tol_fp);
  ASSERT_TRUE(rep.lipschitz_max);
  EXPECT_LT(*rep.lipschitz_max, 2.0);
  ASSERT_TRUE(rep.contraction_ratio);
  EXPECT_LE(*rep.contraction_ratio, 0.5);
  const auto text = validation_to_text(rep);
  EXPECT_EQ(text.rfind("tangency_slope = ", 0), 0u);
  EXPECT_NE(text.find("contraction_ratio = "), std::string::npos);
}

TEST(ValidateTest, ZeroRemainderTangencyExact) {
  const auto& s = setup("hopf_embed");
  CenterProblem linear = s.problem;
  linear.G = Remainder{};
  ValidationOptions opts;
  opts.invariance_times = 1;
  const auto rep = validate_chart(linear, s.p->rhs, s.cycle, 0.0, s.cfg, opts);
  EXPECT_TRUE(rep.tangency_exact);
  EXPECT_FALSE(rep.tangency_slope);
  EXPECT_NE(validation_to_text(rep).find("tangency_slope = exact"), std::string::npos);
}

TEST(ValidateTest, ErrorsReportedPerMetric) {
  const auto& s = setup("hopf_embed");
  LPConfig cfg = s.cfg;
  cfg.delta = -1.0;
  const auto rep = validate_chart(s.problem, s.p->rhs, s.cycle, 0.0, cfg);
  EXPECT_EQ(rep.errors.size(), 5u);
  EXPECT_FALSE(rep.contraction_ratio);
  EXPECT_NE(validation_to_text(rep).find("periodicity_gap = error: "), std::string::npos);
}
