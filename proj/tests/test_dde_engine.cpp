#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pcm/dde_engine.hpp"
#include "pcm/errors.hpp"

using namespace pcm;
using std::numbers::pi;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

RHSSpec negative_feedback() {
  RHSSpec r;
  r.n = 1;
  r.h = 1.0;
  r.delays = {0.0, 1.0};
  r.f = [](double, const Eigen::MatrixXd& d) { return Eigen::VectorXd(-d.col(1)); };
  return r;
}

LinearSpec pi_half() {
  LinearSpec L;
  L.n = 1;
  L.h = 1.0;
  L.delays = {0.0, 1.0};
  L.period = 4.0;
  L.coefficients = [](double) {
    return std::vector<Eigen::MatrixXd>{Eigen::MatrixXd::Zero(1, 1),
                                        Eigen::MatrixXd::Constant(1, 1, -pi / 2)};
  };
  return L;
}

LinearSpec zero_linear(int n = 1, double T = 1.0) {
  LinearSpec L;
  L.n = n;
  L.h = 1.0;
  L.delays = {0.0, 1.0};
  L.period = T;
  L.coefficients = [n](double) {
    return std::vector<Eigen::MatrixXd>{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  };
  return L;
}

HistorySegment cos_history(int m) {
  return HistorySegment::sample(
      1.0, 1, m, [](double t) { return v1(std::cos(pi * t / 2)); },
      [](double t) { return v1(-pi / 2 * std::sin(pi * t / 2)); });
}

HistorySegment smooth_history(int m, double a, double b) {
  return HistorySegment::sample(
      1.0, 1, m, [=](double t) { return v1(a * std::sin(2 * t + b) + 0.3); },
      [=](double t) { return v1(2 * a * std::cos(2 * t + b)); });
}

}  // namespace

TEST(IntegrateNonlinearTest, MethodOfStepsByHand) {
  auto phi = HistorySegment::constant(1.0, 16, v1(1.0));
  auto sol = integrate_nonlinear(negative_feedback(), phi, 0.0, 2.0, 1.0 / 64);
  EXPECT_NEAR(sol.state(1.0)(0), 0.0, 1e-10);
  EXPECT_NEAR(sol.state(2.0)(0), -0.5, 1e-10);
  EXPECT_NEAR(sol.state(1.5)(0), 1.5 * 1.5 / 2 - 3 + 1.5, 1e-10);
  auto hist = sol.history_at(2.0);
  EXPECT_NEAR(hist.values()(0, 0), 0.0, 1e-10);
}

TEST(IntegrateNonlinearTest, ZeroVectorFieldFreezes) {
  RHSSpec r;
  r.n = 2;
  r.h = 1.0;
  r.delays = {0.0};
  r.f = [](double, const Eigen::MatrixXd&) { return Eigen::VectorXd::Zero(2); };
  auto phi = HistorySegment::sample(1.0, 2, 8, [](double t) {
    Eigen::VectorXd v(2);
    v << std::sin(t) + 2, t * t;
    return v;
  });
  auto sol = integrate_nonlinear(r, phi, 0.0, 3.0, 0.1);
  for (double t : {0.5, 1.7, 3.0}) EXPECT_LT((sol.state(t) - phi.values().row(8).transpose()).norm(), 1e-15);
}

TEST(IntegrateNonlinearTest, CosineSolution) {
  RHSSpec r = negative_feedback();
  r.f = [](double, const Eigen::MatrixXd& d) { return Eigen::VectorXd(-pi / 2 * d.col(1)); };
  auto sol = integrate_nonlinear(r, cos_history(64), 0.0, 4.0, 1.0 / 64);
  EXPECT_NEAR(sol.state(4.0)(0), 1.0, 1e-8);
}

TEST(IntegrateNonlinearTest, PreconditionsChecked) {
  auto phi = HistorySegment::constant(1.0, 8, v1(1.0));
  EXPECT_THROW(integrate_nonlinear(negative_feedback(), phi, 0.0, 2.0, 1.5), DomainError);
  EXPECT_THROW(integrate_nonlinear(negative_feedback(), phi, 0.0, 2.0, 0.3), DomainError);
}

TEST(IntegrateNonlinearTest, BlowupReportsTime) {
  RHSSpec r;
  r.n = 1;
  r.h = 1.0;
  r.delays = {0.0};
  r.f = [](double, const Eigen::MatrixXd& d) { return Eigen::VectorXd(d.col(0).array().square()); };
  auto phi = HistorySegment::constant(1.0, 8, v1(1.0));
  try {
    integrate_nonlinear(r, phi, 0.0, 2.0, 1e-3);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NEAR(e.blowup_time(), 1.0, 0.01);
    EXPECT_NE(std::string(e.what()).find("t = "), std::string::npos);
  }
}

TEST(IntegrateNonlinearTest, NonFiniteRhs) {
  RHSSpec r = negative_feedback();
  r.f = [](double t, const Eigen::MatrixXd&) { return v1(t > 0.5 ? std::nan("") : 0.0); };
  EXPECT_THROW(integrate_nonlinear(r, HistorySegment::constant(1.0, 8, v1(1.0)), 0.0, 1.0, 0.125),
               RhsError);
}

TEST(IntegrateNonlinearTest, Deterministic) {
  RHSSpec r = negative_feedback();
  r.f = [](double, const Eigen::MatrixXd& d) { return Eigen::VectorXd(-1.6 * d.col(1).array() * (1 + d.col(0).array())); };
  auto a = integrate_nonlinear(r, smooth_history(32, 0.2, 0.1), 0.0, 20.0, 1.0 / 32);
  auto b = integrate_nonlinear(r, smooth_history(32, 0.2, 0.1), 0.0, 20.0, 1.0 / 32);
  EXPECT_EQ(trajectory_to_csv(a), trajectory_to_csv(b));
}

TEST(HistoryAtTest, InitialAtStart) {
  auto phi = smooth_history(20, 0.7, 0.4);
  auto sol = integrate_nonlinear(negative_feedback(), phi, 0.0, 1.0, 0.05);
  auto h0 = sol.history_at(0.0);
  EXPECT_LE((h0.values() - phi.values()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(h0.has_derivs());
  EXPECT_THROW(sol.history_at(1.5), DomainError);
  EXPECT_THROW(sol.history_at(-0.5), DomainError);
}

TEST(HistoryAtTest, ConstantSolution) {
  RHSSpec r = negative_feedback();
  r.f = [](double, const Eigen::MatrixXd&) { return v1(0.0); };
  auto sol = integrate_nonlinear(r, HistorySegment::constant(1.0, 8, v1(3.0)), 0.0, 2.5, 0.25);
  auto h = sol.history_at(2.5);
  EXPECT_LT((h.values().array() - 3.0).abs().maxCoeff(), 1e-15);
}

TEST(ApplyEvolutionTest, IdentityAtStart) {
  auto phi = smooth_history(16, 1.0, 0.0);
  auto out = apply_evolution(pi_half(), phi, 0.3, 0.3, 1.0 / 64);
  EXPECT_EQ(out.values(), phi.values());
}

TEST(ApplyEvolutionTest, ShiftSemigroupFreezes) {
  auto phi = smooth_history(16, 1.0, 0.5);
  auto out = apply_evolution(zero_linear(), phi, 0.0, 1.25, 1.0 / 16);
  EXPECT_LT((out.values().array() - phi.values()(16, 0)).abs().maxCoeff(), 1e-15);
}

TEST(ApplyEvolutionTest, Composition) {
  auto L = pi_half();
  auto phi = smooth_history(64, 1.0, 0.2);
  const double dt = 1.0 / 64;
  auto direct = apply_evolution(L, phi, 0.0, 3.0, dt);
  auto mid = apply_evolution(L, phi, 0.0, 1.25, dt);
  auto composed = apply_evolution(L, mid, 1.25, 3.0, dt);
  EXPECT_LT((direct.values() - composed.values()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ApplyEvolutionTest, Linearity) {
  auto L = pi_half();
  auto phi = smooth_history(32, 1.0, 0.2);
  auto psi = smooth_history(32, -0.4, 1.3);
  const double a = 2.5, b = -0.75;
  auto lhs = apply_evolution(L, a * phi + b * psi, 0.0, 2.5, 1.0 / 32);
  auto rhs = a * apply_evolution(L, phi, 0.0, 2.5, 1.0 / 32) + b * apply_evolution(L, psi, 0.0, 2.5, 1.0 / 32);
  EXPECT_LE((lhs.values() - rhs.values()).cwiseAbs().maxCoeff(), 1e-10 * lhs.sup_norm());
}

TEST(ApplyEvolutionTest, BatchMatchesSingle) {
  auto L = pi_half();
  std::vector<HistorySegment> phis{smooth_history(16, 1.0, 0.2), smooth_history(16, 0.3, 2.0)};
  auto batch = apply_evolution(L, phis, 0.0, 2.0, 1.0 / 16);
  for (int i = 0; i < 2; ++i) {
    auto single = apply_evolution(L, phis[i], 0.0, 2.0, 1.0 / 16);
    EXPECT_EQ(batch[i].values(), single.values());
  }
}

TEST(ApplyEvolutionTest, StepHalvingOrder) {
  auto L = pi_half();
  auto phi = cos_history(64);
  std::vector<double> err;
  for (int k : {8, 16, 32}) {
    auto sol = integrate_linear(L, std::span<const HistorySegment>(&phi, 1), 0.0, 4.0, 1.0 / k);
    err.push_back(std::abs(sol.state(4.0)(0) - 1.0));
  }
  EXPECT_GE(std::log2(err[0] / err[1]), 3.5);
  EXPECT_GE(std::log2(err[1] / err[2]), 3.5);
}

TEST(SolveInhomogeneousTest, ZeroData) {
  auto w = [](double) { return v1(0.0); };
  auto sol = solve_inhomogeneous(pi_half(), w, HistorySegment::zero(1.0, 1, 8), 0.0, 3.0, 0.125);
  for (int k = 0; k <= sol.steps(); ++k) EXPECT_EQ(sol.node_state(k)(0, 0), 0.0);
}

TEST(SolveInhomogeneousTest, ConstantForcingQuadrature) {
  auto w = [](double) { return v1(0.7); };
  auto sol = solve_inhomogeneous(zero_linear(), w, HistorySegment::zero(1.0, 1, 8), 1.0, 4.0, 0.25);
  for (double t : {1.3, 2.0, 4.0}) EXPECT_NEAR(sol.state(t)(0), 0.7 * (t - 1.0), 1e-14);
}

TEST(SolveInhomogeneousTest, RelaxationOde) {
  LinearSpec L = zero_linear();
  L.coefficients = [](double) {
    return std::vector<Eigen::MatrixXd>{Eigen::MatrixXd::Constant(1, 1, -1.0), Eigen::MatrixXd::Zero(1, 1)};
  };
  auto w = [](double) { return v1(1.0); };
  auto sol = solve_inhomogeneous(L, w, HistorySegment::zero(1.0, 1, 8), 0.5, 3.5, 0.01);
  for (int k = 0; k <= sol.steps(); k += 7)
    EXPECT_NEAR(sol.node_state(k)(0, 0), 1 - std::exp(-(sol.time(k) - 0.5)), 1e-9);
}

TEST(SolveInhomogeneousTest, Superposition) {
  auto L = pi_half();
  auto w = [](double t) { return v1(std::sin(3 * t) + 0.2); };
  auto psi = smooth_history(32, 0.5, 0.1);
  const double dt = 1.0 / 32;
  auto full = solve_inhomogeneous(L, w, psi, 0.0, 3.0, dt);
  auto part = solve_inhomogeneous(L, w, HistorySegment::zero(1.0, 1, 32, true), 0.0, 3.0, dt);
  auto hom = integrate_linear(L, std::span<const HistorySegment>(&psi, 1), 0.0, 3.0, dt);
  for (int k = 0; k <= full.steps(); ++k)
    EXPECT_NEAR(full.node_state(k)(0, 0), part.node_state(k)(0, 0) + hom.node_state(k)(0, 0), 1e-10);
}

TEST(LinearSpecTest, PeriodicityDefect) {
  LinearSpec L = zero_linear(1, 2.0);
  L.coefficients = [](double t) {
    return std::vector<Eigen::MatrixXd>{Eigen::MatrixXd::Constant(1, 1, std::cos(pi * t)),
                                        Eigen::MatrixXd::Zero(1, 1)};
  };
  EXPECT_LT(periodicity_defect(L, 50), 1e-12);
  L.period = 1.5;
  EXPECT_GT(periodicity_defect(L, 50), 0.1);
}

TEST(DenseSolutionTest, CsvLayout) {
  auto sol = integrate_nonlinear(negative_feedback(), HistorySegment::constant(1.0, 4, v1(1.0)), 0.0,
                                 0.5, 0.25);
  EXPECT_EQ(trajectory_to_csv(sol), "t,x0\n0,1\n0.25,0.75\n0.5,0.5\n");
}
