#include "pcm/bench_registry.hpp"

#include <cmath>
#include <numbers>

#include "pcm/errors.hpp"

namespace pcm {

using std::numbers::pi;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

BenchmarkProblem make_hopf() {
  BenchmarkProblem p;
  p.name = "hopf_embed";
  p.description = "planar Hopf normal form as a DDE with an inert delayed term; cycle (cos t, sin t)";
  p.rhs.n = 2;
  p.rhs.h = 1.0;
  p.rhs.delays = {0.0, 1.0};
  p.rhs.f = [](double, const Eigen::MatrixXd& d) {
    const double x = d(0, 0), y = d(1, 0);
    const double r2 = x * x + y * y;
    // The delayed column enters with coefficient zero.
    return vec2(x - y - x * r2 + 0.0 * d(0, 1), x + y - y * r2 + 0.0 * d(1, 1));
  };
  p.rhs.jacobian = [](double, const Eigen::MatrixXd& d, int k) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2, 2);
    if (k != 0) return J;
    const double x = d(0, 0), y = d(1, 0);
    J << 1 - 3 * x * x - y * y, -1 - 2 * x * y, 1 - 2 * x * y, 1 - x * x - 3 * y * y;
    return J;
  };
  p.period = 2 * pi;
  p.gamma = [](double t) { return vec2(std::cos(t), std::sin(t)); };
  p.dgamma = [](double t) { return vec2(-std::sin(t), std::cos(t)); };
  p.settings.dt = 2 * pi / 512;
  return p;
}

BenchmarkProblem make_pi_half() {
  BenchmarkProblem p;
  p.name = "linear_pi_half";
  p.description = "x' = -(pi/2) x(t-1); periodic solution cos(pi t/2), double multiplier 1";
  p.rhs.n = 1;
  p.rhs.h = 1.0;
  p.rhs.delays = {0.0, 1.0};
  p.rhs.f = [](double, const Eigen::MatrixXd& d) { return Eigen::VectorXd(-pi / 2 * d.col(1)); };
  p.rhs.jacobian = [](double, const Eigen::MatrixXd&, int k) {
    return Eigen::MatrixXd::Constant(1, 1, k == 1 ? -pi / 2 : 0.0);
  };
  p.period = 4.0;
  p.gamma = [](double t) { return Eigen::VectorXd::Constant(1, std::cos(pi * t / 2)); };
  p.dgamma = [](double t) { return Eigen::VectorXd::Constant(1, -pi / 2 * std::sin(pi * t / 2)); };
  p.settings.dt = 1.0 / 64;
  return p;
}

BenchmarkProblem make_hutchinson() {
  constexpr double mu = 1.6;
  BenchmarkProblem p;
  p.name = "hutchinson";
  p.description = "delayed logistic y' = -1.6 y(t-1)(1+y); small stable cycle past the Hopf point";
  p.rhs.n = 1;
  p.rhs.h = 1.0;
  p.rhs.delays = {0.0, 1.0};
  p.rhs.f = [](double, const Eigen::MatrixXd& d) {
    return Eigen::VectorXd::Constant(1, -mu * d(0, 1) * (1 + d(0, 0)));
  };
  p.rhs.jacobian = [](double, const Eigen::MatrixXd& d, int k) {
    return Eigen::MatrixXd::Constant(1, 1, k == 0 ? -mu * d(0, 1) : -mu * (1 + d(0, 0)));
  };
  p.period = 4.2;
  p.transient_start = 0.1;
  p.transient_time = 500.0;
  p.settings.dt = 1.0 / 64;
  return p;
}

BenchmarkProblem make_shift() {
  BenchmarkProblem p;
  p.name = "shift_only";
  p.description = "x' = 0 in R^2 with horizon 1; shift semigroup, monodromy is idempotent";
  p.rhs.n = 2;
  p.rhs.h = 1.0;
  p.rhs.delays = {0.0, 1.0};
  p.rhs.f = [](double, const Eigen::MatrixXd&) { return Eigen::VectorXd::Zero(2); };
  p.rhs.jacobian = [](double, const Eigen::MatrixXd&, int) { return Eigen::MatrixXd::Zero(2, 2); };
  p.period = 1.0;
  p.gamma = [](double) { return Eigen::VectorXd::Zero(2); };
  p.dgamma = [](double) { return Eigen::VectorXd::Zero(2); };
  p.settings.dt = 1.0 / 32;
  return p;
}

const std::vector<BenchmarkProblem>& registry() {
  static const std::vector<BenchmarkProblem> problems{make_hopf(), make_pi_half(), make_hutchinson(),
                                                      make_shift()};
  return problems;
}

}  // namespace

CycleSolution BenchmarkProblem::analytic(int m, double dt) const {
  if (!gamma) throw DomainError("problem '" + name + "' has no analytic cycle");
  return analytic_cycle(rhs.n, rhs.h, period, dt, m, gamma, dgamma);
}

const BenchmarkProblem& get_problem(const std::string& name) {
  for (const auto& p : registry())
    if (p.name == name) return p;
  std::string names;
  for (const auto& p : registry()) names += (names.empty() ? "" : ", ") + p.name;
  throw LookupError("unknown problem '" + name + "'; available: " + names);
}

std::vector<std::pair<std::string, std::string>> list_problems() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& p : registry()) out.emplace_back(p.name, p.description);
  return out;
}

std::complex<double> characteristic_root(double c, int branch) {
  using cd = std::complex<double>;
  const cd z(-c, 0.0);
  const cd L1 = std::log(z) + cd(0.0, 2 * pi * branch);
  cd w = L1 - std::log(L1);
  for (int it = 0; it < 100; ++it) {
    const cd ew = std::exp(w);
    const cd step = (w * ew - z) / (ew * (w + 1.0));
    w -= step;
    if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(w))) break;
  }
  return w;
}

ReferenceValues reference_values(const std::string& name) {
  const auto& p = get_problem(name);
  ReferenceValues r;
  if (p.name == "hopf_embed") {
    r.multipliers = {{1.0, "analytic: trivial multiplier, eigenfunction gamma'"},
                     {std::exp(-4 * pi), "analytic: radial rate -2 of r' = r(1-r^2) at r = 1 over T = 2 pi"}};
    r.remainder = "discretization eigenvalues near 0";
  } else if (p.name == "linear_pi_half") {
    const char* prov = "characteristic-equation Newton oracle, multiplier exp(4 lambda)";
    r.multipliers.push_back({std::exp(4.0 * characteristic_root(pi / 2, 0)), prov});
    r.multipliers.push_back({std::exp(4.0 * characteristic_root(pi / 2, -1)), prov});
    for (int k = 1; k <= 3; ++k) {
      const auto lam = characteristic_root(pi / 2, k);
      r.multipliers.push_back({std::exp(4.0 * lam), prov});
      r.multipliers.push_back({std::exp(4.0 * std::conj(lam)), prov});
    }
    r.remainder = "all other multipliers have modulus below the listed ones";
  } else if (p.name == "hutchinson") {
    r.multipliers = {{1.0, "analytic: trivial multiplier of an autonomous cycle"}};
    r.remainder = "all other multipliers have modulus < 1 (stable cycle)";
  } else {
    for (int c = 0; c < p.rhs.n; ++c)
      r.multipliers.push_back({1.0, "shift semigroup: monodromy sends phi to the constant phi(0)"});
    r.remainder = "0 with infinite multiplicity";
  }
  return r;
}

CycleSolution obtain_cycle(const BenchmarkProblem& p, int m, double dt, double tol, int max_newton) {
  if (p.has_analytic_cycle()) return p.analytic(m, dt);
  auto phi = HistorySegment::constant(p.rhs.h, m, Eigen::VectorXd::Constant(p.rhs.n, p.transient_start));
  auto g = guess_from_transient(p.rhs, phi, p.transient_time, dt, m);
  CycleOptions opts;
  opts.m = m;
  opts.dt = dt;
  opts.tol = tol;
  opts.max_newton = max_newton;
  return find_cycle(p.rhs, g.guess, g.period, opts);
}

}  // namespace pcm
