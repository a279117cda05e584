#include "pcm/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "csv_util.hpp"
#include "pcm/bench_registry.hpp"
#include "pcm/errors.hpp"
#include "pcm/floquet_spectral.hpp"
#include "pcm/lyapunov_perron.hpp"

namespace pcm {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string where(const ConfigEntry& e) {
  return e.line > 0 ? " (line " + std::to_string(e.line) + ")" : " (--override)";
}

[[noreturn]] void bad_value(const ConfigEntry& e, const std::string& why) {
  throw ConfigError(e.key + " = " + e.value + ": " + why + where(e));
}

double to_double(const ConfigEntry& e) {
  double v = 0.0;
  const char* b = e.value.data();
  const char* end = b + e.value.size();
  const auto [ptr, ec] = std::from_chars(b, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) bad_value(e, "not a finite number");
  return v;
}

long to_long(const ConfigEntry& e) {
  long v = 0;
  const char* b = e.value.data();
  const char* end = b + e.value.size();
  const auto [ptr, ec] = std::from_chars(b, end, v);
  if (ec != std::errc() || ptr != end) bad_value(e, "not an integer");
  return v;
}

bool is_auto(const ConfigEntry& e) { return e.value == "auto"; }

double positive(const ConfigEntry& e) {
  const double v = to_double(e);
  if (!(v > 0.0)) bad_value(e, "must be > 0");
  return v;
}

double open_unit(const ConfigEntry& e) {
  const double v = to_double(e);
  if (!(v > 0.0 && v < 1.0)) bad_value(e, "must lie in (0, 1)");
  return v;
}

int at_least(const ConfigEntry& e, long lo) {
  const long v = to_long(e);
  if (v < lo || v > 1000000) bad_value(e, "must be an integer in [" + std::to_string(lo) + ", 1000000]");
  return static_cast<int>(v);
}

using Setter = std::function<void(RunConfig&, const ConfigEntry&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"problem", [](RunConfig& c, const ConfigEntry& e) { c.problem = e.value; }},
      {"output",
       [](RunConfig& c, const ConfigEntry& e) {
         if (e.value.empty()) bad_value(e, "must not be empty");
         c.output = e.value;
       }},
      {"seed", [](RunConfig& c, const ConfigEntry& e) { c.seed = static_cast<unsigned>(at_least(e, 0)); }},
      {"m", [](RunConfig& c, const ConfigEntry& e) { c.m = at_least(e, 3); }},
      {"dt",
       [](RunConfig& c, const ConfigEntry& e) {
         if (!is_auto(e)) c.dt = positive(e);
       }},
      {"base_time", [](RunConfig& c, const ConfigEntry& e) { c.base_time = to_double(e); }},
      {"spectral.rho_tol", [](RunConfig& c, const ConfigEntry& e) { c.rho_tol = open_unit(e); }},
      {"spectral.n_t", [](RunConfig& c, const ConfigEntry& e) { c.n_t = at_least(e, 1); }},
      {"spectral.n_quad", [](RunConfig& c, const ConfigEntry& e) { c.n_quad = at_least(e, 8); }},
      {"spectral.margin",
       [](RunConfig& c, const ConfigEntry& e) {
         const double v = to_double(e);
         if (!(v >= 0.0 && v < 1.0)) bad_value(e, "must lie in [0, 1)");
         c.margin = v;
       }},
      {"cycle.tol", [](RunConfig& c, const ConfigEntry& e) { c.cycle_tol = positive(e); }},
      {"cycle.max_newton", [](RunConfig& c, const ConfigEntry& e) { c.max_newton = at_least(e, 1); }},
      {"cycle.file",
       [](RunConfig& c, const ConfigEntry& e) {
         if (e.value.empty()) bad_value(e, "must not be empty");
         c.cycle_file = e.value;
       }},
      {"simulate.t_end",
       [](RunConfig& c, const ConfigEntry& e) {
         if (is_auto(e))
           c.t_end.reset();
         else
           c.t_end = positive(e);
       }},
      {"simulate.initial", [](RunConfig& c, const ConfigEntry& e) { c.initial = to_double(e); }},
      {"lp.eta",
       [](RunConfig& c, const ConfigEntry& e) {
         if (is_auto(e))
           c.eta.reset();
         else
           c.eta = positive(e);
       }},
      {"lp.delta", [](RunConfig& c, const ConfigEntry& e) { c.delta = positive(e); }},
      {"lp.window",
       [](RunConfig& c, const ConfigEntry& e) {
         if (is_auto(e))
           c.window.reset();
         else
           c.window = positive(e);
       }},
      {"lp.eps_trunc", [](RunConfig& c, const ConfigEntry& e) { c.eps_trunc = open_unit(e); }},
      {"lp.tol_fp", [](RunConfig& c, const ConfigEntry& e) { c.tol_fp = positive(e); }},
      {"lp.max_iter", [](RunConfig& c, const ConfigEntry& e) { c.max_iter = at_least(e, 1); }},
      {"lp.r_chart", [](RunConfig& c, const ConfigEntry& e) { c.r_chart = positive(e); }},
      {"lp.lattice", [](RunConfig& c, const ConfigEntry& e) { c.lattice = at_least(e, 1); }},
      {"lp.N",
       [](RunConfig& c, const ConfigEntry& e) {
         if (is_auto(e)) {
           c.N.reset();
           return;
         }
         const double v = to_double(e);
         if (!(v >= 1.0)) bad_value(e, "must be >= 1");
         c.N = v;
       }},
      {"validate.amplitude", [](RunConfig& c, const ConfigEntry& e) { c.amplitude = positive(e); }},
      {"validate.invariance_times", [](RunConfig& c, const ConfigEntry& e) { c.invariance_times = at_least(e, 1); }},
      {"validate.tangency_points", [](RunConfig& c, const ConfigEntry& e) { c.tangency_points = at_least(e, 2); }},
      {"validate.min_slope", [](RunConfig& c, const ConfigEntry& e) { c.min_slope = to_double(e); }},
      {"validate.max_invariance", [](RunConfig& c, const ConfigEntry& e) { c.max_invariance = positive(e); }},
      {"validate.max_periodicity",
       [](RunConfig& c, const ConfigEntry& e) {
         if (is_auto(e))
           c.max_periodicity.reset();
         else
           c.max_periodicity = positive(e);
       }},
      {"validate.max_contraction", [](RunConfig& c, const ConfigEntry& e) { c.max_contraction = open_unit(e); }},
  };
  return table;
}

}  // namespace

std::vector<ConfigEntry> parse_config_entries(std::string_view text) {
  std::vector<ConfigEntry> out;
  std::map<std::string, int> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("syntax error on line " + std::to_string(line_no) + ": expected 'key = value'");
    ConfigEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (e.key.empty() || e.key.find_first_of(" \t") != std::string::npos)
      throw ConfigError("syntax error on line " + std::to_string(line_no) + ": malformed key");
    if (const auto it = seen.find(e.key); it != seen.end())
      throw ConfigError("syntax error: duplicate key '" + e.key + "' on lines " + std::to_string(it->second) +
                        " and " + std::to_string(line_no));
    seen.emplace(e.key, line_no);
    out.push_back(std::move(e));
  }
  return out;
}

void apply_override(std::vector<ConfigEntry>& entries, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  ConfigEntry e{trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), 0};
  if (e.key.empty()) throw ConfigError("override '" + std::string(assignment) + "' has an empty key");
  for (auto& x : entries)
    if (x.key == e.key) {
      x = std::move(e);
      return;
    }
  entries.push_back(std::move(e));
}

RunConfig resolve_config(const std::vector<ConfigEntry>& entries) {
  RunConfig cfg;
  const auto& table = setters();
  for (const auto& e : entries)
    if (!table.count(e.key)) throw ConfigError("unknown key '" + e.key + "'" + where(e));

  const auto pe = std::find_if(entries.begin(), entries.end(), [](const auto& e) { return e.key == "problem"; });
  if (pe != entries.end()) {
    const BenchmarkProblem* p = nullptr;
    try {
      p = &get_problem(pe->value);
    } catch (const LookupError& err) {
      throw ConfigError(std::string(err.what()) + where(*pe));
    }
    const auto& s = p->settings;
    cfg.problem = p->name;
    cfg.m = s.m;
    cfg.dt = s.dt;
    cfg.rho_tol = s.rho_tol;
    cfg.delta = s.delta;
    if (s.eta > 0.0) cfg.eta = s.eta;
    if (s.window > 0.0) cfg.window = s.window;
    cfg.eps_trunc = s.eps_trunc;
    cfg.tol_fp = s.tol_fp;
    cfg.r_chart = s.r_chart;
    cfg.initial = p->transient_start;
  }
  for (const auto& e : entries) table.at(e.key)(cfg, e);
  if (!cfg.problem.empty() && !(cfg.dt > 0.0)) throw ConfigError("dt must be > 0");
  return cfg;
}

RunConfig parse_config(std::string_view text) { return resolve_config(parse_config_entries(text)); }

std::string config_to_text(const RunConfig& c) {
  std::ostringstream out;
  auto num = [](double v) { return detail::format_double(v); };
  auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : std::string("auto"); };
  out << "problem = " << c.problem << '\n'
      << "output = " << c.output << '\n'
      << "seed = " << c.seed << '\n'
      << "m = " << c.m << '\n'
      << "dt = " << (c.dt > 0.0 ? num(c.dt) : std::string("auto")) << '\n'
      << "base_time = " << num(c.base_time) << '\n'
      << "spectral.rho_tol = " << num(c.rho_tol) << '\n'
      << "spectral.n_t = " << c.n_t << '\n'
      << "spectral.n_quad = " << c.n_quad << '\n'
      << "spectral.margin = " << num(c.margin) << '\n'
      << "cycle.tol = " << num(c.cycle_tol) << '\n'
      << "cycle.max_newton = " << c.max_newton << '\n';
  if (c.cycle_file) out << "cycle.file = " << *c.cycle_file << '\n';
  out << "simulate.t_end = " << opt(c.t_end) << '\n'
      << "simulate.initial = " << num(c.initial) << '\n'
      << "lp.eta = " << opt(c.eta) << '\n'
      << "lp.delta = " << num(c.delta) << '\n'
      << "lp.window = " << opt(c.window) << '\n'
      << "lp.eps_trunc = " << num(c.eps_trunc) << '\n'
      << "lp.tol_fp = " << num(c.tol_fp) << '\n'
      << "lp.max_iter = " << c.max_iter << '\n'
      << "lp.r_chart = " << num(c.r_chart) << '\n'
      << "lp.lattice = " << c.lattice << '\n'
      << "lp.N = " << opt(c.N) << '\n'
      << "validate.amplitude = " << num(c.amplitude) << '\n'
      << "validate.invariance_times = " << c.invariance_times << '\n'
      << "validate.tangency_points = " << c.tangency_points << '\n'
      << "validate.min_slope = " << num(c.min_slope) << '\n'
      << "validate.max_invariance = " << num(c.max_invariance) << '\n'
      << "validate.max_periodicity = " << opt(c.max_periodicity) << '\n'
      << "validate.max_contraction = " << num(c.max_contraction) << '\n';
  return out.str();
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"simulate", "find-cycle", "floquet", "manifold", "validate",
                                                 "list-problems"};
  return names;
}

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Run {
  const RunConfig& cfg;
  std::ostream& log;
  fs::path out;
  json report = json::object();
  const BenchmarkProblem* problem = nullptr;

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(out / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (out / name).string());
    f << content;
    if (!f) throw Error("failed writing " + (out / name).string());
    log << "wrote " << (out / name).string() << '\n';
  }
};

LPConfig lp_config(const RunConfig& c) {
  LPConfig lp;
  lp.eta = c.eta.value_or(0.0);
  lp.delta = c.delta;
  lp.window = c.window.value_or(0.0);
  lp.dt = c.dt;
  lp.tol_fp = c.tol_fp;
  lp.max_iter = c.max_iter;
  lp.eps_trunc = c.eps_trunc;
  lp.N = c.N.value_or(0.0);
  lp.rho_tol = c.rho_tol;
  lp.margin = c.margin;
  lp.r_chart = c.r_chart;
  lp.lattice = c.lattice;
  return lp;
}

void echo_config(json& r, const RunConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json("auto"); };
  r["problem"] = c.problem;
  r["output"] = c.output;
  r["seed"] = c.seed;
  r["m"] = c.m;
  r["dt"] = c.dt;
  r["base_time"] = c.base_time;
  r["spectral_rho_tol"] = c.rho_tol;
  r["spectral_n_t"] = c.n_t;
  r["spectral_n_quad"] = c.n_quad;
  r["spectral_margin"] = c.margin;
  r["cycle_tol"] = c.cycle_tol;
  r["cycle_max_newton"] = c.max_newton;
  r["cycle_file"] = c.cycle_file ? json(*c.cycle_file) : json(nullptr);
  r["simulate_t_end"] = opt(c.t_end);
  r["simulate_initial"] = c.initial;
  r["lp_eta"] = opt(c.eta);
  r["lp_delta"] = c.delta;
  r["lp_window"] = opt(c.window);
  r["lp_eps_trunc"] = c.eps_trunc;
  r["lp_tol_fp"] = c.tol_fp;
  r["lp_max_iter"] = c.max_iter;
  r["lp_r_chart"] = c.r_chart;
  r["lp_lattice"] = c.lattice;
  r["lp_n"] = opt(c.N);
}

void record_lp(json& r, const LPParameters& p) {
  r["a"] = p.a;
  r["b"] = p.b;
  r["eta"] = p.eta;
  r["delta"] = p.delta;
  r["window"] = p.window;
  r["projector_bound"] = p.N;
  r["lp_dt"] = p.dt;
}

CycleSolution load_cycle(Run& run, const std::string& command) {
  const auto& c = run.cfg;
  const auto& p = *run.problem;
  fs::path file;
  if (c.cycle_file) {
    file = *c.cycle_file;
  } else if (p.has_analytic_cycle()) {
    run.report["cycle_source"] = "analytic";
    return p.analytic(c.m, c.dt);
  } else {
    file = run.out / "cycle.csv";
  }
  std::ifstream f(file, std::ios::binary);
  if (!f)
    throw DependencyError(command + " needs a periodic orbit for " + p.name + ": " + file.string() +
                          " not found; run find-cycle first");
  std::stringstream buf;
  buf << f.rdbuf();
  run.report["cycle_source"] = file.string();
  return cycle_from_csv(buf.str(), p.rhs.h, c.m);
}

void cmd_simulate(Run& run) {
  const auto& c = run.cfg;
  const auto& p = *run.problem;
  const double t_end = c.t_end.value_or(p.transient_time > 0.0 ? p.transient_time : 10.0 * p.period);
  const auto phi = HistorySegment::constant(p.rhs.h, c.m, Eigen::VectorXd::Constant(p.rhs.n, c.initial));
  const double dt = fit_step(t_end, c.dt);
  run.report["simulate_t_end"] = t_end;
  run.report["simulate_dt"] = dt;
  const auto sol = integrate_nonlinear(p.rhs, phi, 0.0, t_end, dt);
  run.write("trajectory.csv", trajectory_to_csv(sol));
  run.report["final_state_sup"] = sol.state(t_end, 0).cwiseAbs().maxCoeff();
}

void cmd_find_cycle(Run& run) {
  const auto& c = run.cfg;
  const auto& p = *run.problem;
  const auto cyc = obtain_cycle(p, c.m, c.dt, c.cycle_tol, c.max_newton);
  const double res = cycle_residual(p.rhs, cyc);
  run.write("cycle.csv", cycle_to_csv(cyc));
  run.report["analytic_cycle"] = p.has_analytic_cycle();
  run.report["period"] = cyc.period();
  run.report["cycle_residual"] = res;
  run.report["newton_iterations"] = cyc.newton_iterations;
}

// Sum of Dunford projectors over the center clusters; conjugate clusters
// contribute 2·Re of the upper one.
std::optional<Eigen::MatrixXd> dunford_center(const Eigen::MatrixXd& M, const FloquetSpectrum& spec, int n_quad,
                                              std::string& note) {
  std::vector<std::complex<double>> center, other;
  for (std::size_t i = 0; i < spec.multipliers.size(); ++i)
    (spec.classes[i] == Stability::center ? center : other).push_back(spec.multipliers[i]);
  if (center.empty()) {
    note = "no center multipliers";
    return std::nullopt;
  }
  std::vector<std::vector<std::complex<double>>> clusters;
  for (auto l : center) {
    if (l.imag() < -1e-12) continue;
    bool placed = false;
    for (auto& cl : clusters)
      if (std::abs(cl.front() - l) <= 0.5 * spec.rho_tol) {
        cl.push_back(l);
        placed = true;
        break;
      }
    if (!placed) clusters.push_back({l});
  }
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(M.rows(), M.cols());
  for (const auto& cl : clusters) {
    std::complex<double> z0 = 0.0;
    for (auto l : cl) z0 += l;
    z0 /= static_cast<double>(cl.size());
    double spread = 0.0, dist = std::numeric_limits<double>::infinity();
    for (auto l : cl) spread = std::max(spread, std::abs(l - z0));
    for (auto l : spec.multipliers) {
      const bool inside = std::any_of(cl.begin(), cl.end(), [&](auto c) { return c == l; });
      if (!inside) dist = std::min(dist, std::abs(l - z0));
    }
    const double r = 0.5 * (spread + dist);
    if (!(dist > 2.0 * spread)) {
      note = "center cluster not separable by a circle";
      return std::nullopt;
    }
    const double weight = z0.imag() > 1e-12 ? 2.0 : 1.0;
    P += weight * projector_dunford(M, z0, r, n_quad);
  }
  return P;
}

void cmd_floquet(Run& run) {
  const auto& c = run.cfg;
  const auto& p = *run.problem;
  const auto cyc = load_cycle(run, "floquet");
  const auto lin = linearize_about_cycle(p.rhs, cyc);
  const double T = cyc.period(), s = c.base_time;
  const double dt = grid_step(T, c.n_t, c.dt);
  const auto M = build_monodromy(lin.L, s, T, c.m, dt);
  const auto spec = compute_floquet(M, c.rho_tol);
  run.report["period"] = T;
  run.report["monodromy_dt"] = dt;
  run.report["d_minus"] = spec.d_minus;
  run.report["d_zero"] = spec.d_zero;
  run.report["d_plus"] = spec.d_plus;
  for (std::size_t i = 0; i < std::min<std::size_t>(6, spec.multipliers.size()); ++i) {
    const std::string k = "multiplier_" + std::to_string(i);
    run.report[k + "_re"] = spec.multipliers[i].real();
    run.report[k + "_im"] = spec.multipliers[i].imag();
    run.report[k + "_modulus"] = std::abs(spec.multipliers[i]);
  }
  run.write("floquet.csv", floquet_to_csv(spec));

  const auto split = projectors_schur(M.matrix, spec);
  run.report["cluster_gap"] = split.gap;
  run.write("projector_P0.txt", matrix_to_text(split.P0, s));
  run.write("projector_Pplus.txt", matrix_to_text(split.Pplus, s));
  run.write("projector_Pminus.txt", matrix_to_text(split.Pminus, s));

  std::string note;
  try {
    if (auto Pd = dunford_center(M.matrix, spec, c.n_quad, note))
      run.report["dunford_schur_diff"] = norm2(*Pd - split.P0);
    else
      run.report["dunford_schur_note"] = note;
  } catch (const Error& e) {
    run.report["dunford_schur_note"] = e.what();
  }

  const auto fibers = propagate_fiber_bases(lin.L, s, T, c.n_t, spec, split, c.m, dt);
  run.report["fiber_projector_bound"] = fibers.projector_bound;

  try {
    const auto rates = estimate_trichotomy(spec, T, c.margin);
    auto lp = lp_config(c);
    lp.dt = fit_step(T, c.dt);
    auto par = resolve_lp_config(lp, rates, T);
    if (!(par.N > 0.0)) par.N = fibers.projector_bound;
    record_lp(run.report, par);
  } catch (const Error& e) {
    run.report["lp_note"] = e.what();
  }
}

void cmd_manifold(Run& run) {
  const auto& c = run.cfg;
  const auto& p = *run.problem;
  const auto cyc = load_cycle(run, "manifold");
  const auto lin = linearize_about_cycle(p.rhs, cyc);
  const CenterProblem problem{lin.L, lin.G, c.m};
  const PerronSolver solver(problem, c.base_time, lp_config(c));
  record_lp(run.report, solver.params());
  run.report["d0"] = solver.d0();
  run.report["d_plus"] = solver.dplus();
  const double r = std::min(c.r_chart, c.delta);
  const auto chart = center_map(solver, chart_lattice(solver.basis(), r, c.lattice), &cyc);
  run.write("manifold.csv", chart_to_csv(chart));
  int max_it = 0;
  double max_res = 0.0;
  for (const auto& pt : chart.points) {
    max_it = std::max(max_it, pt.iterations);
    max_res = std::max(max_res, pt.residual);
  }
  run.report["chart_radius"] = r;
  run.report["chart_points"] = chart.points.size();
  run.report["max_iterations"] = max_it;
  run.report["max_fixed_point_residual"] = max_res;
  run.report["contraction_ratio"] = chart.contraction_ratio;
}

int cmd_validate(Run& run) {
  const auto& c = run.cfg;
  const auto& p = *run.problem;
  const auto cyc = load_cycle(run, "validate");
  const auto lin = linearize_about_cycle(p.rhs, cyc);
  const CenterProblem problem{lin.L, lin.G, c.m};
  ValidationOptions opts;
  opts.amplitude = c.amplitude;
  opts.invariance_times = c.invariance_times;
  opts.tangency_points = c.tangency_points;
  const auto lp = lp_config(c);
  try {
    record_lp(run.report, PerronSolver(problem, c.base_time, lp).params());
  } catch (const Error& e) {
    run.report["lp_note"] = e.what();
  }
  const auto rep = validate_chart(problem, p.rhs, cyc, c.base_time, lp, opts);
  run.write("validate.txt", validation_to_text(rep));

  json metrics = json::object();
  auto put = [&](const std::string& key, const std::optional<double>& v) {
    if (v)
      metrics[key] = *v;
    else if (key == "tangency_slope" && rep.tangency_exact)
      metrics[key] = "exact";
    else
      metrics[key] = nullptr;
  };
  put("tangency_slope", rep.tangency_slope);
  put("invariance_residual", rep.invariance_residual);
  put("periodicity_gap", rep.periodicity_gap);
  put("lipschitz_max", rep.lipschitz_max);
  put("contraction_ratio", rep.contraction_ratio);
  for (const auto& [k, msg] : rep.errors) metrics[k + "_error"] = msg;
  run.write("validate.json", metrics.dump(2) + "\n");
  for (const auto& [k, v] : metrics.items()) run.report[k] = v;

  if (!rep.errors.empty()) {
    for (const auto& [k, msg] : rep.errors) run.log << "error: " << k << ": " << msg << '\n';
    return 1;
  }
  const double max_gap = c.max_periodicity.value_or(10.0 * c.tol_fp);
  std::vector<std::string> failed;
  if (!rep.tangency_exact && !(*rep.tangency_slope >= c.min_slope)) failed.push_back("tangency_slope");
  if (!(*rep.invariance_residual <= c.max_invariance)) failed.push_back("invariance_residual");
  if (!(*rep.periodicity_gap <= max_gap)) failed.push_back("periodicity_gap");
  if (!(*rep.contraction_ratio <= c.max_contraction)) failed.push_back("contraction_ratio");
  run.report["threshold_min_slope"] = c.min_slope;
  run.report["threshold_max_invariance"] = c.max_invariance;
  run.report["threshold_max_periodicity"] = max_gap;
  run.report["threshold_max_contraction"] = c.max_contraction;
  std::string joined;
  for (const auto& f : failed) joined += (joined.empty() ? "" : ",") + f;
  run.report["failed_thresholds"] = joined;
  for (const auto& f : failed) run.log << "threshold failed: " << f << '\n';
  return failed.empty() ? 0 : 2;
}

}  // namespace

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end()) {
    log << "error: unknown command '" << command << "'\n";
    return 1;
  }
  if (command == "list-problems") {
    for (const auto& [name, desc] : list_problems()) log << name << "  " << desc << '\n';
    return 0;
  }

  Run run{cfg, log, fs::path(cfg.output)};
  run.report["command"] = command;
  echo_config(run.report, cfg);
  const auto t0 = std::chrono::steady_clock::now();
  int code = 0;
  auto finish = [&]() {
    run.report["exit_code"] = code;
    run.report["status"] = code == 0 ? "ok" : code == 2 ? "threshold_failure" : "error";
    run.report["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
      run.write("run_report.json", run.report.dump(2) + "\n");
    } catch (const Error& e) {
      log << "error: " << e.what() << '\n';
      code = 1;
    }
  };

  try {
    std::error_code ec;
    fs::create_directories(run.out, ec);
    if (ec) throw Error("cannot create output directory " + run.out.string() + ": " + ec.message());
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (cfg.problem.empty()) throw ConfigError("no problem given (set 'problem = <name>')");
    run.problem = &get_problem(cfg.problem);
    if (!(cfg.dt > 0.0)) throw ConfigError("dt must be > 0");
    run.write("resolved_config.txt", config_to_text(cfg));
    if (command == "simulate")
      cmd_simulate(run);
    else if (command == "find-cycle")
      cmd_find_cycle(run);
    else if (command == "floquet")
      cmd_floquet(run);
    else if (command == "manifold")
      cmd_manifold(run);
    else
      code = cmd_validate(run);
  } catch (const DivergenceError& e) {
    run.report["error"] = e.what();
    run.report["blowup_time"] = e.blowup_time();
    log << "error: " << e.what() << '\n';
    code = 1;
  } catch (const std::exception& e) {
    run.report["error"] = e.what();
    log << "error: " << e.what() << '\n';
    code = 1;
  }
  finish();
  return code;
}

}  // namespace pcm
