#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pcm/cli_io.hpp"
#include "pcm/errors.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
};

pcm::RunConfig load(const Options& o) {
  std::vector<pcm::ConfigEntry> entries;
  if (!o.config.empty()) {
    std::ifstream f(o.config, std::ios::binary);
    if (!f) throw pcm::ConfigError("cannot read config file " + o.config);
    std::stringstream buf;
    buf << f.rdbuf();
    entries = pcm::parse_config_entries(buf.str());
  }
  for (const auto& ov : o.overrides) pcm::apply_override(entries, ov);
  if (!o.out.empty()) pcm::apply_override(entries, "output=" + o.out);
  return pcm::resolve_config(entries);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periodic center manifolds of delay equations: cycles, Floquet analysis, charts"};
  app.require_subcommand(1);
  Options opts;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "integrate the problem from a constant history"},
      {"find-cycle", "locate the periodic orbit (analytic or Newton shooting)"},
      {"floquet", "monodromy, multipliers, spectral projectors"},
      {"manifold", "center manifold chart on a lattice of center coordinates"},
      {"validate", "tangency, invariance, periodicity, Lipschitz and contraction diagnostics"},
      {"list-problems", "list the built-in benchmark problems"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    if (name == "list-problems") continue;
    sub->add_option("--config", opts.config, "config file with 'key = value' lines");
    sub->add_option("--out", opts.out, "output directory");
    sub->add_option("--override", opts.overrides, "key=value, applied after the config file")->take_all();
  }
  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  pcm::RunConfig cfg;
  if (command != "list-problems") {
    try {
      cfg = load(opts);
    } catch (const pcm::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return pcm::run_command(command, cfg, command == "list-problems" ? std::cout : std::cerr);
}
