#include "pagesamp/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace pagesamp;
using namespace pagesamp::harness;

namespace {

struct Command {
  std::string config;
  std::map<std::string, std::string> flags;
  std::vector<std::string> grid;
};

void add_flags(CLI::App* sub, Command& cmd) {
  sub->add_option("--config", cmd.config, "config file ([section] / key = value, format_version 1)");
  for (const auto& key : config_keys()) {
    auto* opt = sub->add_option_function<std::string>(
        "--" + key.name, [&cmd, name = key.name](const std::string& v) { cmd.flags[name] = v; }, key.help);
    opt->group(key.section);
    if (!key.fallback.empty()) opt->default_str(key.fallback);
  }
}

Settings settings_of(const Command& cmd) {
  Settings base;
  if (!cmd.config.empty()) base = load_config(cmd.config);
  Settings flags;
  flags.values = cmd.flags;
  for (const auto& g : cmd.grid) {
    const auto eq = g.find('=');
    if (eq == std::string::npos) throw ConfigError({"grid entry '" + g + "' must look like key=v1,v2"});
    flags.grid[g.substr(0, eq)] = g.substr(eq + 1);
  }
  return merge(base, flags);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PAGE optimizer with configurable samplings: task generation, runs, sweeps and checks"};
  app.require_subcommand(1);

  using Handler = int (*)(const Settings&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
      {"generate", "generate a quadratic task file and report its constants", cmd_generate},
      {"run", "run one method over several seeds and write CSV traces", cmd_run},
      {"sweep", "run a grid of configurations (use --grid key=v1,v2 or a [grid] section)", cmd_sweep},
      {"verify", "check unbiasedness and variance bounds of the samplings", cmd_verify},
      {"constants", "print smoothness constants, stepsizes and predicted complexities", cmd_constants},
  };
  std::vector<Command> parsed(commands.size());
  std::vector<CLI::App*> subs;
  for (std::size_t k = 0; k < commands.size(); ++k) {
    auto* sub = app.add_subcommand(std::get<0>(commands[k]), std::get<1>(commands[k]));
    add_flags(sub, parsed[k]);
    if (std::get<0>(commands[k]) == "sweep") sub->add_option("--grid", parsed[k].grid, "sweep axis key=v1,v2,...");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Success : ConfigFailure;
  }

  try {
    for (std::size_t k = 0; k < commands.size(); ++k)
      if (subs[k]->parsed()) return std::get<2>(commands[k])(settings_of(parsed[k]), std::cout);
  } catch (const Divergence& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return NumericalDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ConfigFailure;
  }
  return ConfigFailure;
}
