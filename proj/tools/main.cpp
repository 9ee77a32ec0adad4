#include <exception>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "app/commands.hpp"
#include "curvemps/errors.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Flag {
  const char* name;
  const char* key;
  const char* help;
};

const std::vector<Flag> kFlags = {
    {"--lattice", "lattice", "lattice extent RxC"},
    {"--bc", "bc", "boundary: obc | pbc"},
    {"--mapping", "mapping", "snake | hilbert | file:PATH"},
    {"--t", "t", "hopping amplitude"},
    {"--U", "U", "on-site repulsion"},
    {"--density", "density", "electron density, e.g. 1 or 7/8"},
    {"--nup", "nup", "spin-up electrons"},
    {"--ndown", "ndown", "spin-down electrons"},
    {"--schedule", "schedule", "bond dimension per sweep, e.g. 25,50,100 or 'default'"},
    {"--trunc-tol", "trunc_tol", "discarded-weight threshold for convergence"},
    {"--energy-tol", "energy_tol", "energy-change threshold for convergence"},
    {"--early-stop", "early_stop", "stop once both thresholds hold (true | false)"},
    {"--alpha", "alpha", "initial density-matrix mixing strength"},
    {"--alpha-decay", "alpha_decay", "mixing decay factor per plateau"},
    {"--pure-final-sweeps", "pure_final_sweeps", "final sweeps without mixing"},
    {"--lanczos-iter", "lanczos_iter", "Lanczos iterations per local solve"},
    {"--lanczos-tol", "lanczos_tol", "Lanczos residual tolerance"},
    {"--engine", "engine", "mps_dmrg | ttn_a | ttn_b | ed"},
    {"--out", "out", "output directory"},
    {"--checkpoint", "checkpoint", "state file written after every sweep"},
    {"--resume", "resume", "continue from the checkpoint when it exists (true | false)"},
    {"--jobs", "jobs", "parallel bench points"},
    {"--threads", "threads", "block-level threads (overrides CURVEMPS_THREADS)"},
    {"--seed", "seed", "seed for the initial-state admixture"},
    {"--noise", "noise", "amplitude of the initial-state admixture"},
    {"--pattern", "pattern", "occupation pattern file for the initial state"},
    {"--eigenvalues", "eigenvalues", "number of ED eigenvalues"},
    {"--compare", "compare", "ED: second mapping for the spectrum comparison"},
    {"--tree", "tree", "TTN topology file (one edge per line)"},
    {"--edge-caps", "edge_caps", "TTN per-edge bond caps, e.g. 3-14:100"},
    {"--axis", "axis", "bench axis: U | size"},
    {"--U-values", "U_values", "bench U grid, e.g. 2,4,6"},
    {"--sizes", "sizes", "bench lattice grid, e.g. 4x4,8x8"},
    {"--observables", "observables", "per-site observables written after a ground run"},
};

}  // namespace

int main(int argc, char** argv) {
  using namespace curvemps;
  CLI::App app{"Hubbard-model ground states on space-filling-curve chains and trees"};
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> given;
  std::vector<std::pair<CLI::App*, std::string>> commands;
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"map", "write a mapping with its locality and MPO-width reports"},
           {"ground", "ground-state run with the selected engine"},
           {"ttn", "ground-state run on a tree (engine ttn_b unless --engine ttn_a)"},
           {"ed", "exact diagonalization of one charge sector"},
           {"bench", "snake vs hilbert comparison over a U or size grid"}}) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_file, "key=value config file; flags take precedence");
    sub->add_option("--set", overrides, "extra key=value setting (repeatable)");
    for (const Flag& f : kFlags) sub->add_option(f.name, given[f.key], f.help);
    commands.emplace_back(sub, name);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  std::string command;
  for (const auto& [sub, name] : commands) {
    if (sub->parsed()) command = name;
  }
  CLI::App* sub = app.get_subcommand(command);
  try {
    app::RunConfig config;
    if (command == "ttn") config.engine = app::Engine::TtnB;
    if (!config_file.empty()) app::apply_config_file(config, config_file);
    for (const Flag& f : kFlags) {
      if (sub->count(f.name) > 0) app::apply_setting(config, f.key, given[f.key]);
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      app::apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (command == "ttn" && config.engine != app::Engine::TtnA && config.engine != app::Engine::TtnB) {
      throw ConfigError("ttn runs need engine ttn_a or ttn_b");
    }
    if (command == "ed") config.engine = app::Engine::Ed;

    if (command == "map") {
      app::cmd_map(config, std::cout);
    } else if (command == "ground" || command == "ttn") {
      app::cmd_ground(config, std::cout);
    } else if (command == "ed") {
      app::cmd_ed(config, std::cout);
    } else {
      app::cmd_bench(config, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
