#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "curvemps/dmrg.hpp"
#include "curvemps/hamiltonian.hpp"
#include "curvemps/lattice.hpp"
#include "curvemps/local_ops.hpp"
#include "curvemps/ttn.hpp"

namespace curvemps::app {

enum class Engine { MpsDmrg, TtnA, TtnB, Ed };
std::string to_string(Engine e);
Engine parse_engine(const std::string& text);

struct RunConfig {
  LatticeSpec lattice{4, 4, Boundary::Open};
  std::string mapping = "hilbert";  // snake | hilbert | file:PATH
  HubbardParams params{1.0, 6.0};
  std::optional<Rational> density;  // half filling when neither density nor charges are set
  std::optional<int> n_up;
  std::optional<int> n_down;
  SweepSchedule schedule = SweepSchedule::paper_default();
  ConvergenceCriteria criteria;
  bool early_stop = true;
  double alpha = 1e-2;
  double alpha_decay = 0.1;
  int pure_final_sweeps = 2;
  int lanczos_iter = 40;
  double lanczos_tol = 1e-9;
  Engine engine = Engine::MpsDmrg;
  std::string out_dir = "out";
  std::string checkpoint;
  bool resume = false;
  int jobs = 1;
  int threads = 0;  // 0: CURVEMPS_THREADS or hardware
  std::uint64_t seed = 0;
  double noise = 0.0;
  std::string pattern;  // occupation pattern file
  int eigenvalues = 1;
  std::string compare;  // ed: second mapping for the spectrum comparison
  std::string tree;     // ttn: topology file overriding the built-in tree
  std::string edge_caps;
  std::string axis = "U";  // bench: U | size
  std::vector<double> u_values;
  std::vector<LatticeSpec> sizes;
  std::vector<local::Observable> observables;
};

// key=value assignment shared by the config file and the command line.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
// Reads key=value lines; '#' starts a comment.
void apply_config_file(RunConfig& config, const std::string& path);
// Every setting as key=value, in a fixed order.
std::vector<std::pair<std::string, std::string>> settings(const RunConfig& config);
void write_settings(std::ostream& out, const RunConfig& config);

// Throws ConfigError on anything the engines would reject later.
void validate(const RunConfig& config);

LatticeSpec parse_lattice(const std::string& text);  // "4x4"
FillingSpec filling(const RunConfig& config);
PathMapping make_mapping(const RunConfig& config, const std::string& which);
PathMapping make_mapping(const RunConfig& config);
DMRGConfig dmrg_config(const RunConfig& config);
TreeTopology make_tree(const RunConfig& config);

}  // namespace curvemps::app
