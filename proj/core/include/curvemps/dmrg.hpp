#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "curvemps/mpo.hpp"
#include "curvemps/mps.hpp"

namespace curvemps {

struct SweepSchedule {
  std::vector<int> max_bond;  // one entry per sweep

  int size() const { return static_cast<int>(max_bond.size()); }
  // 25, 50, 100, ..., 4000 (18 sweeps)
  static SweepSchedule paper_default();
  // Comma-separated bond dimensions, e.g. "25,50,100".
  static SweepSchedule parse(const std::string& text);
  // Entries of the default list up to and including `m`, with m appended if absent.
  static SweepSchedule prefix_to(int m);
  std::string to_string() const;
};

struct ConvergenceCriteria {
  double trunc_threshold = 1e-7;
  double energy_threshold = 1e-8;
};

struct DMRGConfig {
  SweepSchedule schedule = SweepSchedule::paper_default();
  ConvergenceCriteria criteria;
  bool early_stop = true;
  // Density-matrix mixing: rho = rho_0 / tr + alpha * rho_pert / tr.
  double alpha = 1e-2;
  double alpha_decay = 0.1;
  double alpha_floor = 0.0;
  int pure_final_sweeps = 2;  // sweeps at the end of the schedule run with alpha = 0
  int lanczos_max_iter = 40;
  double lanczos_tol = 1e-9;
  double discard_cutoff = 1e-14;  // relative weight dropped even below max_bond
  int env_rebuild_every = 4;
  std::string checkpoint_path;     // empty: no checkpoints
  std::ostream* log = nullptr;     // per half-sweep log lines
  // TTN only: bond caps per tree edge (node labels, smaller first).
  std::map<std::pair<int, int>, int> edge_caps;

  void validate() const;
};

struct SweepRecord {
  int sweep = 0;  // 1-based
  int max_bond_target = 0;
  int max_bond_used = 0;
  double max_discarded = 0.0;
  double energy = 0.0;
  double alpha = 0.0;
  double seconds = 0.0;
};

struct DMRGResult {
  int n_sites = 0;
  double final_energy = 0.0;
  double energy_per_site = 0.0;
  std::vector<SweepRecord> sweeps;
  bool converged = false;
  MPSState final_state;
};

DMRGResult ground_state(const MPSState& init, const MPOperator& h, const DMRGConfig& config);

// Continues a checkpointed run with the schedule entries after the saved sweep.
DMRGResult resume(const std::string& state_file, const MPOperator& h, const DMRGConfig& config);

// CSV: sweep,max_bond_target,max_bond_used,max_discarded,energy,energy_per_site,alpha,seconds
void write_sweeps_csv(std::ostream& out, const DMRGResult& result);
// key=value lines for every DMRGConfig setting.
void write_config_manifest(std::ostream& out, const DMRGConfig& config);

}  // namespace curvemps
