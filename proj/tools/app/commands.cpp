#include "commands.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "curvemps/mpo.hpp"
#include "curvemps/mps.hpp"
#include "curvemps/oracle.hpp"
#include "curvemps/parallel.hpp"

namespace curvemps::app {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << std::setprecision(12);
  return out;
}

fs::path prepare(const RunConfig& c) {
  const fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  auto out = open_out(dir / "config.txt");
  write_settings(out, c);
  return dir;
}

json config_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& [k, v] : settings(c)) j[k] = v;
  return j;
}

json sweeps_json(const DMRGResult& r) {
  json a = json::array();
  for (const auto& s : r.sweeps) {
    a.push_back({{"sweep", s.sweep},
                 {"max_bond_target", s.max_bond_target},
                 {"max_bond_used", s.max_bond_used},
                 {"max_discarded", s.max_discarded},
                 {"energy", s.energy},
                 {"alpha", s.alpha},
                 {"seconds", s.seconds}});
  }
  return a;
}

void write_record(const fs::path& dir, const std::string& command, const RunConfig& c, json body) {
  body["command"] = command;
  body["config"] = config_json(c);
  auto out = open_out(dir / "run.json");
  out << body.dump(2) << "\n";
}

// Last sweep at each target bond dimension.
void write_energy_vs_m(std::ostream& out, const DMRGResult& r) {
  out << "max_bond,energy,energy_per_site,max_discarded\n";
  for (std::size_t i = 0; i < r.sweeps.size(); ++i) {
    const auto& s = r.sweeps[i];
    if (i + 1 < r.sweeps.size() && r.sweeps[i + 1].max_bond_target == s.max_bond_target) continue;
    out << s.max_bond_target << "," << s.energy << "," << s.energy / r.n_sites << "," << s.max_discarded << "\n";
  }
}

void set_threads(const RunConfig& c) {
  if (c.threads > 0) set_max_threads(c.threads);
}

struct MpsRun {
  DMRGResult result;
  double seconds = 0.0;
};

MpsRun run_mps(const RunConfig& c, const PathMapping& mapping, std::ostream* log) {
  const TermList terms = mapped_terms(build_edges(c.lattice), mapping, c.params);
  const MPOperator h = compile_mpo(terms);
  DMRGConfig d = dmrg_config(c);
  d.log = log;
  const auto t0 = Clock::now();
  MpsRun run;
  if (c.resume && fs::exists(c.checkpoint)) {
    run.result = resume(c.checkpoint, h, d);
  } else {
    InitOptions init;
    init.noise = c.noise;
    init.seed = c.seed;
    if (!c.pattern.empty()) {
      std::ifstream in(c.pattern);
      if (!in) throw ConfigError("cannot open pattern file " + c.pattern);
      init.pattern = load_occupation_pattern(in, mapping.size());
    }
    run.result = ground_state(product_init(mapping, filling(c), init), h, d);
  }
  run.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return run;
}

void write_observables(const fs::path& dir, const RunConfig& c, const PathMapping& mapping, const MPSState& st) {
  if (c.observables.empty()) return;
  auto out = open_out(dir / "observables.csv");
  out << "chain_index,row,col";
  for (auto o : c.observables) out << "," << local::to_string(o);
  out << "\n";
  for (int mu = 1; mu <= mapping.size(); ++mu) {
    const SiteCoord s = mapping.site(mu);
    out << mu << "," << s.row << "," << s.col;
    for (auto o : c.observables) out << "," << measure_local(st, mu, o);
    out << "\n";
  }
}

void summary(std::ostream& log, const DMRGResult& r) {
  log << std::setprecision(12) << "final_energy=" << r.final_energy << " energy_per_site=" << r.energy_per_site
      << " sweeps=" << r.sweeps.size() << " converged=" << (r.converged ? "yes" : "no") << "\n";
}

}  // namespace

void cmd_map(const RunConfig& c, std::ostream& log) {
  validate(c);
  const PathMapping mapping = make_mapping(c);
  const EdgeList edges = build_edges(c.lattice);
  const LocalityReport report = locality_report(mapping, edges);
  const fs::path dir = prepare(c);
  {
    auto out = open_out(dir / "mapping.txt");
    write_mapping(out, mapping);
  }
  {
    auto out = open_out(dir / "locality.csv");
    write_locality_metrics_csv(out, report);
  }
  {
    auto out = open_out(dir / "cut_profile.csv");
    write_cut_profile_csv(out, report);
  }
  const MPOperator h = compile_mpo(mapped_terms(edges, mapping, c.params));
  {
    auto out = open_out(dir / "mpo_bonds.csv");
    write_bond_profile_csv(out, h, report.cut_profile);
  }
  write_record(dir, "map", c,
               {{"mean_distance", report.mean_distance},
                {"max_distance", report.max_distance},
                {"max_cut", report.max_cut},
                {"mean_cut", report.mean_cut},
                {"artifacts", {"mapping.txt", "locality.csv", "cut_profile.csv", "mpo_bonds.csv"}}});
  log << std::setprecision(12) << to_string(mapping.kind()) << " " << to_string(c.lattice)
      << ": mean_distance=" << report.mean_distance << " max_distance=" << report.max_distance
      << " max_cut=" << report.max_cut << "\n";
}

void cmd_ground(const RunConfig& c, std::ostream& log) {
  if (c.engine == Engine::Ed) {
    cmd_ed(c, log);
    return;
  }
  validate(c);
  set_threads(c);
  const PathMapping mapping = make_mapping(c);
  const FillingSpec f = filling(c);
  const fs::path dir = prepare(c);
  log << "charges (" << f.n_up << "," << f.n_down << ") on " << to_string(c.lattice) << ", engine "
      << to_string(c.engine) << "\n";

  DMRGResult result;
  double seconds = 0.0;
  std::vector<std::string> artifacts{"config.txt", "sweeps.csv", "energy_vs_m.csv", "result.csv"};
  json extra = json::object();
  if (c.engine == Engine::MpsDmrg) {
    MpsRun run = run_mps(c, mapping, &log);
    result = std::move(run.result);
    seconds = run.seconds;
    write_observables(dir, c, mapping, result.final_state);
    if (!c.observables.empty()) artifacts.push_back("observables.csv");
    extra["bond_dims"] = result.final_state.bond_dims();
  } else {
    const TreeTopology tree = make_tree(c);
    const TermList terms = mapped_terms(build_edges(c.lattice), mapping, c.params);
    DMRGConfig d = dmrg_config(c);
    d.log = &log;
    const auto t0 = Clock::now();
    result = ttn_ground_state(tree, terms, d, default_occupations(mapping, f));
    seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    auto out = open_out(dir / "tree.txt");
    write_topology(out, tree);
    artifacts.push_back("tree.txt");
  }
  {
    auto out = open_out(dir / "sweeps.csv");
    write_sweeps_csv(out, result);
  }
  {
    auto out = open_out(dir / "energy_vs_m.csv");
    write_energy_vs_m(out, result);
  }
  {
    auto out = open_out(dir / "result.csv");
    out << "engine,lattice,bc,mapping,t,U,n_up,n_down,final_energy,energy_per_site,sweeps,converged,seconds\n";
    out << to_string(c.engine) << "," << c.lattice.n_rows << "x" << c.lattice.n_cols << ","
        << (c.lattice.boundary == Boundary::Open ? "obc" : "pbc") << "," << c.mapping << "," << c.params.t << ","
        << c.params.U << "," << f.n_up << "," << f.n_down << "," << result.final_energy << ","
        << result.energy_per_site << "," << result.sweeps.size() << "," << (result.converged ? 1 : 0) << ","
        << seconds << "\n";
  }
  extra["final_energy"] = result.final_energy;
  extra["energy_per_site"] = result.energy_per_site;
  extra["converged"] = result.converged;
  extra["wall_seconds"] = seconds;
  extra["sweeps"] = sweeps_json(result);
  extra["artifacts"] = artifacts;
  write_record(dir, "ground", c, std::move(extra));
  summary(log, result);
}

void cmd_ed(const RunConfig& c, std::ostream& log) {
  validate(c);
  const PathMapping mapping = make_mapping(c);
  const FillingSpec f = filling(c);
  const Charge q{f.n_up, f.n_down};
  const EdgeList edges = build_edges(c.lattice);
  const TermList terms = mapped_terms(edges, mapping, c.params);
  const fs::path dir = prepare(c);
  const auto t0 = Clock::now();
  const EDResult r = build_and_solve(terms, q, c.eigenvalues);
  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  {
    auto out = open_out(dir / "eigenvalues.csv");
    write_eigenvalues_csv(out, r);
  }
  json extra = {{"ground_energy", r.values.front()},
                {"energy_per_site", r.values.front() / c.lattice.n_sites()},
                {"sector_dim", r.basis.dim()},
                {"dense", r.dense},
                {"max_residual", r.max_residual},
                {"wall_seconds", seconds}};
  std::vector<std::string> artifacts{"config.txt", "eigenvalues.csv"};
  log << std::setprecision(12) << "sector dim " << r.basis.dim() << ", E0=" << r.values.front() << "\n";
  if (!c.compare.empty()) {
    const TermList other = mapped_terms(edges, make_mapping(c, c.compare), c.params);
    const double dev = spectrum_compare(terms, other, q, c.eigenvalues);
    auto out = open_out(dir / "spectrum_compare.csv");
    out << "mapping_a,mapping_b,eigenvalues,max_relative_deviation\n";
    out << c.mapping << "," << c.compare << "," << c.eigenvalues << "," << dev << "\n";
    artifacts.push_back("spectrum_compare.csv");
    extra["max_relative_deviation"] = dev;
    log << c.mapping << " vs " << c.compare << ": max relative deviation " << dev << "\n";
  }
  extra["artifacts"] = artifacts;
  write_record(dir, "ed", c, std::move(extra));
}

void cmd_bench(const RunConfig& c, std::ostream& log) {
  validate(c);
  struct Point {
    RunConfig config;
    std::string label;
  };
  std::vector<Point> points;
  const auto add = [&](RunConfig pc) {
    std::ostringstream label;
    label << pc.lattice.n_rows << "x" << pc.lattice.n_cols << "_U" << pc.params.U;
    pc.engine = Engine::MpsDmrg;
    pc.checkpoint.clear();
    pc.resume = false;
    points.push_back({pc, label.str()});
  };
  if (c.axis == "U") {
    const std::vector<double> us = c.u_values.empty() ? std::vector<double>{c.params.U} : c.u_values;
    for (double u : us) {
      RunConfig pc = c;
      pc.params.U = u;
      add(pc);
    }
  } else {
    const std::vector<LatticeSpec> sizes = c.sizes.empty() ? std::vector<LatticeSpec>{c.lattice} : c.sizes;
    for (LatticeSpec l : sizes) {
      RunConfig pc = c;
      l.boundary = c.lattice.boundary;
      pc.lattice = l;
      add(pc);
    }
  }
  for (const auto& p : points) {
    validate(p.config);
    (void)snake_map(p.config.lattice);
    (void)hilbert_map(p.config.lattice);
  }
  const fs::path dir = prepare(c);
  if (c.jobs > 1) set_max_threads(1);
  else set_threads(c);

  // Task 2i is the snake run of point i, 2i + 1 the hilbert run.
  std::vector<MpsRun> runs(points.size() * 2);
  std::mutex log_mutex;
  const auto task = [&](std::size_t i) {
    RunConfig pc = points[i / 2].config;
    pc.mapping = i % 2 == 0 ? "snake" : "hilbert";
    pc.out_dir = (dir / (points[i / 2].label + "_" + pc.mapping)).string();
    const fs::path sub = prepare(pc);
    std::ostringstream sweep_log;
    runs[i] = run_mps(pc, make_mapping(pc), &sweep_log);
    auto out = open_out(sub / "sweeps.csv");
    write_sweeps_csv(out, runs[i].result);
    auto lf = open_out(sub / "log.txt");
    lf << sweep_log.str();
    std::lock_guard lock(log_mutex);
    log << points[i / 2].label << " " << pc.mapping << ": E=" << std::setprecision(12) << runs[i].result.final_energy
        << " (" << std::setprecision(3) << runs[i].seconds << " s)\n";
  };
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex fail_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(fail_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::future<void>> pool;
  for (int w = 1; w < std::min<int>(c.jobs, static_cast<int>(runs.size())); ++w) {
    pool.push_back(std::async(std::launch::async, worker));
  }
  worker();
  for (auto& f : pool) f.get();
  if (failure) std::rethrow_exception(failure);

  auto out = open_out(dir / "comparison.csv");
  out << "lattice,bc,U,n_up,n_down,max_bond,e_snake,e_hilbert,e_snake_per_site,e_hilbert_per_site,delta_percent\n";
  json rows = json::array();
  for (std::size_t p = 0; p < points.size(); ++p) {
    const RunConfig& pc = points[p].config;
    const FillingSpec f = filling(pc);
    const double es = runs[2 * p].result.final_energy;
    const double eh = runs[2 * p + 1].result.final_energy;
    const int n = pc.lattice.n_sites();
    const int m = runs[2 * p + 1].result.sweeps.back().max_bond_target;
    const double delta = delta_metric(es, eh);
    out << pc.lattice.n_rows << "x" << pc.lattice.n_cols << "," << (pc.lattice.boundary == Boundary::Open ? "obc" : "pbc")
        << "," << pc.params.U << "," << f.n_up << "," << f.n_down << "," << m << "," << es << "," << eh << ","
        << es / n << "," << eh / n << "," << delta << "\n";
    rows.push_back({{"label", points[p].label}, {"e_snake", es}, {"e_hilbert", eh}, {"delta_percent", delta}});
  }
  write_record(dir, "bench", c, {{"points", rows}, {"artifacts", {"config.txt", "comparison.csv"}}});
}

}  // namespace curvemps::app
