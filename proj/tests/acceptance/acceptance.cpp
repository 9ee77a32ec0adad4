#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curvemps/dmrg.hpp"
#include "curvemps/mpo.hpp"
#include "curvemps/oracle.hpp"
#include "curvemps/ttn.hpp"
#include "figure_orders.hpp"

using namespace curvemps;
using json = nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double x, int prec = 6) {
  std::ostringstream s;
  s << std::setprecision(prec) << x;
  return s.str();
}

std::ostream* g_log = nullptr;

template <std::size_t N>
bool same_order(const PathMapping& m, const std::array<std::pair<int, int>, N>& expect) {
  if (m.size() != static_cast<int>(N)) return false;
  for (std::size_t p = 0; p < N; ++p) {
    const SiteCoord s = m.site(static_cast<int>(p) + 1);
    if (s.row != expect[p].first || s.col != expect[p].second) return false;
  }
  return true;
}

TermList hubbard_terms(const LatticeSpec& l, const PathMapping& m, double U) {
  return mapped_terms(build_edges(l), m, {1.0, U});
}

FillingSpec half(const LatticeSpec& l) { return {l.n_sites() / 2, l.n_sites() / 2}; }

DMRGConfig schedule_config(const SweepSchedule& s, bool early_stop) {
  DMRGConfig c;
  c.schedule = s;
  c.early_stop = early_stop;
  c.log = g_log;
  return c;
}

// ---------------------------------------------------------------- cached long runs

// Sweep energies of the expensive runs, kept in the working directory so that
// criteria sharing a run (6, 8 and 9) compute it once.
std::filesystem::path cache_dir() {
  const char* env = std::getenv("CURVEMPS_ACCEPTANCE_CACHE");
  return env ? std::filesystem::path(env) : std::filesystem::current_path() / "acceptance_cache";
}

std::vector<double> cached_sweeps(const std::string& name, const std::function<DMRGResult()>& compute) {
  const auto path = cache_dir() / (name + ".json");
  if (std::ifstream in(path); in) {
    const json j = json::parse(in, nullptr, false);
    if (!j.is_discarded() && j.contains("energies")) return j["energies"].get<std::vector<double>>();
  }
  const auto t0 = std::chrono::steady_clock::now();
  const DMRGResult r = compute();
  std::vector<double> e;
  for (const auto& s : r.sweeps) e.push_back(s.energy);
  std::filesystem::create_directories(cache_dir());
  std::ofstream out(path);
  out << json{{"energies", e},
              {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}}
             .dump(1);
  return e;
}

std::vector<double> square4_run(bool hilbert) {
  const LatticeSpec l{4, 4, Boundary::Open};
  const PathMapping m = hilbert ? hilbert_map(l) : snake_map(l);
  return cached_sweeps(std::string("4x4_U6_") + (hilbert ? "hilbert" : "snake") + "_m1000", [&] {
    return ground_state(product_init(m, half(l)), compile_mpo(hubbard_terms(l, m, 6.0)),
                        schedule_config(SweepSchedule::prefix_to(1000), false));
  });
}

// ---------------------------------------------------------------- criteria

Verdict c1() {
  const bool a = same_order(hilbert_map({2, 2, Boundary::Open}), kFig1a);
  const bool b = same_order(hilbert_map({4, 4, Boundary::Open}), kFig1b);
  const bool c = same_order(hilbert_map({8, 8, Boundary::Open}), kFig2aHilbert);
  const PathMapping s = snake_map({8, 8, Boundary::Open});
  const bool anchors = s.chain_index({0, 0}) == 1 && s.chain_index({0, 7}) == 8 && s.chain_index({1, 7}) == 9;
  return {a && b && c && anchors, std::string("fig1a ") + (a ? "ok" : "differs") + ", fig1b " + (b ? "ok" : "differs") +
                                      ", fig2a " + (c ? "ok" : "differs") + ", snake anchors " +
                                      (anchors ? "ok" : "differ")};
}

Verdict c2() {
  double worst = 0.0;
  for (auto bc : {Boundary::Open, Boundary::Periodic}) {
    const LatticeSpec l{2, 2, bc};
    worst = std::max(worst, spectrum_compare(hubbard_terms(l, snake_map(l), 6.0), hubbard_terms(l, hilbert_map(l), 6.0),
                                             {2, 2}, 10));
  }
  const LatticeSpec l{2, 4, Boundary::Open};
  const TermList snake = hubbard_terms(l, snake_map(l), 6.0);
  std::vector<int> perm(8);
  std::iota(perm.begin(), perm.end(), 1);
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 3; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    worst = std::max(worst, spectrum_compare(snake, relabel_terms(snake, perm), {4, 4}, 10));
  }
  return {worst <= 1e-10, "max relative deviation " + num(worst, 3)};
}

Verdict c3() {
  double worst = 0.0;
  for (auto bc : {Boundary::Open, Boundary::Periodic}) {
    for (double U : {6.0, 8.0}) {
      const LatticeSpec l{2, 2, bc};
      const TermList terms = hubbard_terms(l, snake_map(l), U);
      const linalg::Matrix dense = to_dense_matrix(compile_mpo(terms));
      // Every charge sector of the oracle against the matching rows of the MPO matrix.
      for (int nu = 0; nu <= 4; ++nu) {
        for (int nd = 0; nd <= 4; ++nd) {
          const SectorBasis basis = make_sector_basis(4, {nu, nd});
          const linalg::Matrix h = build_sector_hamiltonian(terms, basis).to_dense();
          std::vector<Eigen::Index> idx(basis.dim());
          for (std::size_t i = 0; i < basis.dim(); ++i) {
            const auto st = basis.local_states(i);
            Eigen::Index k = 0;
            for (auto s : st) k = 4 * k + s;
            idx[i] = k;
          }
          for (std::size_t i = 0; i < basis.dim(); ++i) {
            for (std::size_t j = 0; j < basis.dim(); ++j) {
              worst = std::max(worst, std::abs(h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -
                                               dense(idx[i], idx[j])));
            }
          }
          // nothing of the MPO may leak out of the sector
          for (std::size_t i = 0; i < basis.dim(); ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < basis.dim(); ++j) row += std::abs(dense(idx[i], idx[j]));
            worst = std::max(worst, std::abs(dense.row(idx[i]).cwiseAbs().sum() - row));
          }
        }
      }
    }
  }
  return {worst <= 1e-12, "max entry deviation " + num(worst, 3)};
}

Verdict c4() {
  const LatticeSpec small{2, 2, Boundary::Open};
  const LatticeSpec wide{2, 4, Boundary::Open};
  double err_small = 0.0;
  double err_wide = 0.0;
  for (bool hilbert : {false, true}) {
    const PathMapping m = hilbert ? hilbert_map(small) : snake_map(small);
    const TermList t = hubbard_terms(small, m, 6.0);
    const double e = ground_state(product_init(m, half(small)), compile_mpo(t),
                                  schedule_config(SweepSchedule::prefix_to(100), true))
                         .final_energy;
    err_small = std::max(err_small, std::abs(e - build_and_solve(t, {2, 2}, 1).values[0]));
  }
  const PathMapping m = snake_map(wide);
  const TermList t = hubbard_terms(wide, m, 6.0);
  const double e = ground_state(product_init(m, half(wide)), compile_mpo(t),
                                schedule_config(SweepSchedule::prefix_to(300), true))
                       .final_energy;
  err_wide = std::abs(e - build_and_solve(t, {4, 4}, 1).values[0]);
  return {err_small <= 1e-8 && err_wide <= 1e-6, "2x2 error " + num(err_small, 3) + ", 2x4 error " + num(err_wide, 3)};
}

Verdict c5() {
  const LatticeSpec l{4, 4, Boundary::Open};
  const PathMapping m = snake_map(l);
  const double exact = free_fermion_energy(build_edges(l), {1.0, 0.0}, half(l));
  // The half-filled free ground state is degenerate; at m = 512 the sweeps drift
  // slowly towards its least entangled member. Mixing helps while the bond grows
  // and only adds truncation noise afterwards, so the m = 512 sweeps run pure.
  constexpr int kRepeat = 40;
  SweepSchedule s = SweepSchedule::prefix_to(512);
  for (int i = 0; i < kRepeat; ++i) s.max_bond.push_back(512);
  DMRGConfig c = schedule_config(s, true);
  c.pure_final_sweeps = kRepeat + 1;
  const DMRGResult r = ground_state(product_init(m, half(l)), compile_mpo(hubbard_terms(l, m, 0.0)), c);
  const double err = std::abs(r.final_energy - exact);
  return {err <= 1e-6, "E " + num(r.final_energy, 12) + " vs " + num(exact, 12) + ", error " + num(err, 3) + " after " +
                           std::to_string(r.sweeps.size()) + " sweeps"};
}

Verdict c6() {
  const double es = square4_run(false).back() / 16;
  const double eh = square4_run(true).back() / 16;
  const double gap = std::abs(es - eh);
  return {gap <= 1e-4, "e_snake " + num(es, 9) + ", e_hilbert " + num(eh, 9) + ", gap " + num(gap, 3)};
}

Verdict c7() {
  const LatticeSpec l{8, 8, Boundary::Open};
  std::map<bool, double> e;
  for (bool hilbert : {false, true}) {
    const PathMapping m = hilbert ? hilbert_map(l) : snake_map(l);
    const auto sweeps = cached_sweeps(std::string("8x8_U6_") + (hilbert ? "hilbert" : "snake") + "_m1000", [&] {
      return ground_state(product_init(m, half(l)), compile_mpo(hubbard_terms(l, m, 6.0)),
                          schedule_config(SweepSchedule::prefix_to(1000), false));
    });
    e[hilbert] = sweeps.back();
  }
  const double delta = delta_metric(e[false], e[true]);
  return {e[true] <= e[false] && delta > 0.0,
          "E_snake " + num(e[false], 10) + ", E_hilbert " + num(e[true], 10) + ", delta " + num(delta, 4) + "%"};
}

Verdict c8() {
  std::string detail;
  bool ok = true;
  for (bool hilbert : {false, true}) {
    const auto e = square4_run(hilbert);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < e.size(); ++i) worst = std::max(worst, e[i] - e[i - 1]);
    ok = ok && worst <= 1e-9;
    detail += std::string(hilbert ? ", hilbert" : "snake") + " max rise " + num(worst, 3) + " over " +
              std::to_string(e.size()) + " sweeps";
  }
  return {ok, detail};
}

Verdict c9() {
  const LatticeSpec l{4, 4, Boundary::Open};
  const PathMapping m = hilbert_map(l);
  const auto ttn = cached_sweeps("4x4_U6_ttnb_m250", [&] {
    SweepSchedule s = SweepSchedule::prefix_to(250);
    s.max_bond.push_back(250);
    return ttn_ground_state(build_ttn_b(2), hubbard_terms(l, m, 6.0), schedule_config(s, false),
                            default_occupations(m, half(l)));
  });
  const double e_ttn = ttn.back() / 16;
  const double e_mps = square4_run(true).back() / 16;
  const double gap = std::abs(e_ttn - e_mps);
  return {gap <= 1e-3, "e_ttn_b " + num(e_ttn, 9) + ", e_hilbert_mps " + num(e_mps, 9) + ", gap " + num(gap, 3)};
}

Verdict c10() {
  int checked = 0;
  int bad = 0;
  for (int n : {4, 8}) {
    for (auto bc : {Boundary::Open, Boundary::Periodic}) {
      const LatticeSpec l{n, n, bc};
      const EdgeList edges = build_edges(l);
      for (bool hilbert : {false, true}) {
        const PathMapping m = hilbert ? hilbert_map(l) : snake_map(l);
        const auto cuts = locality_report(m, edges).cut_profile;
        const auto bonds = compile_mpo(mapped_terms(edges, m, {1.0, 6.0})).bond_profile();
        if (bonds.size() != cuts.size()) return {false, "profile length mismatch"};
        for (std::size_t p = 0; p < cuts.size(); ++p) {
          ++checked;
          bad += bonds[p] != 2 + 4 * cuts[p];
        }
      }
    }
  }
  return {bad == 0, std::to_string(checked) + " cuts checked, " + std::to_string(bad) + " mismatches"};
}

Verdict c11() {
  std::string detail;
  bool ok = true;
  for (int cols : {2, 4}) {
    const LatticeSpec l{2, cols, Boundary::Open};
    const PathMapping m = snake_map(l);
    const DMRGResult r = ground_state(product_init(m, half(l)), compile_mpo(hubbard_terms(l, m, 6.0)),
                                      schedule_config(SweepSchedule::paper_default(), true));
    const auto& s = r.sweeps;
    const double last = s.size() >= 2 ? std::abs(s.back().energy - s[s.size() - 2].energy) : 1.0;
    const bool early = static_cast<int>(s.size()) < SweepSchedule::paper_default().size();
    ok = ok && r.converged && early && last < 1e-8;
    detail += (detail.empty() ? "" : ", ") + std::string("2x") + std::to_string(cols) + ": stopped after " +
              std::to_string(s.size()) + " sweeps, last change " + num(last, 3);
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Verdict()>> criteria = {{1, c1}, {2, c2}, {3, c3}, {4, c4},  {5, c5},  {6, c6},
                                                            {7, c7}, {8, c8}, {9, c9}, {10, c10}, {11, c11}};
  std::vector<int> chosen;
  bool extended = false;
  bool verbose = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--extended") {
      extended = true;
    } else if (a == "--verbose") {
      verbose = true;
    } else {
      chosen.push_back(std::stoi(a));
    }
  }
  if (verbose) g_log = &std::cerr;
  const bool all = chosen.empty();
  if (all) {
    for (const auto& [k, f] : criteria) chosen.push_back(k);
  }
  int failed = 0;
  for (int k : chosen) {
    const auto it = criteria.find(k);
    if (it == criteria.end()) {
      std::cerr << "no criterion " << k << "\n";
      return 2;
    }
    if (k == 7 && all && !extended) {
      std::cout << "SKIP criterion 7: extended suite, run with --extended or name it explicitly\n";
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = it->second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << v.detail << " (" << num(secs, 3) << " s)"
              << std::endl;
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
