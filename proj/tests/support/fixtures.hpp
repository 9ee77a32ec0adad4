#pragma once

#include <cmath>
#include <cstdint>

#include "curvemps/dmrg.hpp"
#include "curvemps/mpo.hpp"
#include "curvemps/oracle.hpp"

namespace fixtures {

using namespace curvemps;

struct Problem {
  LatticeSpec lattice;
  PathMapping mapping;
  TermList terms;
  FillingSpec filling;
};

inline Problem hubbard(int rows, int cols, double U, bool hilbert = false, Boundary bc = Boundary::Open) {
  const LatticeSpec l{rows, cols, bc};
  PathMapping m = hilbert ? hilbert_map(l) : snake_map(l);
  TermList t = mapped_terms(build_edges(l), m, {1.0, U});
  return {l, std::move(m), std::move(t), {rows * cols / 2, rows * cols / 2}};
}

inline DMRGConfig quick_config(const std::string& schedule) {
  DMRGConfig c;
  c.schedule = SweepSchedule::parse(schedule);
  c.criteria = {1e-12, 1e-12};
  return c;
}

inline DMRGResult dmrg(const Problem& p, const DMRGConfig& c) {
  return ground_state(product_init(p.mapping, p.filling), compile_mpo(p.terms), c);
}

// <psi| prod_i diag_i |psi> over an ED ground vector; diag_i indexed by local state.
inline double ed_diagonal(const EDResult& r, const std::vector<std::pair<int, std::array<double, 4>>>& ops) {
  double acc = 0.0;
  for (std::size_t i = 0; i < r.basis.dim(); ++i) {
    const auto states = r.basis.local_states(i);
    double w = r.ground[static_cast<Eigen::Index>(i)] * r.ground[static_cast<Eigen::Index>(i)];
    for (const auto& [site, d] : ops) w *= d[states[site - 1]];
    acc += w;
  }
  return acc;
}

}  // namespace fixtures
