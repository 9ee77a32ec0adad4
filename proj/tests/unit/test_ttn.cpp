#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>

#include "curvemps/dmrg.hpp"
#include "curvemps/linalg.hpp"
#include "curvemps/oracle.hpp"
#include "curvemps/ttn.hpp"
#include "figure_orders.hpp"
#include "fixtures.hpp"

using namespace curvemps;

namespace {

std::vector<std::pair<int, int>> sorted_edges(std::span<const std::pair<int, int>> e) {
  std::vector<std::pair<int, int>> v(e.begin(), e.end());
  std::sort(v.begin(), v.end());
  return v;
}

linalg::Vector spectrum(const linalg::Matrix& h) {
  linalg::Vector values;
  linalg::Matrix vectors;
  linalg::eigh(h, values, vectors);
  return values;
}

}  // namespace

TEST_CASE("recursive trees reproduce the figure trees") {
  const TreeTopology a = build_ttn_a(2);
  const TreeTopology b = build_ttn_b(2);
  CHECK(a.edges == sorted_edges(kFig6aEdges));
  CHECK(b.edges == sorted_edges(kFig6bEdges));
  for (const auto* t : {&a, &b}) {
    CHECK(t->n_nodes == 16);
    CHECK(t->edges.size() == 15);
    int max_degree = 0;
    for (int n = 1; n <= 16; ++n) max_degree = std::max(max_degree, t->degree(n));
    CHECK(max_degree == 3);
  }
  CHECK(b.degree(3) == 3);
  CHECK(b.degree(14) == 3);
  CHECK(a.degree(3) == 3);
  CHECK(a.degree(9) == 2);
  // TTN-B uses lattice bonds only; TTN-A's central branch 3-9 is diagonal.
  const PathMapping h = hilbert_map({4, 4, Boundary::Open});
  auto far_edges = [&](const TreeTopology& t) {
    std::vector<std::pair<int, int>> far;
    for (const auto& [u, v] : t.edges) {
      const SiteCoord s = h.site(u);
      const SiteCoord r = h.site(v);
      if (std::abs(s.row - r.row) + std::abs(s.col - r.col) != 1) far.emplace_back(u, v);
    }
    return far;
  };
  CHECK(far_edges(a) == std::vector<std::pair<int, int>>{{3, 9}});
  CHECK(far_edges(b).empty());
  CHECK_THROWS_AS(build_ttn_a(1), ConfigError);
  for (int k : {2, 3}) {
    CHECK(build_ttn_a(k).n_nodes == (1 << (2 * k)));
    CHECK_NOTHROW(build_ttn_b(k).validate());
  }
}

TEST_CASE("topology files") {
  std::stringstream in("1 2\n2 3 # c\n\n3 4\n");
  const TreeTopology t = load_topology(in, 4);
  CHECK(t.edges == TreeTopology::path(4).edges);
  std::stringstream out;
  write_topology(out, t);
  std::stringstream back(out.str());
  CHECK(load_topology(back, 4).edges == t.edges);
  std::stringstream cyc("1 2\n2 3\n3 1\n");
  CHECK_THROWS_AS(load_topology(cyc, 3), ConfigError);
  std::stringstream few("1 2\n");
  CHECK_THROWS_AS(load_topology(few, 3), ConfigError);
}

TEST_CASE("tree operator equals the chain operator") {
  const LatticeSpec l{2, 2, Boundary::Periodic};
  const auto terms = mapped_terms(build_edges(l), hilbert_map(l), {1.0, 6.0});
  const linalg::Matrix chain = to_dense_matrix(compile_mpo(terms));
  SUBCASE("path tree: same basis") {
    const linalg::Matrix tree = ttn_operator_dense(TreeTopology::path(4), terms);
    CHECK((tree - chain).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("star tree: same spectrum") {
    const TreeTopology star = TreeTopology::from_edges(4, {{1, 2}, {1, 3}, {1, 4}});
    const linalg::Vector a = spectrum(ttn_operator_dense(star, terms));
    const linalg::Vector b = spectrum(chain);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("five-node branched tree") {
    TermList t;
    t.n_sites = 5;
    for (auto [mu, nu] : std::vector<std::pair<int, int>>{{1, 2}, {2, 3}, {2, 4}, {4, 5}, {1, 5}}) {
      t.hoppings.push_back({mu, nu, Spin::Up, -1.0});
      t.hoppings.push_back({mu, nu, Spin::Down, -0.5});
    }
    for (int mu = 1; mu <= 5; ++mu) t.onsite.push_back({mu, 1.0 + mu});
    const TreeTopology tree = TreeTopology::from_edges(5, {{1, 2}, {2, 3}, {2, 4}, {4, 5}});
    const linalg::Vector a = spectrum(ttn_operator_dense(tree, t));
    const linalg::Vector b = spectrum(to_dense_matrix(compile_mpo(t)));
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("tree operator bonds") {
  const LatticeSpec l{4, 4, Boundary::Open};
  const auto terms = mapped_terms(build_edges(l), hilbert_map(l), {1.0, 6.0});
  const auto bonds = ttn_operator_bonds(TreeTopology::path(16), terms);
  CHECK(bonds == compile_mpo(terms).bond_profile());
}

TEST_CASE("path tree matches chain DMRG") {
  const auto p = fixtures::hubbard(2, 4, 6.0);
  DMRGConfig c = fixtures::quick_config("8,16,32,64,64");
  const DMRGResult chain = fixtures::dmrg(p, c);
  const auto init = default_occupations(p.mapping, p.filling);
  TTNState st;
  const DMRGResult tree = ttn_ground_state(TreeTopology::path(8), p.terms, c, init, &st);
  CHECK(std::abs(tree.final_energy - chain.final_energy) < 1e-9);
  CHECK(st.total_charge == Charge{4, 4});
  CHECK_NOTHROW(st.check());
}

TEST_CASE("branched-tree DMRG agrees with exact diagonalisation") {
  const auto p = fixtures::hubbard(2, 4, 6.0);
  const double exact = build_and_solve(p.terms, {4, 4}, 1).values[0];
  const TreeTopology star = TreeTopology::from_edges(8, {{1, 2}, {2, 3}, {2, 7}, {3, 4}, {4, 5}, {5, 6}, {7, 8}});
  const DMRGResult r =
      ttn_ground_state(star, p.terms, fixtures::quick_config("32,64,128,256,256,256"), default_occupations(p.mapping, p.filling));
  CHECK(std::abs(r.final_energy - exact) < 1e-8);
}

TEST_CASE("atomic limit on a tree") {
  const LatticeSpec l{4, 4, Boundary::Open};
  const PathMapping m = hilbert_map(l);
  const auto terms = mapped_terms(build_edges(l), m, {0.0, 6.0});
  const DMRGResult r = ttn_ground_state(build_ttn_b(2), terms, fixtures::quick_config("1,1"),
                                        default_occupations(m, {8, 8}));
  CHECK(std::abs(r.final_energy) < 1e-12);
}

TEST_CASE("node update cost grows as m^(z+1)") {
  for (int z : {1, 2, 3}) {
    std::vector<double> x;
    std::vector<double> y;
    for (int m : {8, 16, 32}) {
      x.push_back(std::log(static_cast<double>(m)));
      y.push_back(std::log(static_cast<double>(ttn_node_update_flops(z, m))));
    }
    const double mx = (x[0] + x[1] + x[2]) / 3;
    const double my = (y[0] + y[1] + y[2]) / 3;
    double sxy = 0.0;
    double sxx = 0.0;
    for (int i = 0; i < 3; ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
    }
    CHECK(std::abs(sxy / sxx - (z + 1)) < 0.2);
  }
}

TEST_CASE("edge caps must name tree edges") {
  const auto p = fixtures::hubbard(2, 2, 6.0);
  DMRGConfig c = fixtures::quick_config("4");
  c.edge_caps[{1, 3}] = 2;
  CHECK_THROWS_AS(ttn_ground_state(TreeTopology::path(4), p.terms, c, {1, 2, 1, 2}), ConfigError);
}
