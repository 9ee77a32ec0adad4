#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "curvemps/linalg.hpp"
#include "curvemps/mpo.hpp"
#include "curvemps/oracle.hpp"
#include "fixtures.hpp"

using namespace curvemps;

namespace {

// Eigenvalues of the dense 4^N operator restricted to one charge sector.
linalg::Vector sector_spectrum(const linalg::Matrix& h, int n, Charge q) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    Charge c{};
    Eigen::Index rest = i;
    for (int mu = 0; mu < n; ++mu) {
      const Charge s = local::state_charge(static_cast<int>(rest % 4));
      c = c + s;
      rest /= 4;
    }
    if (c == q) idx.push_back(i);
  }
  linalg::Matrix sub(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = 0; b < idx.size(); ++b) sub(a, b) = h(idx[a], idx[b]);
  }
  linalg::Vector values;
  linalg::Matrix vectors;
  linalg::eigh(sub, values, vectors);
  return values;
}

}  // namespace

TEST_CASE("open chain of length L has operator bond 6") {
  for (int L : {4, 8, 12}) {
    TermList t;
    t.n_sites = L;
    for (int mu = 1; mu < L; ++mu) {
      t.hoppings.push_back({mu, mu + 1, Spin::Up, -1.0});
      t.hoppings.push_back({mu, mu + 1, Spin::Down, -1.0});
    }
    for (int mu = 1; mu <= L; ++mu) t.onsite.push_back({mu, 4.0});
    const auto bonds = compile_mpo(t).bond_profile();
    for (int b : bonds) CHECK(b == 6);
  }
}

TEST_CASE("bond profile is 2 + 4 x cut profile") {
  for (int n : {4, 8}) {
    for (auto bc : {Boundary::Open, Boundary::Periodic}) {
      const LatticeSpec l{n, n, bc};
      const EdgeList edges = build_edges(l);
      for (bool hilbert : {false, true}) {
        const PathMapping m = hilbert ? hilbert_map(l) : snake_map(l);
        const auto report = locality_report(m, edges);
        const auto bonds = compile_mpo(mapped_terms(edges, m, {1.0, 6.0})).bond_profile();
        REQUIRE(bonds.size() == report.cut_profile.size());
        for (std::size_t p = 0; p < bonds.size(); ++p) CHECK(bonds[p] == 2 + 4 * report.cut_profile[p]);
      }
    }
  }
}

TEST_CASE("a single on-site term needs bond 2") {
  TermList t;
  t.n_sites = 3;
  t.onsite.push_back({2, 6.0});
  for (int b : compile_mpo(t).bond_profile()) CHECK(b == 2);
}

TEST_CASE("dense operator matches the oracle spectrum") {
  for (auto bc : {Boundary::Open, Boundary::Periodic}) {
    for (double U : {6.0, 8.0}) {
      const auto p = fixtures::hubbard(2, 2, U, false, bc);
      const linalg::Matrix h = to_dense_matrix(compile_mpo(p.terms));
      CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-14);
      for (Charge q : {Charge{2, 2}, Charge{1, 2}, Charge{2, 1}, Charge{3, 1}}) {
        const linalg::Vector mine = sector_spectrum(h, 4, q);
        const EDResult ed = build_and_solve(p.terms, q, static_cast<int>(mine.size()));
        REQUIRE(ed.values.size() == static_cast<std::size_t>(mine.size()));
        for (Eigen::Index i = 0; i < mine.size(); ++i) {
          CHECK(std::abs(mine[i] - ed.values[static_cast<std::size_t>(i)]) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("compression keeps the operator") {
  const auto p = fixtures::hubbard(2, 2, 6.0, true, Boundary::Periodic);
  const MPOperator raw = compile_mpo(p.terms);
  const MPOperator small = compress_mpo(raw, 1e-13);
  CHECK((to_dense_matrix(raw) - to_dense_matrix(small)).cwiseAbs().maxCoeff() < 1e-12);
  for (std::size_t i = 0; i < raw.bond_profile().size(); ++i) {
    CHECK(small.bond_profile()[i] <= raw.bond_profile()[i]);
  }
}

TEST_CASE("expectation values of product states") {
  const LatticeSpec l{2, 2, Boundary::Open};
  const auto atomic = mapped_terms(build_edges(l), snake_map(l), {0.0, 6.0});
  CHECK(expectation(compile_mpo(atomic), product_state({1, 2, 1, 2})) == 0.0);

  TermList single;
  single.n_sites = 1;
  single.onsite.push_back({1, 6.0});
  CHECK(expectation(compile_mpo(single), product_state({3})) == doctest::Approx(6.0));

  const auto out = apply_to_product(compile_mpo(fixtures::hubbard(2, 2, 6.0).terms), {1, 2, 1, 2});
  double diag = 0.0;
  int off = 0;
  for (const auto& [bra, amp] : out) {
    if (bra == std::vector<std::uint8_t>{1, 2, 1, 2}) {
      diag += amp;
    } else {
      ++off;
    }
  }
  CHECK(diag == doctest::Approx(0.0));
  CHECK(off > 0);
}

TEST_CASE("bond profile csv") {
  const auto p = fixtures::hubbard(4, 4, 6.0, true);
  std::ostringstream out;
  write_bond_profile_csv(out, compile_mpo(p.terms), locality_report(p.mapping, build_edges(p.lattice)).cut_profile);
  const std::string s = out.str();
  CHECK(s.rfind("cut_position,mpo_bond_dim,strand_count\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 16);
}
