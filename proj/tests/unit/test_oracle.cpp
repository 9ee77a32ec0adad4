#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "curvemps/oracle.hpp"
#include "fixtures.hpp"

using namespace curvemps;

TEST_CASE("free 2x2 open lattice at half filling") {
  const auto p = fixtures::hubbard(2, 2, 0.0);
  CHECK(build_and_solve(p.terms, {2, 2}, 1).values[0] == doctest::Approx(-4.0).epsilon(1e-12));
  CHECK(free_fermion_energy(build_edges(p.lattice), {1.0, 0.0}, {2, 2}) == doctest::Approx(-4.0).epsilon(1e-12));
}

TEST_CASE("single doubly occupied site") {
  TermList t;
  t.n_sites = 1;
  t.onsite.push_back({1, 6.0});
  const EDResult r = build_and_solve(t, {1, 1}, 1);
  CHECK(r.values[0] == doctest::Approx(6.0));
  CHECK(r.basis.dim() == 1);
}

TEST_CASE("two sites with one electron") {
  TermList t;
  t.n_sites = 2;
  t.hoppings.push_back({1, 2, Spin::Up, -1.0});
  t.hoppings.push_back({1, 2, Spin::Down, -1.0});
  const EDResult r = build_and_solve(t, {1, 0}, 2);
  CHECK(r.values[0] == doctest::Approx(-1.0));
  CHECK(r.values[1] == doctest::Approx(1.0));
}

TEST_CASE("sector bases") {
  const SectorBasis b = make_sector_basis(4, {2, 1});
  CHECK(b.dim() == 6 * 4);
  for (std::size_t i = 0; i < b.dim(); ++i) {
    CHECK(b.index(b.up_word(i), b.down_word(i)) == static_cast<std::int64_t>(i));
  }
  CHECK(b.index(0b1111, 0b1) == -1);
  OracleLimits tiny;
  tiny.dense_max = 4;
  tiny.iterative_max = 10;
  CHECK_THROWS_AS(make_sector_basis(4, {2, 2}, tiny), ConfigError);
}

TEST_CASE("sparse and dense paths agree") {
  const auto p = fixtures::hubbard(2, 3, 6.0);
  OracleLimits force_sparse;
  force_sparse.dense_max = 1;
  const EDResult sparse = build_and_solve(p.terms, {3, 3}, 3, force_sparse);
  const EDResult dense = build_and_solve(p.terms, {3, 3}, 3);
  CHECK(dense.dense);
  CHECK_FALSE(sparse.dense);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(sparse.values[i] - dense.values[i]) < 1e-9);
  const SparseMatrix h = build_sector_hamiltonian(p.terms, dense.basis);
  CHECK(h.max_asymmetry() < 1e-14);
}

TEST_CASE("spectra are invariant under relabelling") {
  SUBCASE("2x2 snake versus hilbert") {
    const auto s = fixtures::hubbard(2, 2, 6.0);
    const auto h = fixtures::hubbard(2, 2, 6.0, true);
    CHECK(spectrum_compare(s.terms, h.terms, {2, 2}, 6) <= 1e-10);
  }
  SUBCASE("2x4 under a random permutation") {
    const auto s = fixtures::hubbard(2, 4, 4.0, false, Boundary::Periodic);
    std::vector<int> perm(8);
    std::iota(perm.begin(), perm.end(), 1);
    std::mt19937 rng(3);
    std::shuffle(perm.begin(), perm.end(), rng);
    CHECK(spectrum_compare(s.terms, relabel_terms(s.terms, perm), {4, 4}, 4) <= 1e-10);
  }
  SUBCASE("different couplings are detected") {
    const auto a = fixtures::hubbard(2, 2, 6.0);
    const auto b = fixtures::hubbard(2, 2, 4.0);
    CHECK(spectrum_compare(a.terms, b.terms, {2, 2}, 2) > 1e-3);
  }
}

TEST_CASE("oversized sectors are refused") {
  const auto p = fixtures::hubbard(4, 4, 6.0);
  OracleLimits small;
  small.iterative_max = 1000;
  CHECK_THROWS_AS(build_and_solve(p.terms, {8, 8}, 1, small), ConfigError);
}

TEST_CASE("eigenvalue csv") {
  const auto p = fixtures::hubbard(2, 2, 0.0);
  std::ostringstream out;
  write_eigenvalues_csv(out, build_and_solve(p.terms, {2, 2}, 3));
  const std::string text = out.str();
  CHECK(text.rfind("index,eigenvalue\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}
