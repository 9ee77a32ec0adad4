#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "curvemps/dmrg.hpp"
#include "curvemps/lanczos.hpp"
#include "curvemps/linalg.hpp"
#include "curvemps/oracle.hpp"
#include "fixtures.hpp"

using namespace curvemps;

TEST_CASE("schedules") {
  const SweepSchedule d = SweepSchedule::paper_default();
  REQUIRE(d.size() == 18);
  CHECK(d.max_bond.front() == 25);
  CHECK(d.max_bond.back() == 4000);
  CHECK(SweepSchedule::parse("25, 50,100").max_bond == std::vector<int>{25, 50, 100});
  CHECK(SweepSchedule::prefix_to(100).max_bond == std::vector<int>{25, 50, 100});
  CHECK(SweepSchedule::prefix_to(512).max_bond.back() == 512);
  CHECK(SweepSchedule::parse(d.to_string()).max_bond == d.max_bond);
  CHECK_THROWS_AS(SweepSchedule::parse("25,x"), ConfigError);
  CHECK_THROWS_AS(SweepSchedule::parse("0"), ConfigError);
}

TEST_CASE("2x2 ground states agree with exact diagonalisation") {
  for (bool hilbert : {false, true}) {
    for (auto bc : {Boundary::Open, Boundary::Periodic}) {
      const auto p = fixtures::hubbard(2, 2, 6.0, hilbert, bc);
      const DMRGResult r = fixtures::dmrg(p, fixtures::quick_config("16,32,64,64"));
      const EDResult ed = build_and_solve(p.terms, {2, 2}, 1);
      CHECK(std::abs(r.final_energy - ed.values[0]) < 1e-8);
      CHECK(r.energy_per_site == doctest::Approx(r.final_energy / 4));
    }
  }
  SUBCASE("reference value") {
    const auto p = fixtures::hubbard(2, 2, 6.0);
    CHECK(build_and_solve(p.terms, {2, 2}, 1).values[0] == doctest::Approx(-1.634603054907).epsilon(1e-11));
  }
}

TEST_CASE("atomic limit gives zero at half filling") {
  const LatticeSpec l{2, 4, Boundary::Open};
  const PathMapping m = snake_map(l);
  const TermList t = mapped_terms(build_edges(l), m, {0.0, 6.0});
  const DMRGResult r = ground_state(product_init(m, {4, 4}), compile_mpo(t), fixtures::quick_config("1,1"));
  CHECK(std::abs(r.final_energy) < 1e-12);
  CHECK(r.sweeps.front().max_bond_used == 1);
}

TEST_CASE("energies do not increase along the schedule") {
  const auto p = fixtures::hubbard(2, 4, 4.0);
  DMRGConfig c = fixtures::quick_config("4,8,16,32");
  c.early_stop = false;
  const DMRGResult r = fixtures::dmrg(p, c);
  REQUIRE(r.sweeps.size() == 4);
  for (std::size_t i = 1; i < r.sweeps.size(); ++i) {
    CHECK(r.sweeps[i].energy <= r.sweeps[i - 1].energy + 1e-10);
    CHECK(r.sweeps[i].max_bond_used <= r.sweeps[i].max_bond_target);
  }
  const double e16 = r.sweeps[2].energy;
  CHECK(build_and_solve(p.terms, {4, 4}, 1).values[0] <= e16 + 1e-12);
}

TEST_CASE("checkpoints resume to the same energy") {
  const auto p = fixtures::hubbard(2, 4, 6.0);
  const auto path = (std::filesystem::temp_directory_path() / "curvemps_ckpt_test.bin").string();
  DMRGConfig full = fixtures::quick_config("8,16,32,32");
  full.early_stop = false;
  full.pure_final_sweeps = 0;
  const DMRGResult straight = fixtures::dmrg(p, full);

  DMRGConfig head = fixtures::quick_config("8,16");
  head.early_stop = false;
  head.pure_final_sweeps = 0;
  head.checkpoint_path = path;
  fixtures::dmrg(p, head);
  DMRGConfig tail = full;
  const DMRGResult resumed = resume(path, compile_mpo(p.terms), tail);
  REQUIRE(resumed.sweeps.size() == 2);
  CHECK(resumed.sweeps.front().sweep == 3);
  CHECK(std::abs(resumed.final_energy - straight.final_energy) < 1e-10);

  const auto other = fixtures::hubbard(2, 2, 6.0);
  CHECK_THROWS(resume(path, compile_mpo(other.terms), tail));
  DMRGConfig done = fixtures::quick_config("8,16");
  CHECK_THROWS_AS(resume(path, compile_mpo(p.terms), done), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("config validation") {
  DMRGConfig c;
  c.alpha = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("restarted Lanczos finds the same lowest eigenpair") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  const int n = 200;
  linalg::Matrix a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = g(rng);
  }
  const MatVec op = [&](const linalg::Vector& x, linalg::Vector& y) { y = a * x; };
  linalg::Vector values;
  linalg::Matrix vectors;
  linalg::eigh(a, values, vectors);
  const linalg::Vector start = linalg::Vector::Ones(n);
  for (int basis : {0, 8}) {
    LanczosOptions o;
    o.max_iter = 2000;
    o.tol = 1e-10;
    o.max_basis = basis;
    const LanczosResult r = lanczos_lowest(op, start, o);
    CHECK(r.converged);
    CHECK(r.value == doctest::Approx(values[0]).epsilon(1e-10));
    CHECK(std::abs(std::abs(r.vector.dot(vectors.col(0))) - 1.0) < 1e-8);
  }
}
