#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "curvemps/linalg.hpp"
#include "curvemps/mps.hpp"
#include "fixtures.hpp"

using namespace curvemps;

namespace {

double dense_overlap(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("product initial states") {
  const LatticeSpec l44{4, 4, Boundary::Open};
  const MPSState half = product_init(hilbert_map(l44), {8, 8});
  CHECK(half.total_charge == Charge{8, 8});
  for (int mu = 1; mu <= 16; ++mu) CHECK(measure_local(half, mu, local::Observable::Density) == 1.0);

  const LatticeSpec l88{8, 8, Boundary::Open};
  const FillingSpec f = filling_to_charges(l88, Rational::parse("0.875"));
  const MPSState doped = product_init(snake_map(l88), f);
  CHECK(doped.total_charge == Charge{28, 28});
  int empty = 0;
  for (int mu = 1; mu <= 64; ++mu) empty += measure_local(doped, mu, local::Observable::Density) == 0.0;
  CHECK(empty == 8);

  const LatticeSpec l22{2, 2, Boundary::Open};
  const auto occ = default_occupations(snake_map(l22), {2, 2});
  CHECK(occ == std::vector<int>{1, 2, 1, 2});
  CHECK(norm(product_init(snake_map(l22), {2, 2})) == doctest::Approx(1.0));
  CHECK_THROWS_AS(product_init(snake_map(l22), {5, 0}), ConfigError);
}

TEST_CASE("canonical form") {
  SUBCASE("product states are already isometric") {
    const MPSState p = product_state({1, 2, 3, 0, 1});
    const MPSState c = canonicalize(p, 1);
    CHECK(overlap(c, p) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("moving the centre N -> 1 -> N") {
    const MPSState r = random_state(6, {3, 3}, 8, 11);
    const double n0 = norm(r);
    const MPSState a = canonicalize(canonicalize(canonicalize(r, 6), 1), 6);
    CHECK(overlap(a, r) / (n0 * n0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("dense comparison on 6 sites") {
    const MPSState r = random_state(6, {3, 2}, 8, 4);
    const auto d0 = to_dense(r);
    for (int c : {1, 3, 6}) {
      const auto d = to_dense(canonicalize(r, c));
      CHECK(dense_overlap(d, d) == doctest::Approx(dense_overlap(d0, d0)).epsilon(1e-12));
      CHECK(dense_overlap(d, d0) == doctest::Approx(dense_overlap(d0, d0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("local observables on product states") {
  const MPSState up = product_state({1});
  CHECK(measure_local(up, 1, local::Observable::Density) == 1.0);
  CHECK(measure_local(up, 1, local::Observable::Sz) == 0.5);
  CHECK(measure_local(up, 1, local::Observable::DoubleOccupancy) == 0.0);
  const MPSState both = product_state({3});
  CHECK(measure_local(both, 1, local::Observable::Density) == 2.0);
  CHECK(measure_local(both, 1, local::Observable::DoubleOccupancy) == 1.0);
  CHECK(measure_local(both, 1, local::Observable::Sz) == 0.0);

  const MPSState neel = product_state({1, 2, 1, 2});
  CHECK(measure_szsz(neel, 1, 2) == -0.25);
  CHECK(measure_szsz(neel, 1, 3) == 0.25);
  for (int c = 1; c < 4; ++c) CHECK(bond_entropy(neel, c) == doctest::Approx(0.0));
}

TEST_CASE("entropy of an equal Schmidt pair is ln 2") {
  // (|up, down> - |down, up>) / sqrt 2 on two sites
  const Leg phys = local::physical_leg(Direction::In);
  const Leg left(Direction::In, {{Charge{}, 1}});
  const Leg mid(Direction::Out, {{Charge{1, 0}, 1}, {Charge{0, 1}, 1}});
  const Leg right(Direction::Out, {{Charge{1, 1}, 1}});
  BlockTensor a({left, phys, mid});
  a.set_block(BlockKey{0, 1, 0}, {1.0});
  a.set_block(BlockKey{0, 2, 1}, {1.0});
  BlockTensor b({mid.dual(), phys, right});
  b.set_block(BlockKey{0, 2, 0}, {1.0 / std::sqrt(2.0)});
  b.set_block(BlockKey{1, 1, 0}, {-1.0 / std::sqrt(2.0)});
  MPSState s;
  s.sites = {a, b};
  s.center = 2;
  s.total_charge = {1, 1};
  s.check();
  CHECK(bond_entropy(s, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("2x2 U=6 ground-state observables against the oracle") {
  const auto p = fixtures::hubbard(2, 2, 6.0);
  const DMRGResult r = fixtures::dmrg(p, fixtures::quick_config("16,32,64,64"));
  const EDResult ed = build_and_solve(p.terms, {2, 2}, 1);
  CHECK(r.final_energy == doctest::Approx(ed.values[0]).epsilon(1e-10));

  const double d1 = measure_local(r.final_state, 1, local::Observable::DoubleOccupancy);
  CHECK(d1 > 0.0);
  CHECK(d1 < 0.25);
  for (int mu = 2; mu <= 4; ++mu) {
    CHECK(measure_local(r.final_state, mu, local::Observable::DoubleOccupancy) == doctest::Approx(d1).epsilon(1e-8));
  }

  const auto sz = local::observable_diagonal(local::Observable::Sz);
  const double ref = fixtures::ed_diagonal(ed, {{1, sz}, {2, sz}});
  CHECK(std::abs(measure_szsz(r.final_state, 1, 2) - ref) < 1e-8);

  // Mid-cut entropy against the dense Schmidt decomposition.
  const auto psi = to_dense(r.final_state);
  linalg::Matrix m(16, 16);
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) m(i, j) = psi[static_cast<std::size_t>(i * 16 + j)];
  }
  linalg::Matrix u, vt;
  linalg::Vector s;
  linalg::svd(m, u, s, vt);
  double ent = 0.0;
  const double total = s.squaredNorm();
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double q = s[i] * s[i] / total;
    if (q > 0.0) ent -= q * std::log(q);
  }
  CHECK(std::abs(bond_entropy(r.final_state, 2) - ent) < 1e-10);
}

TEST_CASE("state files round-trip") {
  const MPSState r = random_state(5, {2, 3}, 6, 8);
  const auto path = (std::filesystem::temp_directory_path() / "curvemps_state_test.bin").string();
  save_state(path, r, R"({"tag":7})");
  std::string extra;
  const MPSState back = load_state(path, &extra);
  std::remove(path.c_str());
  CHECK(extra.find("\"tag\"") != std::string::npos);
  CHECK(back.total_charge == r.total_charge);
  const double n = norm(r);
  CHECK(overlap(back, r) == doctest::Approx(n * n).epsilon(1e-14));
}

TEST_CASE("occupation pattern files") {
  std::stringstream in("up dn # comment\n ud 0\n");
  CHECK(load_occupation_pattern(in, 4) == std::vector<int>{1, 2, 3, 0});
  std::stringstream bad("up dn\n");
  CHECK_THROWS_AS(load_occupation_pattern(bad, 4), ConfigError);
}
