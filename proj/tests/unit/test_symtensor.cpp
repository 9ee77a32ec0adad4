#include <doctest.h>

#include <random>

#include "curvemps/symtensor.hpp"

using namespace curvemps;

namespace {

Leg two_sector(Direction d, int a, int b) { return Leg(d, {{Charge{0, 0}, a}, {Charge{1, 0}, b}}); }

double max_diff(const BlockTensor& a, const BlockTensor& b) {
  const auto x = a.to_dense();
  const auto y = b.to_dense();
  REQUIRE(x.size() == y.size());
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

}  // namespace

TEST_CASE("flux rule decides which blocks exist") {
  const BlockTensor t({two_sector(Direction::In, 2, 3), two_sector(Direction::Out, 2, 3)});
  CHECK(t.allowed(BlockKey{0, 0}));
  CHECK(t.allowed(BlockKey{1, 1}));
  CHECK_FALSE(t.allowed(BlockKey{0, 1}));
  CHECK(t.allowed_keys().size() == 2);
}

TEST_CASE("contraction with the identity leaves a tensor unchanged") {
  std::mt19937_64 rng(1);
  const Leg a = two_sector(Direction::In, 2, 3);
  const Leg b = two_sector(Direction::Out, 3, 2);
  const Leg c(Direction::Out, {{Charge{0, 0}, 1}, {Charge{1, 0}, 2}, {Charge{-1, 0}, 1}});
  const BlockTensor t = BlockTensor::random({a, b, c}, Charge{0, 0}, rng);
  const BlockTensor id = BlockTensor::identity(b);
  const BlockTensor r = contract(t, id, {{1, 0}});
  CHECK(max_diff(r.permute({0, 2, 1}), t) < 1e-14);
}

TEST_CASE("vector dot product in one sector") {
  const Leg l(Direction::Out, {{Charge{1, 1}, 1}});
  BlockTensor x({l}, Charge{1, 1});
  BlockTensor y({l.dual()}, Charge{-1, -1});
  x.set_block(BlockKey{0}, {3.0});
  y.set_block(BlockKey{0}, {4.0});
  const BlockTensor s = contract(x, y, {{0, 0}});
  CHECK(s.rank() == 0);
  CHECK(s.to_dense().at(0) == 12.0);
}

TEST_CASE("charge-mismatched blocks contribute nothing") {
  const Leg l(Direction::Out, {{Charge{1, 0}, 1}, {Charge{0, 1}, 1}});
  BlockTensor x({l}, Charge{1, 0});
  BlockTensor y({l.dual()}, Charge{0, -1});
  x.set_block(BlockKey{0}, {2.0});
  y.set_block(BlockKey{1}, {5.0});
  const BlockTensor s = contract(x, y, {{0, 0}});
  CHECK(s.n_blocks() == 0);
  CHECK(s.norm() == 0.0);
}

TEST_CASE("svd truncation") {
  SUBCASE("rank-1 outer product") {
    const Leg l(Direction::In, {{Charge{}, 3}});
    BlockTensor t({l, l.dual()});
    t.set_block(BlockKey{0, 0}, {1, 0, 0, 0, 0, 0, 0, 0, 0});
    const SVDResult r = svd_truncate(t, {0}, {4, 0.0});
    REQUIRE(r.singular_values.size() == 1);
    CHECK(r.singular_values[0] == doctest::Approx(1.0));
    CHECK(r.discarded_weight == doctest::Approx(0.0));
  }
  SUBCASE("diag(2, 1) at max_dim 1 drops weight 1/5") {
    const Leg l(Direction::In, {{Charge{}, 2}});
    BlockTensor t({l, l.dual()});
    t.set_block(BlockKey{0, 0}, {2, 0, 0, 1});
    const SVDResult r = svd_truncate(t, {0}, {1, 0.0});
    REQUIRE(r.singular_values.size() == 1);
    CHECK(r.singular_values[0] == doctest::Approx(2.0));
    CHECK(r.discarded_weight == doctest::Approx(0.2));
  }
  SUBCASE("two-sector 4x4 reconstruction") {
    std::mt19937_64 rng(3);
    const Leg l = two_sector(Direction::In, 2, 2);
    const BlockTensor t = BlockTensor::random({l, l.dual()}, Charge{}, rng);
    SVDResult r = svd_truncate(t, {0}, {4, 0.0});
    CHECK(r.discarded_weight == doctest::Approx(0.0));
    scale_by_singular_values(r.right, 0, r.sector_values);
    const BlockTensor back = contract(r.left, r.right, {{1, 0}});
    CHECK(max_diff(back, t) < 1e-12);
    // left is an isometry
    const BlockTensor g = contract(r.left.dual(), r.left, {{0, 0}});
    CHECK(max_diff(g, BlockTensor::identity(g.leg(1))) < 1e-12);
  }
}

TEST_CASE("qr") {
  const Leg row(Direction::In, {{Charge{}, 8}});
  const Leg col(Direction::Out, {{Charge{}, 3}});
  SUBCASE("random 8x3 reconstruction") {
    std::mt19937_64 rng(5);
    const BlockTensor a = BlockTensor::random({row, col}, Charge{}, rng);
    const QRResult q = qr_orthogonalize(a, {0});
    const BlockTensor back = contract(q.isometry, q.remainder, {{1, 0}});
    CHECK(max_diff(back, a) / a.norm() < 1e-12);
  }
  SUBCASE("isometric input and a scaled isometry") {
    BlockTensor iso({row, col});
    std::vector<double> d(24, 0.0);
    d[0] = d[4] = d[8] = 1.0;
    iso.set_block(BlockKey{0, 0}, d);
    const QRResult q = qr_orthogonalize(iso, {0});
    const auto r = q.remainder.to_dense();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(std::abs(r[i * 3 + j]) == doctest::Approx(i == j ? 1.0 : 0.0));
    }
    BlockTensor scaled = iso;
    scaled.scale(2.5);
    const auto r2 = qr_orthogonalize(scaled, {0}).remainder.to_dense();
    for (int i = 0; i < 3; ++i) CHECK(std::abs(r2[i * 3 + i]) == doctest::Approx(2.5));
  }
}

TEST_CASE("eigh truncation ranks across sectors") {
  const Leg l = two_sector(Direction::In, 2, 1);
  BlockTensor rho({l, l.dual()});
  rho.set_block(BlockKey{0, 0}, {0.5, 0.0, 0.0, 0.1});
  rho.set_block(BlockKey{1, 1}, {0.4});
  const EighResult e = eigh_truncate(rho, 1, {2, 0.0});
  REQUIRE(e.kept_values.size() == 2);
  CHECK(e.kept_values[0] == doctest::Approx(0.5));
  CHECK(e.kept_values[1] == doctest::Approx(0.4));
  CHECK(e.discarded_weight == doctest::Approx(0.1));
}

TEST_CASE("permute and dual") {
  std::mt19937_64 rng(9);
  const BlockTensor t =
      BlockTensor::random({two_sector(Direction::In, 1, 2), two_sector(Direction::Out, 2, 1)}, Charge{}, rng);
  CHECK(max_diff(t.permute({1, 0}).permute({1, 0}), t) == 0.0);
  const BlockTensor d = t.dual();
  CHECK(d.leg(0).direction() == Direction::Out);
  CHECK(dot(t, t) == doctest::Approx(t.norm() * t.norm()));
}

TEST_CASE("flop counter sees contractions") {
  const Leg l(Direction::In, {{Charge{}, 10}});
  std::mt19937_64 rng(2);
  const BlockTensor a = BlockTensor::random({l, l.dual()}, Charge{}, rng);
  reset_flop_count();
  (void)contract(a, a, {{1, 0}});
  CHECK(flop_count() == 2000);
}
