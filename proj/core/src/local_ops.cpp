#include "curvemps/local_ops.hpp"

#include <cmath>

namespace curvemps::local {

Observable parse_observable(const std::string& name) {
  if (name == "density") return Observable::Density;
  if (name == "density_up") return Observable::DensityUp;
  if (name == "density_down") return Observable::DensityDown;
  if (name == "double_occupancy") return Observable::DoubleOccupancy;
  if (name == "sz") return Observable::Sz;
  throw ConfigError("unknown observable '" + name + "'");
}

std::string to_string(Observable o) {
  switch (o) {
    case Observable::Density: return "density";
    case Observable::DensityUp: return "density_up";
    case Observable::DensityDown: return "density_down";
    case Observable::DoubleOccupancy: return "double_occupancy";
    case Observable::Sz: return "sz";
  }
  return "?";
}

Charge state_charge(int s) { return Charge{s & 1, (s >> 1) & 1}; }

Leg physical_leg(Direction dir) {
  std::vector<Sector> sectors;
  for (int s = 0; s < kDim; ++s) sectors.push_back({state_charge(s), 1});
  return Leg(dir, std::move(sectors));
}

Op identity() { return diagonal({1, 1, 1, 1}); }
Op parity() { return diagonal({1, -1, -1, 1}); }

Op create(Spin s) {
  Op m{};
  if (s == Spin::Down) {
    m[2 * kDim + 0] = 1.0;  // |0> -> |dn>
    m[3 * kDim + 1] = 1.0;  // |up> -> |up dn>
  } else {
    m[1 * kDim + 0] = 1.0;   // |0> -> |up>
    m[3 * kDim + 2] = -1.0;  // |dn> -> -|up dn>, the down mode is passed
  }
  return m;
}

Op annihilate(Spin s) { return transpose(create(s)); }

Op number(Spin s) {
  return s == Spin::Up ? diagonal({0, 1, 0, 1}) : diagonal({0, 0, 1, 1});
}

Op double_occupancy() { return diagonal({0, 0, 0, 1}); }

Op matmul(const Op& a, const Op& b) {
  Op c{};
  for (int i = 0; i < kDim; ++i) {
    for (int k = 0; k < kDim; ++k) {
      const double x = a[i * kDim + k];
      if (x == 0.0) continue;
      for (int j = 0; j < kDim; ++j) c[i * kDim + j] += x * b[k * kDim + j];
    }
  }
  return c;
}

Op transpose(const Op& a) {
  Op t{};
  for (int i = 0; i < kDim; ++i) {
    for (int j = 0; j < kDim; ++j) t[j * kDim + i] = a[i * kDim + j];
  }
  return t;
}

Op diagonal(const std::array<double, kDim>& d) {
  Op m{};
  for (int i = 0; i < kDim; ++i) m[i * kDim + i] = d[i];
  return m;
}

std::array<double, kDim> observable_diagonal(Observable o) {
  switch (o) {
    case Observable::Density: return {0, 1, 1, 2};
    case Observable::DensityUp: return {0, 1, 0, 1};
    case Observable::DensityDown: return {0, 0, 1, 1};
    case Observable::DoubleOccupancy: return {0, 0, 0, 1};
    case Observable::Sz: return {0, 0.5, -0.5, 0};
  }
  return {};
}

bool op_charge(const Op& op, Charge& delta) {
  for (int b = 0; b < kDim; ++b) {
    for (int k = 0; k < kDim; ++k) {
      if (op[b * kDim + k] != 0.0) {
        delta = state_charge(b) - state_charge(k);
        return true;
      }
    }
  }
  return false;
}

BlockTensor to_block_tensor(const Op& op) {
  Charge delta;
  if (!op_charge(op, delta)) delta = Charge{};
  BlockTensor t({physical_leg(Direction::In), physical_leg(Direction::Out)}, -delta);
  for (int b = 0; b < kDim; ++b) {
    for (int k = 0; k < kDim; ++k) {
      const double x = op[b * kDim + k];
      if (x == 0.0) continue;
      if (!(state_charge(b) - state_charge(k) == delta)) {
        throw ShapeError("local operator does not carry a definite charge");
      }
      t.set_block(BlockKey{b, k}, {x});
    }
  }
  return t;
}

BlockTensor apply_site_op(const Op& op, const BlockTensor& t, int leg) {
  Charge delta;
  if (!op_charge(op, delta)) return BlockTensor(t.legs(), t.flux());
  // The ket index is consumed and the bra index produced on the same leg, so
  // the stored charge on that leg moves by delta.
  const Direction dir = t.leg(leg).direction();
  const Charge shift = dir == Direction::Out ? delta : -delta;
  BlockTensor out(t.legs(), t.flux() + shift);
  for (const auto& [key, data] : t.blocks()) {
    const int k = key[leg];
    for (int b = 0; b < kDim; ++b) {
      const double x = op[b * kDim + k];
      if (x == 0.0) continue;
      BlockKey nk = key;
      nk[leg] = static_cast<std::int16_t>(b);
      auto& dst = out.block(nk);
      for (std::size_t i = 0; i < data.size(); ++i) dst[i] += x * data[i];
    }
  }
  return out;
}

}  // namespace curvemps::local
