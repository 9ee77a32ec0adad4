#pragma once

#include <array>
#include <string>

#include "curvemps/hamiltonian.hpp"
#include "curvemps/symtensor.hpp"

namespace curvemps::local {

// Site basis: 0 = |0>, 1 = |up>, 2 = |down>, 3 = |up down> = c^dag_dn c^dag_up |0>.
// Within a site the down mode precedes the up mode in the Jordan-Wigner order,
// so c^dag_dn |up> = +|up down> and c^dag_up |dn> = -|up down>.
inline constexpr int kDim = 4;

// Row-major 4x4 matrix, element [bra * 4 + ket].
using Op = std::array<double, kDim * kDim>;

enum class Observable { Density, DensityUp, DensityDown, DoubleOccupancy, Sz };
Observable parse_observable(const std::string& name);
std::string to_string(Observable o);

Charge state_charge(int s);
// Physical leg with the four basis states as dimension-1 sectors, in basis order.
Leg physical_leg(Direction dir = Direction::In);

Op identity();
Op parity();
Op create(Spin s);
Op annihilate(Spin s);
Op number(Spin s);
Op double_occupancy();
Op matmul(const Op& a, const Op& b);
Op transpose(const Op& a);
Op diagonal(const std::array<double, kDim>& d);

// Diagonal of a single-site observable.
std::array<double, kDim> observable_diagonal(Observable o);

// Charge transferred to the bra by an operator (bra charge minus ket charge),
// taken from its first nonzero entry. Returns false for the zero matrix.
bool op_charge(const Op& op, Charge& delta);

// BlockTensor form with legs [phys(In), phys(Out)] acting as apply_on_leg operator.
BlockTensor to_block_tensor(const Op& op);

// Applies op to the physical leg `leg` of t, whose sectors must be the local
// basis in order. Blocks are re-keyed without permuting payloads.
BlockTensor apply_site_op(const Op& op, const BlockTensor& t, int leg);

}  // namespace curvemps::local
