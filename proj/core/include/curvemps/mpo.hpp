#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "curvemps/hamiltonian.hpp"
#include "curvemps/linalg.hpp"
#include "curvemps/local_ops.hpp"
#include "curvemps/mps.hpp"
#include "curvemps/symtensor.hpp"

namespace curvemps {

// One nonzero operator-valued entry W[wl][wr] = coef * op of a site tensor.
struct MPOEntry {
  int wl = 0;
  int wr = 0;
  local::Op op{};
  double coef = 1.0;
};

// Channel charges are the accumulated (bra - ket) charge of the partial
// operator placed to the left of the cut.
struct MPOSite {
  std::vector<Charge> left_charges;
  std::vector<Charge> right_charges;
  std::vector<MPOEntry> entries;
};

struct MPOperator {
  int n_sites = 0;
  std::vector<MPOSite> sites;

  // Bond dimensions at the interior cuts 1..N-1.
  std::vector<int> bond_profile() const;
  // Legs [wl(In), bra(In), ket(Out), wr(Out)]; channels grouped into sectors by
  // charge, in order of increasing charge and then channel index.
  BlockTensor site_tensor(int site) const;
};

struct MPOOptions {
  bool compress = false;
  double compress_tol = 1e-13;  // relative discarded weight per bond
};

// Finite-state-automaton construction. Interior cut channels: 0 = pass
// (identity so far), 1 = done (a full term placed), then two per hopping record
// open across the cut (forward c^dag_mu c_nu, then its conjugate).
MPOperator compile_mpo(const TermList& terms, const MPOOptions& options = {});

// Optional SVD compression of the operator bonds (sweeps both ways).
MPOperator compress_mpo(const MPOperator& mpo, double tol);

// <psi|H|psi> without normalisation.
double expectation(const MPOperator& mpo, const MPSState& state);

// Full 4^N matrix for N <= 5, basis index sum_mu s_mu 4^(N - mu).
linalg::Matrix to_dense_matrix(const MPOperator& mpo);

// H applied to one basis product state: list of (bra configuration, amplitude).
std::vector<std::pair<std::vector<std::uint8_t>, double>> apply_to_product(
    const MPOperator& mpo, const std::vector<std::uint8_t>& ket);

// CSV columns cut_position, mpo_bond_dim, strand_count.
void write_bond_profile_csv(std::ostream& out, const MPOperator& mpo, const std::vector<int>& strands);

}  // namespace curvemps
