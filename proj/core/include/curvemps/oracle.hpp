#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "curvemps/hamiltonian.hpp"
#include "curvemps/lattice.hpp"
#include "curvemps/linalg.hpp"
#include "curvemps/symtensor.hpp"

namespace curvemps {

// Fixed-charge Fock basis. Bit mu-1 of a word is site mu; configurations are
// ordered lexicographically by (up word, down word).
struct SectorBasis {
  int n_sites = 0;
  Charge charge;
  std::vector<std::uint32_t> up;
  std::vector<std::uint32_t> down;

  std::size_t dim() const { return up.size() * down.size(); }
  std::uint32_t up_word(std::size_t i) const { return up[i / down.size()]; }
  std::uint32_t down_word(std::size_t i) const { return down[i % down.size()]; }
  // Index of a configuration, or -1 if it is outside the sector.
  std::int64_t index(std::uint32_t up_word, std::uint32_t down_word) const;
  // Local basis indices (0 empty, 1 up, 2 down, 3 both) in chain order.
  std::vector<std::uint8_t> local_states(std::size_t i) const;
};

struct OracleLimits {
  std::size_t dense_max = 4096;
  std::size_t iterative_max = 5'000'000;
};

SectorBasis make_sector_basis(int n_sites, Charge charge, const OracleLimits& limits = {});

// Compressed sparse rows of the sector Hamiltonian.
struct SparseMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  void multiply(const linalg::Vector& x, linalg::Vector& y) const;
  double max_asymmetry() const;
  linalg::Matrix to_dense() const;
};

// Fermion signs come from counting occupied modes below the target mode in
// the order (site 1 down, site 1 up, site 2 down, ...).
SparseMatrix build_sector_hamiltonian(const TermList& terms, const SectorBasis& basis);

struct EDResult {
  std::vector<double> values;  // ascending
  linalg::Vector ground;
  SectorBasis basis;
  bool dense = false;
  double max_residual = 0.0;
};

EDResult build_and_solve(const TermList& terms, Charge charge, int k_eigenvalues,
                         const OracleLimits& limits = {});

double free_fermion_energy(const EdgeList& edges, const HubbardParams& params, const FillingSpec& filling);

// Max relative deviation between the sorted k lowest eigenvalues.
double spectrum_compare(const TermList& a, const TermList& b, Charge charge, int k,
                        const OracleLimits& limits = {});

void write_eigenvalues_csv(std::ostream& out, const EDResult& result);

}  // namespace curvemps
