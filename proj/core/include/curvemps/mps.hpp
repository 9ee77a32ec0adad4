#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "curvemps/hamiltonian.hpp"
#include "curvemps/lattice.hpp"
#include "curvemps/local_ops.hpp"
#include "curvemps/symtensor.hpp"

namespace curvemps {

// Site tensors carry legs [left bond (In), physical (In), right bond (Out)] and
// zero flux, so each right bond sector holds the charge accumulated from the
// left. The left boundary bond is the single sector (0,0); the right boundary
// bond is the single sector total_charge.
struct MPSState {
  std::vector<BlockTensor> sites;
  int center = 1;  // 1-based orthogonality centre
  Charge total_charge;

  int size() const { return static_cast<int>(sites.size()); }
  int max_bond() const;
  std::vector<int> bond_dims() const;  // interior cuts 1..N-1
  void check() const;
};

// Product state from per-site basis indices (chain order).
MPSState product_state(const std::vector<int>& states);

// Neel pattern ((row + col) even -> up) carried through the mapping, adjusted to
// the requested charges: surplus electrons are removed from the largest chain
// indices first, missing ones are added to the smallest chain indices first.
std::vector<int> default_occupations(const PathMapping& mapping, const FillingSpec& filling);

// Reads a pattern file: one token per site in chain order, either the basis
// index 0-3 or one of empty, up, dn, ud. Text after '#' is ignored.
std::vector<int> load_occupation_pattern(std::istream& in, int n_sites);

struct InitOptions {
  std::optional<std::vector<int>> pattern;
  double noise = 0.0;       // amplitude of seeded random admixture, 0 disables
  std::uint64_t seed = 0;
  int noise_bond = 4;       // bond dimension allowed by the noise admixture
};

MPSState product_init(const PathMapping& mapping, const FillingSpec& filling,
                      const InitOptions& options = {});

MPSState canonicalize(const MPSState& state, int new_center);

double norm(const MPSState& state);
double overlap(const MPSState& a, const MPSState& b);

// Expectation value of a product of diagonal single-site operators, divided by
// the norm squared. Sites absent from the list carry the identity.
double expect_diagonal(const MPSState& state,
                       const std::vector<std::pair<int, std::array<double, local::kDim>>>& ops);

double measure_local(const MPSState& state, int site, local::Observable observable);
double measure_szsz(const MPSState& state, int site_a, int site_b);
double bond_entropy(const MPSState& state, int cut);
std::vector<double> schmidt_values(const MPSState& state, int cut);

// Dense amplitudes indexed by sum_mu s_mu * 4^(N - mu); N <= 10.
std::vector<double> to_dense(const MPSState& state);

// Random state with the given total charge, bond dimension up to max_bond.
MPSState random_state(int n_sites, Charge total, int max_bond, std::uint64_t seed);

// Container format: header line, JSON manifest, raw little-endian doubles.
// `extra` is an opaque JSON object text stored with the manifest.
void save_state(const std::string& path, const MPSState& state, const std::string& extra = "{}");
MPSState load_state(const std::string& path, std::string* extra = nullptr);

}  // namespace curvemps
