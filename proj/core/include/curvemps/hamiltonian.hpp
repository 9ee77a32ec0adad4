#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "curvemps/lattice.hpp"

namespace curvemps {

struct HubbardParams {
  double t = 1.0;
  double U = 0.0;
};

enum class Spin { Up, Down };
std::string to_string(Spin s);

struct FillingSpec {
  int n_up = 0;
  int n_down = 0;

  int electrons() const { return n_up + n_down; }
  double density(int n_sites) const { return static_cast<double>(electrons()) / n_sites; }
  friend bool operator==(const FillingSpec&, const FillingSpec&) = default;
};

// Exact fraction used for densities such as 7/8.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  // Accepts "7/8", "0.875", "1".
  static Rational parse(const std::string& text);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

struct HoppingTerm {
  int mu = 0;  // 1-based chain index, mu < nu
  int nu = 0;
  Spin spin = Spin::Up;
  double amplitude = 0.0;  // coefficient of c^dag_mu c_nu; the conjugate is implied
};

struct OnsiteTerm {
  int mu = 0;
  double amplitude = 0.0;  // coefficient of n_up n_down
};

struct TermList {
  int n_sites = 0;
  std::vector<HoppingTerm> hoppings;
  std::vector<OnsiteTerm> onsite;

  bool empty() const { return hoppings.empty() && onsite.empty(); }
};

TermList mapped_terms(const EdgeList& edges, const PathMapping& mapping, const HubbardParams& params);

// Relabels chain indices through new_index[old - 1] (1-based values). Hopping
// records are re-normalised to mu < nu; the operator itself is unchanged.
TermList relabel_terms(const TermList& terms, const std::vector<int>& new_index);

FillingSpec filling_to_charges(const LatticeSpec& spec, const Rational& density);

// (e_snake - e_hilbert) / |e_hilbert| * 100
double delta_metric(double e_snake, double e_hilbert);

void write_terms_csv(std::ostream& out, const TermList& terms);
TermList read_terms_csv(std::istream& in, int n_sites);

}  // namespace curvemps
