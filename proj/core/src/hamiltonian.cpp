#include "curvemps/hamiltonian.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace curvemps {

std::string to_string(Spin s) { return s == Spin::Up ? "up" : "down"; }

Rational Rational::parse(const std::string& text) {
  const auto fail = [&] { return ConfigError("cannot parse density '" + text + "'"); };
  if (text.empty()) throw fail();
  Rational r;
  if (const auto slash = text.find('/'); slash != std::string::npos) {
    try {
      std::size_t used = 0;
      r.num = std::stoll(text.substr(0, slash), &used);
      if (used != slash) throw fail();
      const std::string tail = text.substr(slash + 1);
      r.den = std::stoll(tail, &used);
      if (used != tail.size()) throw fail();
    } catch (const std::logic_error&) {
      throw fail();
    }
  } else {
    const auto dot = text.find('.');
    std::string digits = text;
    std::int64_t den = 1;
    if (dot != std::string::npos) {
      const std::size_t frac = text.size() - dot - 1;
      if (frac > 15) throw fail();
      digits = text.substr(0, dot) + text.substr(dot + 1);
      for (std::size_t i = 0; i < frac; ++i) den *= 10;
    }
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
      throw fail();
    }
    r.num = std::stoll(digits);
    r.den = den;
  }
  if (r.den <= 0 || r.num < 0) throw fail();
  const std::int64_t g = std::gcd(r.num, r.den);
  if (g > 1) {
    r.num /= g;
    r.den /= g;
  }
  return r;
}

TermList mapped_terms(const EdgeList& edges, const PathMapping& mapping, const HubbardParams& params) {
  if (!(mapping.lattice().n_rows == edges.lattice.n_rows &&
        mapping.lattice().n_cols == edges.lattice.n_cols)) {
    throw MappingError(MappingErrc::SizeMismatch, "mapping and edge list use different lattices");
  }
  TermList terms;
  terms.n_sites = mapping.size();
  terms.hoppings.reserve(edges.size() * 2);
  for (const Edge& e : edges.edges) {
    int a = mapping.chain_index(e.a);
    int b = mapping.chain_index(e.b);
    if (a > b) std::swap(a, b);
    terms.hoppings.push_back({a, b, Spin::Up, -params.t});
    terms.hoppings.push_back({a, b, Spin::Down, -params.t});
  }
  terms.onsite.reserve(terms.n_sites);
  for (int mu = 1; mu <= terms.n_sites; ++mu) terms.onsite.push_back({mu, params.U});
  return terms;
}

TermList relabel_terms(const TermList& terms, const std::vector<int>& new_index) {
  if (static_cast<int>(new_index.size()) != terms.n_sites) {
    throw ShapeError("relabel_terms: permutation size does not match site count");
  }
  TermList out;
  out.n_sites = terms.n_sites;
  for (const HoppingTerm& h : terms.hoppings) {
    const int a = new_index[h.mu - 1];
    const int b = new_index[h.nu - 1];
    // c^dag_a c_b + h.c. is symmetric in (a, b) for real amplitudes
    out.hoppings.push_back({std::min(a, b), std::max(a, b), h.spin, h.amplitude});
  }
  for (const OnsiteTerm& o : terms.onsite) out.onsite.push_back({new_index[o.mu - 1], o.amplitude});
  return out;
}

FillingSpec filling_to_charges(const LatticeSpec& spec, const Rational& density) {
  const std::int64_t n = spec.n_sites();
  const std::int64_t scaled = density.num * n;
  if (scaled % density.den != 0) {
    std::ostringstream msg;
    msg << "density " << density.num << "/" << density.den << " on " << n
        << " sites gives a non-integer electron count (" << std::setprecision(10)
        << density.value() * static_cast<double>(n) << "); pass --nup/--ndown explicitly";
    throw ConfigError(msg.str());
  }
  const std::int64_t electrons = scaled / density.den;
  if (electrons % 2 != 0) {
    throw ConfigError("density gives an odd electron count (" + std::to_string(electrons) +
                      "); pass --nup/--ndown explicitly");
  }
  if (electrons > 2 * n) throw ConfigError("density exceeds two electrons per site");
  const int half = static_cast<int>(electrons / 2);
  return FillingSpec{half, half};
}

double delta_metric(double e_snake, double e_hilbert) {
  if (e_hilbert == 0.0) throw NumericalError("delta_metric: hilbert energy is zero");
  return (e_snake - e_hilbert) / std::abs(e_hilbert) * 100.0;
}

void write_terms_csv(std::ostream& out, const TermList& terms) {
  out << "kind,mu,nu,spin,amplitude\n";
  out << std::setprecision(12);
  for (const HoppingTerm& h : terms.hoppings) {
    out << "hop," << h.mu << "," << h.nu << "," << to_string(h.spin) << "," << h.amplitude << "\n";
  }
  for (const OnsiteTerm& o : terms.onsite) {
    out << "onsite," << o.mu << "," << o.mu << ",both," << o.amplitude << "\n";
  }
}

TermList read_terms_csv(std::istream& in, int n_sites) {
  TermList terms;
  terms.n_sites = n_sites;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("kind", 0) == 0) continue;
    }
    std::istringstream fields(line);
    std::string kind, mu, nu, spin, amp;
    if (!std::getline(fields, kind, ',') || !std::getline(fields, mu, ',') ||
        !std::getline(fields, nu, ',') || !std::getline(fields, spin, ',') ||
        !std::getline(fields, amp)) {
      throw ConfigError("malformed term line '" + line + "'");
    }
    const int a = std::stoi(mu);
    const int b = std::stoi(nu);
    if (a < 1 || a > n_sites || b < 1 || b > n_sites) throw ConfigError("term index out of range");
    if (kind == "hop") {
      if (a >= b) throw ConfigError("hopping terms need mu < nu");
      if (spin != "up" && spin != "down") throw ConfigError("unknown spin '" + spin + "'");
      terms.hoppings.push_back({a, b, spin == "up" ? Spin::Up : Spin::Down, std::stod(amp)});
    } else if (kind == "onsite") {
      terms.onsite.push_back({a, std::stod(amp)});
    } else {
      throw ConfigError("unknown term kind '" + kind + "'");
    }
  }
  return terms;
}

}  // namespace curvemps
