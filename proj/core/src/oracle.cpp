#include "curvemps/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "curvemps/lanczos.hpp"
#include "curvemps/parallel.hpp"

namespace curvemps {

namespace {

std::vector<std::uint32_t> words_with_popcount(int n, int k) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t w = 0; w < (1u << n); ++w) {
    if (std::popcount(w) == k) out.push_back(w);
  }
  return out;
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Mode word: bit 2(mu-1) is (mu, down), bit 2(mu-1)+1 is (mu, up).
std::uint64_t interleave(std::uint32_t up, std::uint32_t down, int n) {
  std::uint64_t w = 0;
  for (int i = 0; i < n; ++i) {
    if (down >> i & 1u) w |= std::uint64_t{1} << (2 * i);
    if (up >> i & 1u) w |= std::uint64_t{1} << (2 * i + 1);
  }
  return w;
}

int mode_of(int mu, Spin s) { return 2 * (mu - 1) + (s == Spin::Up ? 1 : 0); }

// c^dag_{create} c_{annihilate} on a mode word; returns the sign or 0.
int hop(std::uint64_t& w, int create, int annihilate) {
  const std::uint64_t ma = std::uint64_t{1} << annihilate;
  if (!(w & ma)) return 0;
  int sign = std::popcount(w & (ma - 1)) % 2 ? -1 : 1;
  w &= ~ma;
  const std::uint64_t mc = std::uint64_t{1} << create;
  if (w & mc) return 0;
  sign *= std::popcount(w & (mc - 1)) % 2 ? -1 : 1;
  w |= mc;
  return sign;
}

void split(std::uint64_t w, int n, std::uint32_t& up, std::uint32_t& down) {
  up = down = 0;
  for (int i = 0; i < n; ++i) {
    if (w >> (2 * i) & 1u) down |= 1u << i;
    if (w >> (2 * i + 1) & 1u) up |= 1u << i;
  }
}

}  // namespace

std::int64_t SectorBasis::index(std::uint32_t u, std::uint32_t d) const {
  const auto iu = std::lower_bound(up.begin(), up.end(), u);
  const auto id = std::lower_bound(down.begin(), down.end(), d);
  if (iu == up.end() || *iu != u || id == down.end() || *id != d) return -1;
  return static_cast<std::int64_t>(iu - up.begin()) * static_cast<std::int64_t>(down.size()) +
         (id - down.begin());
}

std::vector<std::uint8_t> SectorBasis::local_states(std::size_t i) const {
  const std::uint32_t u = up_word(i);
  const std::uint32_t d = down_word(i);
  std::vector<std::uint8_t> s(n_sites);
  for (int mu = 0; mu < n_sites; ++mu) s[mu] = static_cast<std::uint8_t>((u >> mu & 1u) | ((d >> mu & 1u) << 1));
  return s;
}

SectorBasis make_sector_basis(int n_sites, Charge charge, const OracleLimits& limits) {
  if (n_sites < 1 || n_sites > 30) throw ConfigError("oracle supports 1..30 sites");
  if (charge.up < 0 || charge.down < 0 || charge.up > n_sites || charge.down > n_sites) {
    throw ConfigError("sector " + to_string(charge) + " is empty on " + std::to_string(n_sites) + " sites");
  }
  const double dim = binomial(n_sites, charge.up) * binomial(n_sites, charge.down);
  if (dim > static_cast<double>(limits.iterative_max)) {
    throw ConfigError("sector dimension " + std::to_string(static_cast<long long>(dim)) +
                      " exceeds the oracle limit of " + std::to_string(limits.iterative_max));
  }
  SectorBasis b;
  b.n_sites = n_sites;
  b.charge = charge;
  b.up = words_with_popcount(n_sites, charge.up);
  b.down = words_with_popcount(n_sites, charge.down);
  return b;
}

void SparseMatrix::multiply(const linalg::Vector& x, linalg::Vector& y) const {
  y.resize(static_cast<Eigen::Index>(n));
  const std::size_t chunk = 4096;
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  parallel_for(n_chunks, [&](std::size_t c) {
    const std::size_t end = std::min(n, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      double s = 0.0;
      for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) s += val[p] * x[col[p]];
      y[static_cast<Eigen::Index>(i)] = s;
    }
  });
}

double SparseMatrix::max_asymmetry() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
      const std::size_t j = col[p];
      const auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[j]);
      const auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[j + 1]);
      const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(i));
      const double back = (it != last && *it == i) ? val[static_cast<std::size_t>(it - col.begin())] : 0.0;
      worst = std::max(worst, std::abs(val[p] - back));
    }
  }
  return worst;
}

linalg::Matrix SparseMatrix::to_dense() const {
  linalg::Matrix m = linalg::Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) m(i, col[p]) += val[p];
  }
  return m;
}

SparseMatrix build_sector_hamiltonian(const TermList& terms, const SectorBasis& basis) {
  const int n = basis.n_sites;
  if (terms.n_sites != n) throw ShapeError("oracle: term list and basis differ in site count");
  std::vector<double> onsite(n + 1, 0.0);
  for (const auto& o : terms.onsite) onsite.at(o.mu) += o.amplitude;
  SparseMatrix h;
  h.n = basis.dim();
  h.row_ptr.assign(h.n + 1, 0);
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(h.n);
  const std::size_t chunk = 2048;
  parallel_for((h.n + chunk - 1) / chunk, [&](std::size_t c) {
    const std::size_t end = std::min(h.n, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      const std::uint32_t u = basis.up_word(i);
      const std::uint32_t d = basis.down_word(i);
      auto& row = rows[i];
      double diag = 0.0;
      for (int mu = 1; mu <= n; ++mu) {
        if ((u >> (mu - 1) & 1u) && (d >> (mu - 1) & 1u)) diag += onsite[mu];
      }
      if (diag != 0.0) row.emplace_back(static_cast<std::uint32_t>(i), diag);
      // column i is the ket; H|ket> = sum_j H_{j i}|j>, stored as row j entries via symmetry
      const std::uint64_t word = interleave(u, d, n);
      for (const auto& t : terms.hoppings) {
        const int a = mode_of(t.mu, t.spin);
        const int b = mode_of(t.nu, t.spin);
        for (const auto& [cr, an] : {std::pair{a, b}, std::pair{b, a}}) {
          std::uint64_t w = word;
          const int sign = hop(w, cr, an);
          if (sign == 0) continue;
          std::uint32_t nu, nd;
          split(w, n, nu, nd);
          const std::int64_t j = basis.index(nu, nd);
          row.emplace_back(static_cast<std::uint32_t>(j), sign * t.amplitude);
        }
      }
      std::sort(row.begin(), row.end());
      std::size_t out = 0;
      for (std::size_t p = 0; p < row.size(); ++p) {
        if (out > 0 && row[out - 1].first == row[p].first) {
          row[out - 1].second += row[p].second;
        } else {
          row[out++] = row[p];
        }
      }
      row.resize(out);
    }
  });
  // rows[i] currently lists <j|H|i>; the matrix is assembled as its transpose
  // and symmetry is checked afterwards, so a Hermiticity bug cannot hide.
  std::vector<std::size_t> count(h.n, 0);
  for (const auto& r : rows) {
    for (const auto& e : r) ++count[e.first];
  }
  for (std::size_t j = 0; j < h.n; ++j) h.row_ptr[j + 1] = h.row_ptr[j] + count[j];
  h.col.resize(h.row_ptr[h.n]);
  h.val.resize(h.row_ptr[h.n]);
  std::vector<std::size_t> fill(h.row_ptr.begin(), h.row_ptr.end() - 1);
  for (std::size_t i = 0; i < h.n; ++i) {
    for (const auto& [j, v] : rows[i]) {
      h.col[fill[j]] = static_cast<std::uint32_t>(i);
      h.val[fill[j]] = v;
      ++fill[j];
    }
  }
  const double asym = h.max_asymmetry();
  if (asym > 1e-12) {
    throw NumericalError("oracle Hamiltonian is not symmetric (max deviation " + std::to_string(asym) + ")");
  }
  return h;
}

EDResult build_and_solve(const TermList& terms, Charge charge, int k_eigenvalues, const OracleLimits& limits) {
  EDResult res;
  res.basis = make_sector_basis(terms.n_sites, charge, limits);
  const SparseMatrix h = build_sector_hamiltonian(terms, res.basis);
  const auto dim = static_cast<Eigen::Index>(h.n);
  const int k = static_cast<int>(std::min<Eigen::Index>(k_eigenvalues, dim));
  if (k < 1) throw ConfigError("build_and_solve: need at least one eigenvalue");
  if (h.n <= limits.dense_max) {
    res.dense = true;
    linalg::Vector w;
    linalg::Matrix v;
    linalg::eigh(h.to_dense(), w, v);
    res.values.assign(w.data(), w.data() + k);
    res.ground = v.col(0);
  } else {
    std::vector<linalg::Vector> locked;
    std::mt19937_64 rng(20240229);
    std::normal_distribution<double> gauss;
    const MatVec op = [&](const linalg::Vector& x, linalg::Vector& y) { h.multiply(x, y); };
    const LanczosOptions opts{static_cast<int>(std::min<Eigen::Index>(dim, 300)), 1e-11};
    for (int e = 0; e < k; ++e) {
      linalg::Vector start(dim);
      for (Eigen::Index i = 0; i < dim; ++i) start[i] = gauss(rng);
      LanczosResult r = lanczos_lowest(op, start, opts, &locked);
      for (int restart = 0; !r.converged && restart < 40; ++restart) {
        r = lanczos_lowest(op, r.vector, opts, &locked);
      }
      if (!r.converged) throw NumericalError("oracle Lanczos did not converge");
      res.values.push_back(r.value);
      locked.push_back(r.vector);
    }
    res.ground = locked.front();
    std::sort(res.values.begin(), res.values.end());
  }
  linalg::Vector hv;
  h.multiply(res.ground, hv);
  res.max_residual = (hv - res.values.front() * res.ground).norm();
  return res;
}

double free_fermion_energy(const EdgeList& edges, const HubbardParams& params, const FillingSpec& filling) {
  if (params.U != 0.0) throw ConfigError("free_fermion_energy requires U = 0");
  const int n = edges.lattice.n_sites();
  if (filling.n_up > n || filling.n_down > n || filling.n_up < 0 || filling.n_down < 0) {
    throw ConfigError("free_fermion_energy: infeasible filling");
  }
  linalg::Matrix h = linalg::Matrix::Zero(n, n);
  const int cols = edges.lattice.n_cols;
  for (const Edge& e : edges.edges) {
    const int a = e.a.row * cols + e.a.col;
    const int b = e.b.row * cols + e.b.col;
    h(a, b) -= params.t;
    h(b, a) -= params.t;
  }
  linalg::Vector w;
  linalg::Matrix v;
  linalg::eigh(h, w, v);
  double e = 0.0;
  for (int i = 0; i < filling.n_up; ++i) e += w[i];
  for (int i = 0; i < filling.n_down; ++i) e += w[i];
  return e;
}

double spectrum_compare(const TermList& a, const TermList& b, Charge charge, int k, const OracleLimits& limits) {
  const EDResult ra = build_and_solve(a, charge, k, limits);
  const EDResult rb = build_and_solve(b, charge, k, limits);
  double worst = 0.0;
  for (std::size_t i = 0; i < std::min(ra.values.size(), rb.values.size()); ++i) {
    const double scale = std::max(std::abs(ra.values[i]), std::abs(rb.values[i]));
    const double diff = std::abs(ra.values[i] - rb.values[i]);
    if (diff == 0.0) continue;
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

void write_eigenvalues_csv(std::ostream& out, const EDResult& result) {
  out << "index,eigenvalue\n" << std::setprecision(12);
  for (std::size_t i = 0; i < result.values.size(); ++i) out << i << "," << result.values[i] << "\n";
}

}  // namespace curvemps
