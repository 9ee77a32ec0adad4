#include "curvemps/mpo.hpp"

#include <algorithm>
#include <map>
#include <ostream>

namespace curvemps {

namespace {

Charge spin_charge(Spin s) { return s == Spin::Up ? Charge{1, 0} : Charge{0, 1}; }

struct ChannelLayout {
  Leg leg;
  std::vector<std::pair<int, int>> where;  // channel -> (sector, offset)
};

ChannelLayout layout(const std::vector<Charge>& charges, Direction dir) {
  std::map<Charge, std::vector<int>> by_charge;
  for (int w = 0; w < static_cast<int>(charges.size()); ++w) by_charge[charges[w]].push_back(w);
  ChannelLayout out;
  out.where.resize(charges.size());
  std::vector<Sector> sectors;
  for (const auto& [q, list] : by_charge) {
    const int sector = static_cast<int>(sectors.size());
    for (int i = 0; i < static_cast<int>(list.size()); ++i) out.where[list[i]] = {sector, i};
    sectors.push_back({q, static_cast<int>(list.size())});
  }
  out.leg = Leg(dir, std::move(sectors));
  return out;
}

// Rebuilds the entry form from a site tensor with legs [wl, bra, ket, wr].
MPOSite site_from_tensor(const BlockTensor& t) {
  MPOSite site;
  for (const auto& s : t.leg(0).sectors()) site.left_charges.insert(site.left_charges.end(), s.dim, s.charge);
  for (const auto& s : t.leg(3).sectors()) {
    site.right_charges.insert(site.right_charges.end(), s.dim, s.charge);
  }
  std::map<std::pair<int, int>, local::Op> merged;
  for (const auto& [key, data] : t.blocks()) {
    const int dl = t.leg(0).dim(key[0]);
    const int dr = t.leg(3).dim(key[3]);
    const int l0 = t.leg(0).offset(key[0]);
    const int r0 = t.leg(3).offset(key[3]);
    for (int i = 0; i < dl; ++i) {
      for (int j = 0; j < dr; ++j) {
        const double x = data[i * dr + j];
        if (x == 0.0) continue;
        merged[{l0 + i, r0 + j}][key[1] * local::kDim + key[2]] += x;
      }
    }
  }
  for (const auto& [wlr, op] : merged) site.entries.push_back({wlr.first, wlr.second, op, 1.0});
  return site;
}

}  // namespace

std::vector<int> MPOperator::bond_profile() const {
  std::vector<int> dims;
  for (int p = 0; p + 1 < n_sites; ++p) dims.push_back(static_cast<int>(sites[p].right_charges.size()));
  return dims;
}

BlockTensor MPOperator::site_tensor(int site) const {
  const MPOSite& s = sites.at(site);
  const ChannelLayout left = layout(s.left_charges, Direction::In);
  const ChannelLayout right = layout(s.right_charges, Direction::Out);
  BlockTensor t({left.leg, local::physical_leg(Direction::In), local::physical_leg(Direction::Out), right.leg});
  for (const MPOEntry& e : s.entries) {
    const auto [ls, li] = left.where[e.wl];
    const auto [rs, ri] = right.where[e.wr];
    const int dr = right.leg.dim(rs);
    for (int b = 0; b < local::kDim; ++b) {
      for (int k = 0; k < local::kDim; ++k) {
        const double x = e.op[b * local::kDim + k];
        if (x == 0.0) continue;
        t.block(BlockKey{ls, b, k, rs})[li * dr + ri] += e.coef * x;
      }
    }
  }
  return t;
}

MPOperator compile_mpo(const TermList& terms, const MPOOptions& options) {
  const int n = terms.n_sites;
  if (n < 1) throw ConfigError("compile_mpo: no sites");
  if (terms.empty()) throw ConfigError("compile_mpo: empty term list gives the zero operator");
  std::vector<double> onsite(n + 1, 0.0);
  for (const OnsiteTerm& o : terms.onsite) {
    if (o.mu < 1 || o.mu > n) throw ConfigError("onsite term index out of range");
    onsite[o.mu] += o.amplitude;
  }
  for (const HoppingTerm& h : terms.hoppings) {
    if (h.mu < 1 || h.nu > n || h.mu >= h.nu) throw ConfigError("hopping term needs 1 <= mu < nu <= N");
  }

  // channel index of each open hopping record at each interior cut
  std::vector<std::map<int, int>> channel(n + 1);
  std::vector<std::vector<Charge>> charges(n + 1);
  charges[0] = {Charge{}};
  charges[n] = {Charge{}};
  for (int c = 1; c < n; ++c) {
    charges[c] = {Charge{}, Charge{}};
    for (int h = 0; h < static_cast<int>(terms.hoppings.size()); ++h) {
      const HoppingTerm& t = terms.hoppings[h];
      if (t.mu <= c && c < t.nu) {
        channel[c][h] = static_cast<int>(charges[c].size());
        charges[c].push_back(spin_charge(t.spin));
        charges[c].push_back(-spin_charge(t.spin));
      }
    }
  }
  const auto pass = [&](int c) { return c < n ? 0 : -1; };
  const auto done = [&](int c) { return c == 0 ? -1 : (c == n ? 0 : 1); };

  const local::Op id = local::identity();
  const local::Op par = local::parity();
  MPOperator mpo;
  mpo.n_sites = n;
  mpo.sites.resize(n);
  for (int p = 1; p <= n; ++p) {
    MPOSite& site = mpo.sites[p - 1];
    site.left_charges = charges[p - 1];
    site.right_charges = charges[p];
    const int l = p - 1;
    if (pass(l) >= 0 && pass(p) >= 0) site.entries.push_back({pass(l), pass(p), id, 1.0});
    if (done(l) >= 0 && done(p) >= 0) site.entries.push_back({done(l), done(p), id, 1.0});
    if (onsite[p] != 0.0 && pass(l) >= 0 && done(p) >= 0) {
      site.entries.push_back({pass(l), done(p), local::double_occupancy(), onsite[p]});
    }
    for (int h = 0; h < static_cast<int>(terms.hoppings.size()); ++h) {
      const HoppingTerm& t = terms.hoppings[h];
      const local::Op cd = local::create(t.spin);
      const local::Op c = local::annihilate(t.spin);
      if (p == t.mu) {
        const int w = channel[p].at(h);
        site.entries.push_back({pass(l), w, local::matmul(cd, par), t.amplitude});
        site.entries.push_back({pass(l), w + 1, local::matmul(par, c), t.amplitude});
      } else if (p > t.mu && p < t.nu) {
        const int wl = channel[l].at(h);
        const int wr = channel[p].at(h);
        site.entries.push_back({wl, wr, par, 1.0});
        site.entries.push_back({wl + 1, wr + 1, par, 1.0});
      } else if (p == t.nu) {
        const int w = channel[l].at(h);
        site.entries.push_back({w, done(p), c, 1.0});
        site.entries.push_back({w + 1, done(p), cd, 1.0});
      }
    }
  }
  if (options.compress) return compress_mpo(mpo, options.compress_tol);
  return mpo;
}

MPOperator compress_mpo(const MPOperator& mpo, double tol) {
  const int n = mpo.n_sites;
  std::vector<BlockTensor> w;
  for (int p = 0; p < n; ++p) w.push_back(mpo.site_tensor(p));
  const TruncationSpec spec{1 << 30, tol};
  for (int p = 0; p + 1 < n; ++p) {
    SVDResult svd = svd_truncate(w[p], {0, 1, 2}, spec);
    scale_by_singular_values(svd.right, 0, svd.sector_values);
    w[p] = std::move(svd.left);
    w[p + 1] = contract(svd.right, w[p + 1], {{1, 0}});
  }
  for (int p = n - 1; p > 0; --p) {
    SVDResult svd = svd_truncate(w[p], {0}, spec);
    scale_by_singular_values(svd.left, 1, svd.sector_values);
    w[p] = std::move(svd.right);
    w[p - 1] = contract(w[p - 1], svd.left, {{3, 0}});
  }
  MPOperator out;
  out.n_sites = n;
  for (int p = 0; p < n; ++p) out.sites.push_back(site_from_tensor(w[p]));
  return out;
}

double expectation(const MPOperator& mpo, const MPSState& state) {
  if (mpo.n_sites != state.size()) throw ShapeError("expectation: MPO and MPS lengths differ");
  BlockTensor w0 = mpo.site_tensor(0);
  BlockTensor env({state.sites[0].leg(0), w0.leg(0).dual(), state.sites[0].leg(0).dual()});
  env.set_block(BlockKey{0, 0, 0}, {1.0});
  for (int p = 0; p < state.size(); ++p) {
    const BlockTensor w = p == 0 ? w0 : mpo.site_tensor(p);
    const BlockTensor& a = state.sites[p];
    BlockTensor x = contract(env, a, {{2, 0}});          // [b, w, s, r]
    x = contract(x, w, {{1, 0}, {2, 2}});                // [b, r, s', wr]
    x = contract(x, a.dual(), {{0, 0}, {2, 1}});         // [r, wr, r']
    env = x.permute({2, 1, 0});
  }
  double s = 0.0;
  for (const auto& [key, data] : env.blocks()) {
    for (double v : data) s += v;
  }
  return s;
}

linalg::Matrix to_dense_matrix(const MPOperator& mpo) {
  if (mpo.n_sites > 5) throw ShapeError("to_dense_matrix supports at most 5 sites");
  std::vector<linalg::Matrix> m{linalg::Matrix::Ones(1, 1)};
  for (const MPOSite& site : mpo.sites) {
    const Eigen::Index dim = m.front().rows() * local::kDim;
    std::vector<linalg::Matrix> next(site.right_charges.size(), linalg::Matrix::Zero(dim, dim));
    for (const MPOEntry& e : site.entries) {
      const linalg::Matrix& prev = m[e.wl];
      for (int b = 0; b < local::kDim; ++b) {
        for (int k = 0; k < local::kDim; ++k) {
          const double x = e.coef * e.op[b * local::kDim + k];
          if (x == 0.0) continue;
          for (Eigen::Index i = 0; i < prev.rows(); ++i) {
            for (Eigen::Index j = 0; j < prev.cols(); ++j) {
              next[e.wr](i * local::kDim + b, j * local::kDim + k) += x * prev(i, j);
            }
          }
        }
      }
    }
    m = std::move(next);
  }
  return m.front();
}

std::vector<std::pair<std::vector<std::uint8_t>, double>> apply_to_product(
    const MPOperator& mpo, const std::vector<std::uint8_t>& ket) {
  if (static_cast<int>(ket.size()) != mpo.n_sites) throw ShapeError("apply_to_product: wrong length");
  std::map<std::pair<int, std::vector<std::uint8_t>>, double> front;
  front[{0, {}}] = 1.0;
  for (int p = 0; p < mpo.n_sites; ++p) {
    std::map<std::pair<int, std::vector<std::uint8_t>>, double> next;
    const int k = ket[p];
    for (const auto& [state, amp] : front) {
      for (const MPOEntry& e : mpo.sites[p].entries) {
        if (e.wl != state.first) continue;
        for (int b = 0; b < local::kDim; ++b) {
          const double x = e.op[b * local::kDim + k];
          if (x == 0.0) continue;
          auto prefix = state.second;
          prefix.push_back(static_cast<std::uint8_t>(b));
          next[{e.wr, std::move(prefix)}] += amp * e.coef * x;
        }
      }
    }
    front = std::move(next);
  }
  std::vector<std::pair<std::vector<std::uint8_t>, double>> out;
  for (auto& [state, amp] : front) {
    if (amp != 0.0) out.emplace_back(state.second, amp);
  }
  return out;
}

void write_bond_profile_csv(std::ostream& out, const MPOperator& mpo, const std::vector<int>& strands) {
  const auto dims = mpo.bond_profile();
  out << "cut_position,mpo_bond_dim,strand_count\n";
  for (std::size_t p = 0; p < dims.size(); ++p) {
    out << p + 1 << "," << dims[p] << "," << (p < strands.size() ? strands[p] : 0) << "\n";
  }
}

}  // namespace curvemps
