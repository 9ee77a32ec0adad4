#include "curvemps/dmrg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "curvemps/lanczos.hpp"
#include "curvemps/linalg.hpp"

namespace curvemps {

// ---------------------------------------------------------------- schedule

SweepSchedule SweepSchedule::paper_default() {
  return {{25, 50, 100, 150, 200, 300, 400, 600, 800, 1200, 1600, 2000, 2000, 3000, 3000, 4000, 4000, 4000}};
}

SweepSchedule SweepSchedule::parse(const std::string& text) {
  SweepSchedule s;
  std::stringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (tok.empty()) continue;
    std::size_t used = 0;
    int m = 0;
    try {
      m = std::stoi(tok, &used);
    } catch (const std::exception&) {
      throw ConfigError("schedule entry '" + tok + "' is not an integer");
    }
    if (used != tok.size() || m < 1) throw ConfigError("schedule entry '" + tok + "' must be a positive integer");
    s.max_bond.push_back(m);
  }
  if (s.max_bond.empty()) throw ConfigError("schedule is empty");
  return s;
}

SweepSchedule SweepSchedule::prefix_to(int m) {
  SweepSchedule s;
  for (int x : paper_default().max_bond) {
    if (x >= m) break;
    s.max_bond.push_back(x);
  }
  s.max_bond.push_back(m);
  return s;
}

std::string SweepSchedule::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < max_bond.size(); ++i) out += (i ? "," : "") + std::to_string(max_bond[i]);
  return out;
}

void DMRGConfig::validate() const {
  if (schedule.max_bond.empty()) throw ConfigError("schedule is empty");
  if (!(criteria.trunc_threshold > 0.0) || !(criteria.energy_threshold > 0.0)) {
    throw ConfigError("convergence thresholds must be positive");
  }
  if (alpha < 0.0 || alpha_floor < 0.0) throw ConfigError("mixing weight must be non-negative");
  if (lanczos_max_iter < 2) throw ConfigError("eigensolver iteration cap must be at least 2");
  if (env_rebuild_every < 1) throw ConfigError("env_rebuild_every must be positive");
}

namespace {

using Mat = Eigen::MatrixXd;
using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------- block structures

struct Bond {
  std::vector<Charge> q;
  std::vector<int> dim;
  std::map<Charge, int> index;

  int find(Charge c) const {
    const auto it = index.find(c);
    return it == index.end() ? -1 : it->second;
  }
  int size() const { return static_cast<int>(q.size()); }
  int total() const {
    int t = 0;
    for (int d : dim) t += d;
    return t;
  }
  void add(Charge c, int d) {
    index[c] = static_cast<int>(q.size());
    q.push_back(c);
    dim.push_back(d);
  }
  Leg leg(Direction dir) const {
    std::vector<Sector> s;
    for (int i = 0; i < size(); ++i) s.push_back({q[i], dim[i]});
    return Leg(dir, std::move(s));
  }
  static Bond from_leg(const Leg& l) {
    Bond b;
    for (const auto& s : l.sectors()) b.add(s.charge, s.dim);
    return b;
  }
};

// a[l][s] maps left sector l to right sector (q_l + q_s); empty if absent.
struct Site {
  std::vector<std::array<Mat, 4>> a;
};

// env.w[channel][ket sector] is (bra x ket) with bra charge = ket charge + channel charge.
struct Env {
  std::vector<std::vector<Mat>> w;
};

Charge sq(int s) { return local::state_charge(s); }

// Two-site operator pieces between a left and a right channel.
struct PairOp {
  int wl = 0;
  int wr = 0;
  // per input (s1*4+s2): list of (output index, value)
  std::array<std::vector<std::pair<int, double>>, 16> by_input;
};

std::vector<PairOp> pair_ops(const MPOSite& w1, const MPOSite& w2) {
  std::map<std::pair<int, int>, std::array<double, 256>> acc;
  std::map<int, std::vector<const MPOEntry*>> second;
  for (const auto& e : w2.entries) second[e.wl].push_back(&e);
  for (const auto& e1 : w1.entries) {
    const auto it = second.find(e1.wr);
    if (it == second.end()) continue;
    for (const MPOEntry* e2 : it->second) {
      auto& m = acc.try_emplace({e1.wl, e2->wr}, std::array<double, 256>{}).first->second;
      for (int b1 = 0; b1 < 4; ++b1) {
        for (int k1 = 0; k1 < 4; ++k1) {
          const double x1 = e1.coef * e1.op[b1 * 4 + k1];
          if (x1 == 0.0) continue;
          for (int b2 = 0; b2 < 4; ++b2) {
            for (int k2 = 0; k2 < 4; ++k2) {
              const double x2 = e2->coef * e2->op[b2 * 4 + k2];
              if (x2 == 0.0) continue;
              m[(b1 * 4 + b2) * 16 + (k1 * 4 + k2)] += x1 * x2;
            }
          }
        }
      }
    }
  }
  std::vector<PairOp> out;
  for (const auto& [key, m] : acc) {
    PairOp p;
    p.wl = key.first;
    p.wr = key.second;
    bool any = false;
    for (int o = 0; o < 16; ++o) {
      for (int i = 0; i < 16; ++i) {
        if (m[o * 16 + i] != 0.0) {
          p.by_input[i].emplace_back(o, m[o * 16 + i]);
          any = true;
        }
      }
    }
    if (any) out.push_back(std::move(p));
  }
  return out;
}

struct ThetaBlock {
  int l, s1, s2, r;
  int rows, cols;
  std::size_t offset;
};

struct ThetaLayout {
  std::vector<ThetaBlock> blocks;
  std::vector<int> lookup;  // (l * 16 + s1 * 4 + s2) -> block or -1
  std::size_t size = 0;

  int find(int l, int s1, int s2) const { return lookup[(l * 16) + s1 * 4 + s2]; }
};

ThetaLayout make_layout(const Bond& left, const Bond& right) {
  ThetaLayout t;
  t.lookup.assign(static_cast<std::size_t>(left.size()) * 16, -1);
  for (int l = 0; l < left.size(); ++l) {
    for (int s1 = 0; s1 < 4; ++s1) {
      for (int s2 = 0; s2 < 4; ++s2) {
        const int r = right.find(left.q[l] + sq(s1) + sq(s2));
        if (r < 0) continue;
        t.lookup[l * 16 + s1 * 4 + s2] = static_cast<int>(t.blocks.size());
        t.blocks.push_back({l, s1, s2, r, left.dim[l], right.dim[r], t.size});
        t.size += static_cast<std::size_t>(left.dim[l]) * right.dim[r];
      }
    }
  }
  return t;
}

using CMap = Eigen::Map<const Mat>;
using MMap = Eigen::Map<Mat>;

// ---------------------------------------------------------------- engine

class Engine {
 public:
  Engine(const MPOperator& h, const DMRGConfig& cfg) : h_(h), cfg_(cfg), n_(h.n_sites) {
    for (int p = 0; p + 1 < n_; ++p) {
      pairs_.push_back(pair_ops(h.sites[p], h.sites[p + 1]));
      std::map<int, std::vector<int>> by;
      for (int k = 0; k < static_cast<int>(pairs_.back().size()); ++k) by[pairs_.back()[k].wl].push_back(k);
      pairs_by_wl_.push_back(std::move(by));
    }
  }

  void load(const MPSState& st);
  MPSState export_state() const;
  void build_right_envs();
  double sweep_half(bool left_to_right, int max_bond, double alpha, double& max_disc, int& max_used);

 private:
  Env left_update(const Env& L, const Site& A, int p) const;
  Env right_update(const Env& R, const Site& B, int p) const;
  void matvec(int p, const ThetaLayout& lay, const double* in, double* out) const;
  double split(int p, const ThetaLayout& lay, const linalg::Vector& theta, bool left_to_right, int max_bond,
               double alpha);

  const MPOperator& h_;
  const DMRGConfig& cfg_;
  int n_;
  Charge total_;
  std::vector<std::vector<PairOp>> pairs_;
  std::vector<std::map<int, std::vector<int>>> pairs_by_wl_;
  std::vector<Bond> bonds_;  // bonds_[c] sits at cut c, c = 0..N
  std::vector<Site> sites_;
  std::vector<Env> lenv_;    // lenv_[c]: sites 0..c-1
  std::vector<Env> renv_;    // renv_[c]: sites c..N-1
};

void Engine::load(const MPSState& st) {
  if (st.size() != n_) throw ConfigError("initial state length does not match the Hamiltonian");
  total_ = st.total_charge;
  const MPSState c = canonicalize(st, 1);
  bonds_.clear();
  sites_.assign(n_, {});
  for (int p = 0; p < n_; ++p) bonds_.push_back(Bond::from_leg(c.sites[p].leg(0)));
  bonds_.push_back(Bond::from_leg(c.sites[n_ - 1].leg(2)));
  for (int p = 0; p < n_; ++p) {
    const BlockTensor& t = c.sites[p];
    Site& s = sites_[p];
    s.a.assign(bonds_[p].size(), {});
    for (const auto& [key, data] : t.blocks()) {
      const int dl = t.leg(0).dim(key[0]);
      const int dr = t.leg(2).dim(key[2]);
      Mat m(dl, dr);
      for (int i = 0; i < dl; ++i) {
        for (int j = 0; j < dr; ++j) m(i, j) = data[i * dr + j];
      }
      s.a[key[0]][key[1]] = std::move(m);
    }
  }
  lenv_.assign(n_ + 1, {});
  renv_.assign(n_ + 1, {});
  lenv_[0].w = {{Mat::Ones(1, 1)}};
  renv_[n_].w = {{Mat::Ones(1, 1)}};
  if (!(bonds_[0].q[0] == Charge{}) || bonds_[0].total() != 1) {
    throw ConfigError("initial state has a malformed left boundary");
  }
}

MPSState Engine::export_state() const {
  MPSState st;
  st.total_charge = total_;
  st.center = 1;
  for (int p = 0; p < n_; ++p) {
    BlockTensor t({bonds_[p].leg(Direction::In), local::physical_leg(), bonds_[p + 1].leg(Direction::Out)});
    for (int l = 0; l < bonds_[p].size(); ++l) {
      for (int s = 0; s < 4; ++s) {
        const Mat& m = sites_[p].a[l][s];
        if (m.size() == 0) continue;
        const int r = bonds_[p + 1].find(bonds_[p].q[l] + sq(s));
        std::vector<double> data(static_cast<std::size_t>(m.size()));
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
          for (Eigen::Index j = 0; j < m.cols(); ++j) data[i * m.cols() + j] = m(i, j);
        }
        t.set_block(BlockKey{l, s, r}, std::move(data));
      }
    }
    st.sites.push_back(std::move(t));
  }
  return st;
}

void Engine::build_right_envs() {
  for (int p = n_ - 1; p >= 1; --p) renv_[p] = right_update(renv_[p + 1], sites_[p], p);
}

Env Engine::left_update(const Env& L, const Site& A, int p) const {
  const MPOSite& w = h_.sites[p];
  const Bond& bl = bonds_[p];
  const Bond& br = bonds_[p + 1];
  Env out;
  out.w.assign(w.right_charges.size(), std::vector<Mat>(br.size()));
  std::map<int, std::vector<const MPOEntry*>> by_wl;
  for (const auto& e : w.entries) by_wl[e.wl].push_back(&e);
  // Z[(wr, b, s', r)] accumulates coef * op * L[wl][l] A[l][s]
  std::map<std::array<int, 4>, Mat> z;
  for (const auto& [wl, entries] : by_wl) {
    if (wl >= static_cast<int>(L.w.size())) continue;
    for (int l = 0; l < bl.size(); ++l) {
      const Mat& lm = L.w[wl][l];
      if (lm.size() == 0) continue;
      const int b = bl.find(bl.q[l] + w.left_charges[wl]);
      if (b < 0) continue;
      for (int s = 0; s < 4; ++s) {
        const Mat& a = A.a[l][s];
        if (a.size() == 0) continue;
        const int r = br.find(bl.q[l] + sq(s));
        const Mat y = lm * a;
        for (const MPOEntry* e : entries) {
          for (int s2 = 0; s2 < 4; ++s2) {
            const double x = e->coef * e->op[s2 * 4 + s];
            if (x == 0.0 || A.a[b][s2].size() == 0) continue;
            auto [it, fresh] = z.try_emplace({e->wr, b, s2, r});
            if (fresh) {
              it->second = x * y;
            } else {
              it->second += x * y;
            }
          }
        }
      }
    }
  }
  for (const auto& [key, m] : z) {
    const auto [wr, b, s2, r] = key;
    Mat& target = out.w[wr][r];
    const Mat& a = A.a[b][s2];
    if (target.size() == 0) {
      target.noalias() = a.transpose() * m;
    } else {
      target.noalias() += a.transpose() * m;
    }
  }
  return out;
}

Env Engine::right_update(const Env& R, const Site& B, int p) const {
  const MPOSite& w = h_.sites[p];
  const Bond& bl = bonds_[p];
  const Bond& br = bonds_[p + 1];
  Env out;
  out.w.assign(w.left_charges.size(), std::vector<Mat>(bl.size()));
  std::map<int, std::vector<const MPOEntry*>> by_wr;
  for (const auto& e : w.entries) by_wr[e.wr].push_back(&e);
  // Z[(wl, b, s', l)] accumulates coef * op * R[wr][r] B[l][s]^T
  std::map<std::array<int, 4>, Mat> z;
  for (const auto& [wr, entries] : by_wr) {
    if (wr >= static_cast<int>(R.w.size())) continue;
    for (int l = 0; l < bl.size(); ++l) {
      for (int s = 0; s < 4; ++s) {
        const Mat& bm = B.a[l][s];
        if (bm.size() == 0) continue;
        const int r = br.find(bl.q[l] + sq(s));
        const Mat& rm = R.w[wr][r];
        if (rm.size() == 0) continue;
        const Mat y = rm * bm.transpose();
        for (const MPOEntry* e : entries) {
          const int b = bl.find(bl.q[l] + w.left_charges[e->wl]);
          if (b < 0) continue;
          for (int s2 = 0; s2 < 4; ++s2) {
            const double x = e->coef * e->op[s2 * 4 + s];
            if (x == 0.0 || B.a[b][s2].size() == 0) continue;
            auto [it, fresh] = z.try_emplace({e->wl, b, s2, l});
            if (fresh) {
              it->second = x * y;
            } else {
              it->second += x * y;
            }
          }
        }
      }
    }
  }
  for (const auto& [key, m] : z) {
    const auto [wl, b, s2, l] = key;
    Mat& target = out.w[wl][l];
    const Mat& bm = B.a[b][s2];
    if (target.size() == 0) {
      target.noalias() = bm * m;
    } else {
      target.noalias() += bm * m;
    }
  }
  return out;
}


void Engine::matvec(int p, const ThetaLayout& lay, const double* in, double* out) const {
  std::fill(out, out + lay.size, 0.0);
  const Env& L = lenv_[p];
  const Env& R = renv_[p + 2];
  const Bond& bl = bonds_[p];
  const MPOSite& w1 = h_.sites[p];
  const auto& ops = pairs_[p];
  for (const auto& [wl, list] : pairs_by_wl_[p]) {
    const Charge cw = w1.left_charges[wl];
    for (const ThetaBlock& t : lay.blocks) {
      const Mat& lm = L.w[wl][t.l];
      if (lm.size() == 0) continue;
      const int lb = bl.find(bl.q[t.l] + cw);
      if (lb < 0) continue;
      const int in_idx = t.s1 * 4 + t.s2;
      Mat x;
      for (int k : list) {
        const PairOp& op = ops[k];
        const auto& outs = op.by_input[in_idx];
        if (outs.empty()) continue;
        const Mat& rm = R.w[op.wr][t.r];
        if (rm.size() == 0) continue;
        if (x.size() == 0) x.noalias() = lm * CMap(in + t.offset, t.rows, t.cols);
        const Mat g = x * rm.transpose();
        for (const auto& [o, val] : outs) {
          const int tb = lay.find(lb, o / 4, o % 4);
          if (tb < 0) continue;
          const ThetaBlock& dst = lay.blocks[tb];
          MMap(out + dst.offset, dst.rows, dst.cols) += val * g;
        }
      }
    }
  }
}

// Index space on one side of the two-site cut, grouped by middle charge.
struct Space {
  std::vector<std::pair<int, int>> parts;  // (bond sector, local state)
  std::vector<int> offset;
  std::vector<int> dim;
  int total = 0;
  std::map<std::pair<int, int>, int> where;

  void add(int sector, int s, int d) {
    where[{sector, s}] = static_cast<int>(parts.size());
    parts.emplace_back(sector, s);
    offset.push_back(total);
    dim.push_back(d);
    total += d;
  }
  int off(int sector, int s) const { return offset[where.at({sector, s})]; }
};

struct Candidate {
  double weight;
  Charge q;
  int index;
};

bool feasible(Charge q, Charge total, int n_left, int n_right) {
  const auto ok = [&](int x, int t) { return x >= 0 && x <= n_left && t - x >= 0 && t - x <= n_right; };
  return ok(q.up, total.up) && ok(q.down, total.down);
}

double Engine::split(int p, const ThetaLayout& lay, const linalg::Vector& theta, bool left_to_right,
                     int max_bond, double alpha) {
  const Bond& bl = bonds_[p];
  const Bond& br = bonds_[p + 2];
  const int n_left = p + 1;
  const int n_right = n_ - p - 1;

  std::map<Charge, Space> lspace;
  std::map<Charge, Space> rspace;
  const auto left_space = [&](Charge q) -> Space& {
    auto [it, fresh] = lspace.try_emplace(q);
    if (fresh) {
      for (int l = 0; l < bl.size(); ++l) {
        for (int s = 0; s < 4; ++s) {
          if (bl.q[l] + sq(s) == q) it->second.add(l, s, bl.dim[l]);
        }
      }
    }
    return it->second;
  };
  const auto right_space = [&](Charge q) -> Space& {
    auto [it, fresh] = rspace.try_emplace(q);
    if (fresh) {
      for (int s = 0; s < 4; ++s) {
        for (int r = 0; r < br.size(); ++r) {
          if (br.q[r] - sq(s) == q) it->second.add(r, s, br.dim[r]);
        }
      }
    }
    return it->second;
  };

  // Dense matrix per middle charge.
  std::map<Charge, std::vector<int>> group_blocks;
  for (int b = 0; b < static_cast<int>(lay.blocks.size()); ++b) {
    const ThetaBlock& t = lay.blocks[b];
    group_blocks[bl.q[t.l] + sq(t.s1)].push_back(b);
  }
  std::map<Charge, Mat> m;
  double norm2 = 0.0;
  for (const auto& [q, list] : group_blocks) {
    const Space& ls = left_space(q);
    const Space& rs = right_space(q);
    Mat g = Mat::Zero(ls.total, rs.total);
    for (int b : list) {
      const ThetaBlock& t = lay.blocks[b];
      g.block(ls.off(t.l, t.s1), rs.off(t.r, t.s2), t.rows, t.cols) = CMap(theta.data() + t.offset, t.rows, t.cols);
    }
    norm2 += g.squaredNorm();
    m.emplace(q, std::move(g));
  }
  if (!(norm2 > 0.0)) throw NumericalError("two-site wavefunction vanished");

  // Candidate basis vectors per charge, with weights.
  std::map<Charge, Mat> basis;
  std::vector<Candidate> cand;
  if (alpha <= 0.0) {
    for (const auto& [q, g] : m) {
      Mat u;
      linalg::Vector s;
      Mat vt;
      linalg::svd(g, u, s, vt);
      for (Eigen::Index i = 0; i < s.size(); ++i) cand.push_back({s[i] * s[i] / norm2, q, static_cast<int>(i)});
      basis[q] = left_to_right ? std::move(u) : Mat(vt.transpose());
    }
  } else {
    std::map<Charge, Mat> rho;
    for (const auto& [q, g] : m) rho[q] = left_to_right ? Mat(g * g.transpose()) : Mat(g.transpose() * g);
    std::map<Charge, Mat> pert;
    double pert_trace = 0.0;
    if (left_to_right) {
      const MPOSite& w = h_.sites[p];
      const Env& L = lenv_[p];
      std::vector<std::vector<const MPOEntry*>> by_wr(w.right_charges.size());
      for (const auto& e : w.entries) by_wr[e.wr].push_back(&e);
      for (int wm = 0; wm < static_cast<int>(by_wr.size()); ++wm) {
        for (const auto& [q, list] : group_blocks) {
          const Charge q2 = q + w.right_charges[wm];
          if (!feasible(q2, total_, n_left, n_right)) continue;
          const Space& ls = left_space(q2);
          if (ls.total == 0) continue;
          const Space& rs = right_space(q);
          Mat pm = Mat::Zero(ls.total, rs.total);
          bool any = false;
          for (int b : list) {
            const ThetaBlock& t = lay.blocks[b];
            for (const MPOEntry* e : by_wr[wm]) {
              const Mat& lm = L.w[e->wl][t.l];
              if (lm.size() == 0) continue;
              const int lb = bl.find(bl.q[t.l] + w.left_charges[e->wl]);
              if (lb < 0) continue;
              Mat y;
              for (int s1 = 0; s1 < 4; ++s1) {
                const double x = e->coef * e->op[s1 * 4 + t.s1];
                if (x == 0.0) continue;
                if (y.size() == 0) y.noalias() = lm * CMap(theta.data() + t.offset, t.rows, t.cols);
                pm.block(ls.off(lb, s1), rs.off(t.r, t.s2), y.rows(), y.cols()) += x * y;
                any = true;
              }
            }
          }
          if (!any) continue;
          Mat r = pm * pm.transpose();
          pert_trace += r.trace();
          auto [it, fresh] = pert.try_emplace(q2);
          if (fresh) {
            it->second = std::move(r);
          } else {
            it->second += r;
          }
        }
      }
    } else {
      const MPOSite& w = h_.sites[p + 1];
      const Env& R = renv_[p + 2];
      std::vector<std::vector<const MPOEntry*>> by_wl(w.left_charges.size());
      for (const auto& e : w.entries) by_wl[e.wl].push_back(&e);
      for (int wm = 0; wm < static_cast<int>(by_wl.size()); ++wm) {
        for (const auto& [q, list] : group_blocks) {
          const Charge q2 = q + w.left_charges[wm];
          if (!feasible(q2, total_, n_left, n_right)) continue;
          const Space& rs = right_space(q2);
          if (rs.total == 0) continue;
          const Space& ls = left_space(q);
          Mat pm = Mat::Zero(ls.total, rs.total);
          bool any = false;
          for (int b : list) {
            const ThetaBlock& t = lay.blocks[b];
            for (const MPOEntry* e : by_wl[wm]) {
              const Mat& rm = R.w[e->wr][t.r];
              if (rm.size() == 0) continue;
              const int rb = br.find(br.q[t.r] + w.right_charges[e->wr]);
              if (rb < 0) continue;
              Mat y;
              for (int s2 = 0; s2 < 4; ++s2) {
                const double x = e->coef * e->op[s2 * 4 + t.s2];
                if (x == 0.0) continue;
                if (y.size() == 0) y.noalias() = CMap(theta.data() + t.offset, t.rows, t.cols) * rm.transpose();
                pm.block(ls.off(t.l, t.s1), rs.off(rb, s2), y.rows(), y.cols()) += x * y;
                any = true;
              }
            }
          }
          if (!any) continue;
          Mat r = pm.transpose() * pm;
          pert_trace += r.trace();
          auto [it, fresh] = pert.try_emplace(q2);
          if (fresh) {
            it->second = std::move(r);
          } else {
            it->second += r;
          }
        }
      }
    }
    for (auto& [q, r] : rho) r /= norm2;
    if (pert_trace > 0.0) {
      for (auto& [q, r] : pert) {
        auto [it, fresh] = rho.try_emplace(q);
        if (fresh) {
          it->second = (alpha / pert_trace) * r;
        } else {
          it->second += (alpha / pert_trace) * r;
        }
      }
    }
    for (const auto& [q, r] : rho) {
      linalg::Vector ev;
      Mat vecs;
      linalg::eigh(r, ev, vecs);
      const Eigen::Index n = ev.size();
      Mat desc(vecs.rows(), n);
      for (Eigen::Index i = 0; i < n; ++i) {
        desc.col(i) = vecs.col(n - 1 - i);
        cand.push_back({ev[n - 1 - i], q, static_cast<int>(i)});
      }
      basis[q] = std::move(desc);
    }
  }

  std::stable_sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) { return a.weight > b.weight; });
  const double top = cand.empty() ? 0.0 : cand.front().weight;
  std::map<Charge, int> keep;
  int used = 0;
  for (const Candidate& c : cand) {
    if (used >= max_bond) break;
    if (c.weight <= cfg_.discard_cutoff * top && used > 0) break;
    ++keep[c.q];
    ++used;
  }

  // New bond and tensors.
  Bond mid;
  for (const auto& [q, k] : keep) mid.add(q, k);
  Site left_site;
  Site right_site;
  left_site.a.assign(bl.size(), {});
  right_site.a.assign(mid.size(), {});
  double kept2 = 0.0;
  std::map<Charge, Mat> center;
  for (const auto& [q, k] : keep) {
    const Mat u = basis.at(q).leftCols(k);
    const auto git = m.find(q);
    if (left_to_right) {
      const Space& rs = right_space(q);
      Mat c = git == m.end() ? Mat::Zero(k, rs.total) : Mat(u.transpose() * git->second);
      kept2 += c.squaredNorm();
      center.emplace(q, std::move(c));
    } else {
      const Space& ls = left_space(q);
      Mat c = git == m.end() ? Mat::Zero(ls.total, k) : Mat(git->second * u);
      kept2 += c.squaredNorm();
      center.emplace(q, std::move(c));
    }
  }
  const double scale = kept2 > 0.0 ? 1.0 / std::sqrt(kept2) : 1.0;
  for (const auto& [q, k] : keep) {
    const int mi = mid.find(q);
    const Mat& u = basis.at(q);
    const Mat& c = center.at(q);
    const Space& ls = left_space(q);
    const Space& rs = right_space(q);
    for (std::size_t i = 0; i < ls.parts.size(); ++i) {
      const auto [l, s] = ls.parts[i];
      if (left_to_right) {
        left_site.a[l][s] = u.block(ls.offset[i], 0, ls.dim[i], k);
      } else {
        left_site.a[l][s] = scale * c.block(ls.offset[i], 0, ls.dim[i], k);
      }
    }
    for (std::size_t i = 0; i < rs.parts.size(); ++i) {
      const auto [r, s] = rs.parts[i];
      if (left_to_right) {
        right_site.a[mi][s] = scale * c.block(0, rs.offset[i], k, rs.dim[i]);
      } else {
        right_site.a[mi][s] = u.block(rs.offset[i], 0, rs.dim[i], k).transpose();
      }
    }
  }
  bonds_[p + 1] = std::move(mid);
  sites_[p] = std::move(left_site);
  sites_[p + 1] = std::move(right_site);
  return std::max(0.0, 1.0 - kept2 / norm2);
}

double Engine::sweep_half(bool left_to_right, int max_bond, double alpha, double& max_disc, int& max_used) {
  double energy = 0.0;
  LanczosOptions lo;
  lo.max_iter = cfg_.lanczos_max_iter;
  lo.tol = cfg_.lanczos_tol;
  for (int step = 0; step < n_ - 1; ++step) {
    const int p = left_to_right ? step : n_ - 2 - step;
    const ThetaLayout lay = make_layout(bonds_[p], bonds_[p + 2]);
    if (lay.size == 0) throw NumericalError("no two-site block is compatible with the target charge");
    linalg::Vector theta = linalg::Vector::Zero(static_cast<Eigen::Index>(lay.size));
    for (const ThetaBlock& t : lay.blocks) {
      const Mat& a = sites_[p].a[t.l][t.s1];
      if (a.size() == 0) continue;
      const int mi = bonds_[p + 1].find(bonds_[p].q[t.l] + sq(t.s1));
      if (mi < 0) continue;
      const Mat& b = sites_[p + 1].a[mi][t.s2];
      if (b.size() == 0) continue;
      MMap(theta.data() + t.offset, t.rows, t.cols).noalias() = a * b;
    }
    const MatVec op = [&](const linalg::Vector& x, linalg::Vector& y) {
      y.resize(x.size());
      matvec(p, lay, x.data(), y.data());
    };
    const LanczosResult res = lanczos_lowest(op, theta, lo);
    energy = res.value;
    const double disc = split(p, lay, res.vector, left_to_right, max_bond, alpha);
    max_disc = std::max(max_disc, disc);
    max_used = std::max(max_used, bonds_[p + 1].total());
    if (left_to_right) {
      lenv_[p + 1] = left_update(lenv_[p], sites_[p], p);
    } else {
      renv_[p + 1] = right_update(renv_[p + 2], sites_[p + 1], p + 1);
    }
  }
  return energy;
}

struct RunStart {
  int done_sweeps = 0;
  double alpha = 0.0;
  double prev_energy = std::numeric_limits<double>::quiet_NaN();
};

DMRGResult run(const MPSState& init, const MPOperator& h, const DMRGConfig& cfg, const RunStart& start) {
  cfg.validate();
  if (h.n_sites < 2) throw ConfigError("two-site sweeps need at least two sites");
  Engine eng(h, cfg);
  eng.load(init);
  eng.build_right_envs();

  DMRGResult result;
  result.n_sites = h.n_sites;
  double alpha = start.alpha;
  double prev = start.prev_energy;
  const int total = cfg.schedule.size();
  for (int k = start.done_sweeps; k < total; ++k) {
    const auto t0 = Clock::now();
    const int m = cfg.schedule.max_bond[k];
    const bool pure = k >= total - cfg.pure_final_sweeps;
    const double a = pure ? 0.0 : alpha;
    if (k > start.done_sweeps && k % cfg.env_rebuild_every == 0) eng.build_right_envs();
    SweepRecord rec;
    rec.sweep = k + 1;
    rec.max_bond_target = m;
    rec.alpha = a;
    for (int half = 0; half < 2; ++half) {
      const bool ltr = half == 0;
      double disc = 0.0;
      int used = 0;
      const double e = eng.sweep_half(ltr, m, a, disc, used);
      rec.max_discarded = std::max(rec.max_discarded, disc);
      rec.max_bond_used = std::max(rec.max_bond_used, used);
      rec.energy = e;
      if (cfg.log) {
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        *cfg.log << "sweep " << rec.sweep << (ltr ? " L->R" : " R->L") << " m=" << m << " used=" << used
                 << " trunc=" << std::scientific << std::setprecision(3) << disc << " E=" << std::fixed
                 << std::setprecision(12) << e << " t=" << std::setprecision(2) << secs << "s" << std::defaultfloat
                 << std::endl;
      }
    }
    rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    result.sweeps.push_back(rec);
    const double delta = std::isnan(prev) ? std::numeric_limits<double>::infinity() : std::abs(rec.energy - prev);
    const double improvement = std::isnan(prev) ? std::numeric_limits<double>::infinity() : prev - rec.energy;
    if (improvement < 10.0 * cfg.criteria.energy_threshold) alpha = std::max(cfg.alpha_floor, alpha * cfg.alpha_decay);
    prev = rec.energy;
    if (!cfg.checkpoint_path.empty()) {
      const nlohmann::json extra = {{"sweep", rec.sweep}, {"alpha", alpha}, {"energy", rec.energy}};
      save_state(cfg.checkpoint_path, eng.export_state(), extra.dump());
    }
    if (rec.max_discarded < cfg.criteria.trunc_threshold && delta < cfg.criteria.energy_threshold) {
      result.converged = true;
      if (cfg.early_stop) break;
    }
  }
  if (result.sweeps.empty()) throw ConfigError("no sweeps left to run");
  result.final_energy = result.sweeps.back().energy;
  result.energy_per_site = result.final_energy / h.n_sites;
  result.final_state = eng.export_state();
  return result;
}

}  // namespace

DMRGResult ground_state(const MPSState& init, const MPOperator& h, const DMRGConfig& config) {
  RunStart start;
  start.alpha = config.alpha;
  return run(init, h, config, start);
}

DMRGResult resume(const std::string& state_file, const MPOperator& h, const DMRGConfig& config) {
  std::string extra;
  const MPSState st = load_state(state_file, &extra);
  RunStart start;
  try {
    const auto j = nlohmann::json::parse(extra);
    start.done_sweeps = j.at("sweep").get<int>();
    start.alpha = j.at("alpha").get<double>();
    start.prev_energy = j.at("energy").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("state file carries no sweep checkpoint: " + std::string(e.what()));
  }
  if (start.done_sweeps >= config.schedule.size()) throw ConfigError("checkpoint already covers the whole schedule");
  return run(st, h, config, start);
}

void write_sweeps_csv(std::ostream& out, const DMRGResult& result) {
  out << "sweep,max_bond_target,max_bond_used,max_discarded,energy,energy_per_site,alpha,seconds\n";
  out << std::setprecision(12);
  for (const auto& r : result.sweeps) {
    out << r.sweep << ',' << r.max_bond_target << ',' << r.max_bond_used << ',' << r.max_discarded << ','
        << r.energy << ',' << r.energy / result.n_sites << ',' << r.alpha << ',' << r.seconds << '\n';
  }
}

void write_config_manifest(std::ostream& out, const DMRGConfig& c) {
  out << std::setprecision(12);
  out << "schedule=" << c.schedule.to_string() << '\n'
      << "trunc_threshold=" << c.criteria.trunc_threshold << '\n'
      << "energy_threshold=" << c.criteria.energy_threshold << '\n'
      << "early_stop=" << (c.early_stop ? "true" : "false") << '\n'
      << "alpha=" << c.alpha << '\n'
      << "alpha_decay=" << c.alpha_decay << '\n'
      << "alpha_floor=" << c.alpha_floor << '\n'
      << "pure_final_sweeps=" << c.pure_final_sweeps << '\n'
      << "lanczos_max_iter=" << c.lanczos_max_iter << '\n'
      << "lanczos_tol=" << c.lanczos_tol << '\n'
      << "discard_cutoff=" << c.discard_cutoff << '\n'
      << "env_rebuild_every=" << c.env_rebuild_every << '\n'
      << "checkpoint=" << c.checkpoint_path << '\n';
  for (const auto& [edge, cap] : c.edge_caps) out << "edge_cap=" << edge.first << '-' << edge.second << ':' << cap << '\n';
}

}  // namespace curvemps
