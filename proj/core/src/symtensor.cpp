#include "curvemps/symtensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include <Eigen/Dense>

#include "curvemps/linalg.hpp"
#include "curvemps/parallel.hpp"

namespace curvemps {

namespace {

std::atomic<std::uint64_t> g_flops{0};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::size_t product(const std::vector<int>& dims) {
  std::size_t p = 1;
  for (int d : dims) p *= static_cast<std::size_t>(d);
  return p;
}

bool is_identity(std::span<const int> perm) {
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] != static_cast<int>(i)) return false;
  }
  return true;
}

// dst[new index] = src[old index] where new axis i is old axis perm[i].
void permute_data(const double* src, const std::vector<int>& shape, std::span<const int> perm,
                  double* dst) {
  const int r = static_cast<int>(shape.size());
  const std::size_t total = product(shape);
  if (r <= 1 || is_identity(perm)) {
    std::copy(src, src + total, dst);
    return;
  }
  std::array<std::size_t, kMaxRank> old_stride{};
  old_stride[r - 1] = 1;
  for (int i = r - 2; i >= 0; --i) old_stride[i] = old_stride[i + 1] * shape[i + 1];
  std::array<std::size_t, kMaxRank> stride{};
  std::array<int, kMaxRank> extent{};
  for (int i = 0; i < r; ++i) {
    stride[i] = old_stride[perm[i]];
    extent[i] = shape[perm[i]];
  }
  const std::size_t inner = static_cast<std::size_t>(extent[r - 1]);
  if (inner == 0) return;
  const std::size_t inner_stride = stride[r - 1];
  const std::size_t outer = total / inner;
  std::array<int, kMaxRank> counter{};
  std::size_t offset = 0;
  for (std::size_t o = 0; o < outer; ++o) {
    const double* s = src + offset;
    for (std::size_t j = 0; j < inner; ++j) dst[j] = s[j * inner_stride];
    dst += inner;
    for (int ax = r - 2; ax >= 0; --ax) {
      ++counter[ax];
      offset += stride[ax];
      if (counter[ax] < extent[ax]) break;
      offset -= stride[ax] * static_cast<std::size_t>(extent[ax]);
      counter[ax] = 0;
    }
  }
}

Charge signed_charge(const std::vector<Leg>& legs, const BlockKey& key, std::span<const int> which) {
  Charge q;
  for (int l : which) {
    const Charge c = legs[l].charge(key[l]);
    if (legs[l].direction() == Direction::Out) {
      q += c;
    } else {
      q += -c;
    }
  }
  return q;
}

BlockKey sub_key(const BlockKey& key, std::span<const int> which) {
  BlockKey k = BlockKey::of_rank(static_cast<int>(which.size()));
  for (std::size_t i = 0; i < which.size(); ++i) k[static_cast<int>(i)] = key[which[i]];
  return k;
}

std::vector<int> complement(int rank, std::span<const int> chosen) {
  std::vector<bool> used(rank, false);
  for (int c : chosen) used[c] = true;
  std::vector<int> rest;
  for (int i = 0; i < rank; ++i) {
    if (!used[i]) rest.push_back(i);
  }
  return rest;
}

void check_partition(int rank, std::span<const int> left, const char* who) {
  if (left.empty() || static_cast<int>(left.size()) >= rank) {
    throw ShapeError(std::string(who) + ": left legs must be a non-empty proper subset");
  }
  std::vector<bool> seen(rank, false);
  for (int l : left) {
    if (l < 0 || l >= rank || seen[l]) throw ShapeError(std::string(who) + ": bad leg list");
    seen[l] = true;
  }
}

// Blocks of t regrouped into one dense matrix per bond charge, rows indexed by
// the left-leg sectors and columns by the right-leg sectors.
struct MatrixGroup {
  Charge bond_charge;
  std::map<BlockKey, std::pair<int, int>> rows;  // left key -> (offset, extent)
  std::map<BlockKey, std::pair<int, int>> cols;
  linalg::Matrix m;
};

std::vector<MatrixGroup> group_blocks(const BlockTensor& t, std::span<const int> left,
                                      std::span<const int> right, bool union_rows_cols = false) {
  std::map<Charge, MatrixGroup> groups;
  const auto& legs = t.legs();
  const auto extent_of = [&](const BlockKey& key, std::span<const int> which) {
    int e = 1;
    for (int l : which) e *= legs[l].dim(key[l]);
    return e;
  };
  for (const auto& [key, data] : t.blocks()) {
    const Charge q = -signed_charge(legs, key, left);
    auto& g = groups[q];
    g.bond_charge = q;
    g.rows.emplace(sub_key(key, left), std::make_pair(0, extent_of(key, left)));
    g.cols.emplace(sub_key(key, right), std::make_pair(0, extent_of(key, right)));
  }
  std::vector<MatrixGroup> out;
  out.reserve(groups.size());
  for (auto& [q, g] : groups) {
    if (union_rows_cols) {
      for (const auto& [k, v] : g.cols) g.rows.emplace(k, v);
      g.cols = g.rows;
    }
    int off = 0;
    for (auto& [k, v] : g.rows) {
      v.first = off;
      off += v.second;
    }
    const int n_rows = off;
    off = 0;
    for (auto& [k, v] : g.cols) {
      v.first = off;
      off += v.second;
    }
    g.m = linalg::Matrix::Zero(n_rows, off);
    out.push_back(std::move(g));
  }
  std::vector<int> perm(left.begin(), left.end());
  perm.insert(perm.end(), right.begin(), right.end());
  std::map<Charge, std::size_t> index;
  for (std::size_t i = 0; i < out.size(); ++i) index[out[i].bond_charge] = i;
  std::vector<double> scratch;
  for (const auto& [key, data] : t.blocks()) {
    const Charge q = -signed_charge(legs, key, left);
    auto& g = out[index[q]];
    const auto [r0, nr] = g.rows.at(sub_key(key, left));
    const auto [c0, nc] = g.cols.at(sub_key(key, right));
    scratch.resize(data.size());
    permute_data(data.data(), t.block_shape(key), perm, scratch.data());
    g.m.block(r0, c0, nr, nc) = Eigen::Map<const RowMat>(scratch.data(), nr, nc);
  }
  return out;
}

struct Ranked {
  double value;
  std::size_t group;
  int index;
};

// Number of kept entries per group after global ranking.
std::vector<int> select_kept(const std::vector<std::vector<double>>& values,
                             const TruncationSpec& spec, double& discarded_weight,
                             std::vector<double>& kept_sorted, bool squared_input) {
  if (spec.max_dim < 1) throw ShapeError("TruncationSpec.max_dim must be >= 1");
  std::vector<Ranked> all;
  double total = 0.0;
  double vmax = 0.0;
  for (std::size_t g = 0; g < values.size(); ++g) {
    for (std::size_t i = 0; i < values[g].size(); ++i) {
      const double v = std::max(values[g][i], 0.0);
      all.push_back({v, g, static_cast<int>(i)});
      total += squared_input ? v : v * v;
      vmax = std::max(vmax, v);
    }
  }
  if (!(total > 0.0)) throw NumericalError("truncation of an all-zero tensor (undefined gauge)");
  std::stable_sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.group != b.group) return a.group < b.group;
    return a.index < b.index;
  });
  const double floor = vmax * (squared_input ? 1e-28 : 1e-14);
  std::size_t n = 0;
  while (n < all.size() && n < static_cast<std::size_t>(spec.max_dim) && all[n].value > floor) ++n;
  n = std::max<std::size_t>(n, 1);
  const auto weight = [&](std::size_t i) {
    return squared_input ? all[i].value : all[i].value * all[i].value;
  };
  double dropped = 0.0;
  for (std::size_t i = n; i < all.size(); ++i) dropped += weight(i);
  while (n > 1 && (dropped + weight(n - 1)) / total <= spec.discard_cutoff) {
    dropped += weight(n - 1);
    --n;
  }
  discarded_weight = dropped / total;
  std::vector<int> kept(values.size(), 0);
  kept_sorted.clear();
  for (std::size_t i = 0; i < n; ++i) {
    kept[all[i].group] = std::max(kept[all[i].group], all[i].index + 1);
    kept_sorted.push_back(all[i].value);
  }
  return kept;
}

// Writes columns [0, k) of the group's row space back into an isometry tensor
// with legs [left legs..., bond(Out)].
void scatter_isometry(BlockTensor& iso, const MatrixGroup& g, const linalg::Matrix& u, int k,
                      int bond_sector, int n_left) {
  for (const auto& [lkey, range] : g.rows) {
    BlockKey key = BlockKey::of_rank(n_left + 1);
    for (int i = 0; i < n_left; ++i) key[i] = lkey[i];
    key[n_left] = static_cast<std::int16_t>(bond_sector);
    std::vector<double> data(static_cast<std::size_t>(range.second) * k);
    Eigen::Map<RowMat>(data.data(), range.second, k) = u.block(range.first, 0, range.second, k);
    iso.set_block(key, std::move(data));
  }
}

}  // namespace

std::string to_string(Charge q) {
  return "(" + std::to_string(q.up) + "," + std::to_string(q.down) + ")";
}

std::uint64_t flop_count() { return g_flops.load(); }
void reset_flop_count() { g_flops.store(0); }
void add_flops(std::uint64_t n) { g_flops.fetch_add(n, std::memory_order_relaxed); }

// ---------------------------------------------------------------- Leg

Leg::Leg(Direction dir, std::vector<Sector> sectors) : dir_(dir), sectors_(std::move(sectors)) {
  lookup_.reserve(sectors_.size());
  for (std::size_t i = 0; i < sectors_.size(); ++i) {
    if (sectors_[i].dim <= 0) throw ShapeError("leg sector with non-positive degeneracy");
    lookup_.emplace_back(sectors_[i].charge, static_cast<int>(i));
  }
  std::sort(lookup_.begin(), lookup_.end());
  for (std::size_t i = 1; i < lookup_.size(); ++i) {
    if (lookup_[i].first == lookup_[i - 1].first) {
      throw ShapeError("leg has repeated sector charge " + to_string(lookup_[i].first));
    }
  }
}

int Leg::total_dim() const {
  int d = 0;
  for (const auto& s : sectors_) d += s.dim;
  return d;
}

int Leg::offset(int sector) const {
  int d = 0;
  for (int i = 0; i < sector; ++i) d += sectors_[i].dim;
  return d;
}

int Leg::find(Charge q) const {
  const auto it = std::lower_bound(lookup_.begin(), lookup_.end(), std::make_pair(q, -1));
  if (it != lookup_.end() && it->first == q) return it->second;
  return -1;
}

Leg Leg::dual() const {
  Leg d = *this;
  d.dir_ = flip(dir_);
  return d;
}

BlockKey::BlockKey(std::initializer_list<int> sectors) {
  if (sectors.size() > static_cast<std::size_t>(kMaxRank)) throw ShapeError("rank too large");
  rank = static_cast<std::uint8_t>(sectors.size());
  int i = 0;
  for (int s : sectors) idx[i++] = static_cast<std::int16_t>(s);
}

// ---------------------------------------------------------------- BlockTensor

BlockTensor::BlockTensor(std::vector<Leg> legs, Charge flux) : legs_(std::move(legs)), flux_(flux) {
  if (legs_.size() > static_cast<std::size_t>(kMaxRank)) {
    throw ShapeError("tensor rank exceeds " + std::to_string(kMaxRank));
  }
}

bool BlockTensor::allowed(const BlockKey& key) const {
  if (key.rank != rank()) return false;
  Charge q;
  for (int i = 0; i < rank(); ++i) {
    if (key[i] < 0 || key[i] >= legs_[i].n_sectors()) return false;
    const Charge c = legs_[i].charge(key[i]);
    if (legs_[i].direction() == Direction::Out) {
      q += c;
    } else {
      q += -c;
    }
  }
  return q == flux_;
}

std::vector<int> BlockTensor::block_shape(const BlockKey& key) const {
  std::vector<int> shape(rank());
  for (int i = 0; i < rank(); ++i) shape[i] = legs_[i].dim(key[i]);
  return shape;
}

std::size_t BlockTensor::block_size(const BlockKey& key) const {
  std::size_t n = 1;
  for (int i = 0; i < rank(); ++i) n *= static_cast<std::size_t>(legs_[i].dim(key[i]));
  return n;
}

std::size_t BlockTensor::n_elements() const {
  std::size_t n = 0;
  for (const auto& [k, d] : blocks_) n += d.size();
  return n;
}

const std::vector<double>* BlockTensor::find_block(const BlockKey& key) const {
  const auto it = blocks_.find(key);
  return it == blocks_.end() ? nullptr : &it->second;
}

std::vector<double>& BlockTensor::block(const BlockKey& key) {
  auto it = blocks_.find(key);
  if (it != blocks_.end()) return it->second;
  if (!allowed(key)) throw ShapeError("block key violates the charge rule");
  return blocks_.emplace(key, std::vector<double>(block_size(key), 0.0)).first->second;
}

void BlockTensor::set_block(const BlockKey& key, std::vector<double> data) {
  if (!allowed(key)) throw ShapeError("block key violates the charge rule");
  if (data.size() != block_size(key)) throw ShapeError("block payload has the wrong size");
  blocks_[key] = std::move(data);
}

std::vector<BlockKey> BlockTensor::allowed_keys() const {
  std::vector<BlockKey> keys;
  const int r = rank();
  if (r == 0) {
    if (flux_ == Charge{}) keys.push_back(BlockKey::of_rank(0));
    return keys;
  }
  for (const auto& l : legs_) {
    if (l.n_sectors() == 0) return keys;
  }
  BlockKey key = BlockKey::of_rank(r);
  while (true) {
    if (allowed(key)) keys.push_back(key);
    int ax = r - 1;
    while (ax >= 0) {
      if (++key[ax] < legs_[ax].n_sectors()) break;
      key[ax] = 0;
      --ax;
    }
    if (ax < 0) break;
  }
  return keys;
}

double BlockTensor::norm() const {
  double s = 0.0;
  for (const auto& [k, d] : blocks_) {
    for (double x : d) s += x * x;
  }
  return std::sqrt(s);
}

double BlockTensor::max_abs() const {
  double m = 0.0;
  for (const auto& [k, d] : blocks_) {
    for (double x : d) m = std::max(m, std::abs(x));
  }
  return m;
}

void BlockTensor::scale(double factor) {
  for (auto& [k, d] : blocks_) {
    for (double& x : d) x *= factor;
  }
}

void BlockTensor::axpy(double alpha, const BlockTensor& other) {
  if (legs_ != other.legs_ || !(flux_ == other.flux_)) {
    throw ShapeError("axpy: tensors have different legs or flux");
  }
  for (const auto& [k, d] : other.blocks_) {
    auto& mine = block(k);
    for (std::size_t i = 0; i < d.size(); ++i) mine[i] += alpha * d[i];
  }
}

BlockTensor BlockTensor::permute(std::span<const int> perm) const {
  if (static_cast<int>(perm.size()) != rank()) throw ShapeError("permute: wrong permutation size");
  std::vector<bool> seen(rank(), false);
  for (int p : perm) {
    if (p < 0 || p >= rank() || seen[p]) throw ShapeError("permute: not a permutation");
    seen[p] = true;
  }
  std::vector<Leg> legs(rank());
  for (int i = 0; i < rank(); ++i) legs[i] = legs_[perm[i]];
  BlockTensor out(std::move(legs), flux_);
  if (is_identity(perm)) {
    out.blocks_ = blocks_;
    return out;
  }
  for (const auto& [key, data] : blocks_) {
    BlockKey nk = BlockKey::of_rank(rank());
    for (int i = 0; i < rank(); ++i) nk[i] = key[perm[i]];
    std::vector<double> nd(data.size());
    permute_data(data.data(), block_shape(key), perm, nd.data());
    out.blocks_.emplace(nk, std::move(nd));
  }
  return out;
}

BlockTensor BlockTensor::dual() const {
  std::vector<Leg> legs;
  legs.reserve(legs_.size());
  for (const auto& l : legs_) legs.push_back(l.dual());
  BlockTensor out(std::move(legs), -flux_);
  out.blocks_ = blocks_;
  return out;
}

void BlockTensor::prune() {
  for (auto it = blocks_.begin(); it != blocks_.end();) {
    const bool zero = std::all_of(it->second.begin(), it->second.end(),
                                  [](double x) { return x == 0.0; });
    it = zero ? blocks_.erase(it) : std::next(it);
  }
}

std::vector<double> BlockTensor::to_dense() const {
  std::vector<int> dims(rank());
  for (int i = 0; i < rank(); ++i) dims[i] = legs_[i].total_dim();
  std::vector<double> dense(product(dims), 0.0);
  std::vector<std::size_t> stride(rank(), 1);
  for (int i = rank() - 2; i >= 0; --i) stride[i] = stride[i + 1] * dims[i + 1];
  for (const auto& [key, data] : blocks_) {
    const auto shape = block_shape(key);
    std::vector<int> idx(rank(), 0);
    for (std::size_t flat = 0; flat < data.size(); ++flat) {
      std::size_t pos = 0;
      for (int i = 0; i < rank(); ++i) pos += (legs_[i].offset(key[i]) + idx[i]) * stride[i];
      dense[pos] = data[flat];
      for (int ax = rank() - 1; ax >= 0; --ax) {
        if (++idx[ax] < shape[ax]) break;
        idx[ax] = 0;
      }
    }
  }
  return dense;
}

BlockTensor BlockTensor::from_dense(std::vector<Leg> legs, Charge flux, std::span<const double> dense,
                                    double tol) {
  BlockTensor out(std::move(legs), flux);
  const int r = out.rank();
  std::vector<int> dims(r);
  for (int i = 0; i < r; ++i) dims[i] = out.legs_[i].total_dim();
  if (dense.size() != product(dims)) throw ShapeError("from_dense: size mismatch");
  std::vector<std::size_t> stride(r, 1);
  for (int i = r - 2; i >= 0; --i) stride[i] = stride[i + 1] * dims[i + 1];
  for (const BlockKey& key : out.allowed_keys()) {
    const auto shape = out.block_shape(key);
    std::vector<double> data(product(shape));
    std::vector<int> idx(r, 0);
    double biggest = 0.0;
    for (std::size_t flat = 0; flat < data.size(); ++flat) {
      std::size_t pos = 0;
      for (int i = 0; i < r; ++i) pos += (out.legs_[i].offset(key[i]) + idx[i]) * stride[i];
      data[flat] = dense[pos];
      biggest = std::max(biggest, std::abs(data[flat]));
      for (int ax = r - 1; ax >= 0; --ax) {
        if (++idx[ax] < shape[ax]) break;
        idx[ax] = 0;
      }
    }
    if (biggest > tol) out.blocks_.emplace(key, std::move(data));
  }
  return out;
}

BlockTensor BlockTensor::random(std::vector<Leg> legs, Charge flux, std::mt19937_64& rng) {
  BlockTensor out(std::move(legs), flux);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const BlockKey& key : out.allowed_keys()) {
    std::vector<double> data(out.block_size(key));
    for (double& x : data) x = gauss(rng);
    out.blocks_.emplace(key, std::move(data));
  }
  return out;
}

BlockTensor BlockTensor::identity(const Leg& leg) {
  BlockTensor out({leg.dual(), leg});
  for (int s = 0; s < leg.n_sectors(); ++s) {
    const int d = leg.dim(s);
    std::vector<double> data(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) data[static_cast<std::size_t>(i) * d + i] = 1.0;
    out.blocks_.emplace(BlockKey{s, s}, std::move(data));
  }
  return out;
}

void BlockTensor::check() const {
  for (const auto& [key, data] : blocks_) {
    if (!allowed(key)) throw ShapeError("stored block violates the charge rule");
    if (data.size() != block_size(key)) throw ShapeError("stored block has the wrong size");
  }
}

double dot(const BlockTensor& a, const BlockTensor& b) {
  if (a.legs() != b.legs()) throw ShapeError("dot: tensors have different legs");
  double s = 0.0;
  for (const auto& [key, da] : a.blocks()) {
    const auto* db = b.find_block(key);
    if (!db) continue;
    for (std::size_t i = 0; i < da.size(); ++i) s += da[i] * (*db)[i];
  }
  return s;
}

// ---------------------------------------------------------------- contract

BlockTensor contract(const BlockTensor& a, const BlockTensor& b,
                     std::span<const std::pair<int, int>> leg_pairs) {
  std::vector<int> ca, cb;
  for (const auto& [la, lb] : leg_pairs) {
    if (la < 0 || la >= a.rank() || lb < 0 || lb >= b.rank()) {
      throw ShapeError("contract: leg index out of range");
    }
    if (!a.leg(la).same_space(b.leg(lb))) {
      throw ShapeError("contract: paired legs " + std::to_string(la) + "/" + std::to_string(lb) +
                       " carry different sectors");
    }
    if (a.leg(la).direction() == b.leg(lb).direction()) {
      throw ShapeError("contract: paired legs " + std::to_string(la) + "/" + std::to_string(lb) +
                       " have the same direction");
    }
    ca.push_back(la);
    cb.push_back(lb);
  }
  const std::vector<int> fa = complement(a.rank(), ca);
  const std::vector<int> fb = complement(b.rank(), cb);
  if (fa.size() + ca.size() != static_cast<std::size_t>(a.rank()) ||
      fb.size() + cb.size() != static_cast<std::size_t>(b.rank())) {
    throw ShapeError("contract: a leg is paired twice");
  }
  std::vector<Leg> legs;
  for (int i : fa) legs.push_back(a.leg(i));
  for (int i : fb) legs.push_back(b.leg(i));
  BlockTensor out(std::move(legs), a.flux() + b.flux());

  std::vector<int> perm_a = fa;
  perm_a.insert(perm_a.end(), ca.begin(), ca.end());
  std::vector<int> perm_b = cb;
  perm_b.insert(perm_b.end(), fb.begin(), fb.end());
  const bool copy_a = !is_identity(perm_a);
  const bool copy_b = !is_identity(perm_b);

  struct Operand {
    BlockKey free;
    const double* data;
    int rows;
    int cols;
  };
  std::vector<std::vector<double>> storage;
  storage.reserve(a.n_blocks() + b.n_blocks());
  const auto prepare = [&](const BlockTensor& t, const std::vector<int>& perm, bool copy,
                           std::span<const int> free, std::span<const int> contracted,
                           bool contracted_first) {
    std::map<BlockKey, std::vector<Operand>> grouped;
    for (const auto& [key, data] : t.blocks()) {
      int nf = 1, nc = 1;
      for (int l : free) nf *= t.leg(l).dim(key[l]);
      for (int l : contracted) nc *= t.leg(l).dim(key[l]);
      const double* ptr = data.data();
      if (copy) {
        storage.emplace_back(data.size());
        permute_data(data.data(), t.block_shape(key), perm, storage.back().data());
        ptr = storage.back().data();
      }
      Operand op{sub_key(key, free), ptr, contracted_first ? nc : nf, contracted_first ? nf : nc};
      grouped[sub_key(key, contracted)].push_back(op);
    }
    return grouped;
  };
  const auto ga = prepare(a, perm_a, copy_a, fa, ca, false);
  const auto gb = prepare(b, perm_b, copy_b, fb, cb, true);

  std::map<BlockKey, std::vector<std::pair<const Operand*, const Operand*>>> tasks;
  for (const auto& [ckey, as] : ga) {
    const auto it = gb.find(ckey);
    if (it == gb.end()) continue;
    for (const Operand& x : as) {
      for (const Operand& y : it->second) {
        BlockKey rk = BlockKey::of_rank(static_cast<int>(fa.size() + fb.size()));
        int p = 0;
        for (int i = 0; i < x.free.rank; ++i) rk[p++] = x.free[i];
        for (int i = 0; i < y.free.rank; ++i) rk[p++] = y.free[i];
        tasks[rk].emplace_back(&x, &y);
      }
    }
  }
  std::vector<std::pair<BlockKey, std::vector<double>*>> results;
  results.reserve(tasks.size());
  for (const auto& [rk, list] : tasks) results.emplace_back(rk, &out.block(rk));
  std::vector<std::vector<std::pair<const Operand*, const Operand*>>*> work;
  std::uint64_t flops = 0;
  for (auto& [rk, list] : tasks) {
    for (const auto& [x, y] : list) flops += 2ull * x->rows * x->cols * y->cols;
  }
  add_flops(flops);
  std::vector<const std::vector<std::pair<const Operand*, const Operand*>>*> task_lists;
  task_lists.reserve(tasks.size());
  for (const auto& [rk, list] : tasks) task_lists.push_back(&list);
  parallel_for(results.size(), [&](std::size_t i) {
    const auto& list = *task_lists[i];
    const int rows = list.front().first->rows;
    const int cols = list.front().second->cols;
    Eigen::Map<RowMat> c(results[i].second->data(), rows, cols);
    for (const auto& [x, y] : list) {
      Eigen::Map<const RowMat> am(x->data, x->rows, x->cols);
      Eigen::Map<const RowMat> bm(y->data, y->rows, y->cols);
      c.noalias() += am * bm;
    }
  });
  return out;
}

BlockTensor apply_on_leg(const BlockTensor& op, const BlockTensor& t, int k) {
  if (op.rank() != 2) throw ShapeError("apply_on_leg: operator must have rank 2");
  BlockTensor r = contract(op, t, {{1, k}});
  std::vector<int> perm(t.rank());
  for (int i = 0; i < t.rank(); ++i) perm[i] = i < k ? i + 1 : (i == k ? 0 : i);
  return r.permute(perm);
}

// ---------------------------------------------------------------- factorizations

SVDResult svd_truncate(const BlockTensor& t, std::span<const int> left_legs,
                       const TruncationSpec& spec) {
  check_partition(t.rank(), left_legs, "svd_truncate");
  const std::vector<int> right = complement(t.rank(), left_legs);
  auto groups = group_blocks(t, left_legs, right);
  if (groups.empty()) throw NumericalError("svd_truncate: all-zero tensor (undefined gauge)");

  std::vector<linalg::Matrix> us(groups.size()), vts(groups.size());
  std::vector<std::vector<double>> values(groups.size());
  parallel_for(groups.size(), [&](std::size_t g) {
    linalg::Vector s;
    linalg::svd(groups[g].m, us[g], s, vts[g]);
    values[g].assign(s.data(), s.data() + s.size());
  });
  for (const auto& g : groups) {
    const auto m = static_cast<std::uint64_t>(g.m.rows());
    const auto n = static_cast<std::uint64_t>(g.m.cols());
    add_flops(4 * m * n * std::min(m, n));
  }

  SVDResult res;
  const std::vector<int> kept = select_kept(values, spec, res.discarded_weight, res.singular_values,
                                            false);
  std::vector<Sector> bond_sectors;
  std::vector<int> sector_of(groups.size(), -1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (kept[g] == 0) continue;
    sector_of[g] = static_cast<int>(bond_sectors.size());
    bond_sectors.push_back({groups[g].bond_charge, kept[g]});
  }
  const Leg bond(Direction::Out, bond_sectors);
  std::vector<Leg> left_leg_list;
  for (int l : left_legs) left_leg_list.push_back(t.leg(l));
  left_leg_list.push_back(bond);
  std::vector<Leg> right_leg_list{bond.dual()};
  for (int l : right) right_leg_list.push_back(t.leg(l));
  res.left = BlockTensor(std::move(left_leg_list));
  res.right = BlockTensor(std::move(right_leg_list), t.flux());
  const int n_left = static_cast<int>(left_legs.size());
  const int n_right = static_cast<int>(right.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const int k = kept[g];
    if (k == 0) continue;
    res.sector_values.emplace_back(values[g].begin(), values[g].begin() + k);
    scatter_isometry(res.left, groups[g], us[g], k, sector_of[g], n_left);
    for (const auto& [rkey, range] : groups[g].cols) {
      BlockKey key = BlockKey::of_rank(n_right + 1);
      key[0] = static_cast<std::int16_t>(sector_of[g]);
      for (int i = 0; i < n_right; ++i) key[i + 1] = rkey[i];
      std::vector<double> data(static_cast<std::size_t>(k) * range.second);
      Eigen::Map<RowMat>(data.data(), k, range.second) =
          vts[g].block(0, range.first, k, range.second);
      res.right.set_block(key, std::move(data));
    }
  }
  return res;
}

void scale_by_singular_values(BlockTensor& t, int leg,
                              const std::vector<std::vector<double>>& sector_values) {
  BlockTensor scaled(t.legs(), t.flux());
  for (const auto& [key, data] : t.blocks()) {
    const auto shape = t.block_shape(key);
    std::size_t inner = 1;
    for (int i = leg + 1; i < t.rank(); ++i) inner *= shape[i];
    const auto& s = sector_values.at(key[leg]);
    std::vector<double> out = data;
    const std::size_t d = shape[leg];
    for (std::size_t flat = 0; flat < out.size(); ++flat) out[flat] *= s[(flat / inner) % d];
    scaled.set_block(key, std::move(out));
  }
  t = std::move(scaled);
}

QRResult qr_orthogonalize(const BlockTensor& t, std::span<const int> left_legs) {
  check_partition(t.rank(), left_legs, "qr_orthogonalize");
  if (t.norm() == 0.0) throw NumericalError("qr_orthogonalize: all-zero tensor");
  const std::vector<int> right = complement(t.rank(), left_legs);
  auto groups = group_blocks(t, left_legs, right);
  std::vector<linalg::Matrix> qs(groups.size()), rs(groups.size());
  parallel_for(groups.size(), [&](std::size_t g) { linalg::qr(groups[g].m, qs[g], rs[g]); });
  std::vector<Sector> bond_sectors;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto m = static_cast<std::uint64_t>(groups[g].m.rows());
    const auto n = static_cast<std::uint64_t>(groups[g].m.cols());
    add_flops(4 * m * n * std::min(m, n));
    bond_sectors.push_back({groups[g].bond_charge, static_cast<int>(qs[g].cols())});
  }
  const Leg bond(Direction::Out, bond_sectors);
  std::vector<Leg> left_leg_list;
  for (int l : left_legs) left_leg_list.push_back(t.leg(l));
  left_leg_list.push_back(bond);
  std::vector<Leg> right_leg_list{bond.dual()};
  for (int l : right) right_leg_list.push_back(t.leg(l));
  QRResult res{BlockTensor(std::move(left_leg_list)), BlockTensor(std::move(right_leg_list), t.flux())};
  const int n_left = static_cast<int>(left_legs.size());
  const int n_right = static_cast<int>(right.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const int k = static_cast<int>(qs[g].cols());
    scatter_isometry(res.isometry, groups[g], qs[g], k, static_cast<int>(g), n_left);
    for (const auto& [rkey, range] : groups[g].cols) {
      BlockKey key = BlockKey::of_rank(n_right + 1);
      key[0] = static_cast<std::int16_t>(g);
      for (int i = 0; i < n_right; ++i) key[i + 1] = rkey[i];
      std::vector<double> data(static_cast<std::size_t>(k) * range.second);
      Eigen::Map<RowMat>(data.data(), k, range.second) = rs[g].block(0, range.first, k, range.second);
      res.remainder.set_block(key, std::move(data));
    }
  }
  return res;
}

EighResult eigh_truncate(const BlockTensor& rho, int n_left, const TruncationSpec& spec) {
  if (rho.rank() != 2 * n_left || n_left < 1) throw ShapeError("eigh_truncate: bad rank");
  for (int i = 0; i < n_left; ++i) {
    if (!(rho.leg(i + n_left) == rho.leg(i).dual())) {
      throw ShapeError("eigh_truncate: legs are not [L..., L.dual()...]");
    }
  }
  std::vector<int> left(n_left), right(n_left);
  std::iota(left.begin(), left.end(), 0);
  std::iota(right.begin(), right.end(), n_left);
  auto groups = group_blocks(rho, left, right, true);
  if (groups.empty()) throw NumericalError("eigh_truncate: all-zero tensor");
  std::vector<linalg::Matrix> vecs(groups.size());
  std::vector<std::vector<double>> values(groups.size());
  parallel_for(groups.size(), [&](std::size_t g) {
    const linalg::Matrix sym = 0.5 * (groups[g].m + groups[g].m.transpose());
    linalg::Vector w;
    linalg::Matrix v;
    linalg::eigh(sym, w, v);
    const auto n = w.size();
    values[g].resize(n);
    vecs[g].resize(v.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      values[g][i] = w(n - 1 - i);
      vecs[g].col(i) = v.col(n - 1 - i);
    }
  });
  for (const auto& g : groups) {
    const auto n = static_cast<std::uint64_t>(g.m.rows());
    add_flops(4 * n * n * n);
  }
  EighResult res;
  const std::vector<int> kept =
      select_kept(values, spec, res.discarded_weight, res.kept_values, true);
  std::vector<Sector> bond_sectors;
  std::vector<int> sector_of(groups.size(), -1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (kept[g] == 0) continue;
    sector_of[g] = static_cast<int>(bond_sectors.size());
    bond_sectors.push_back({groups[g].bond_charge, kept[g]});
  }
  std::vector<Leg> legs;
  for (int i = 0; i < n_left; ++i) legs.push_back(rho.leg(i));
  legs.emplace_back(Direction::Out, bond_sectors);
  res.isometry = BlockTensor(std::move(legs));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (kept[g] == 0) continue;
    scatter_isometry(res.isometry, groups[g], vecs[g], kept[g], sector_of[g], n_left);
  }
  return res;
}

void write_manifest(std::ostream& out, const BlockTensor& t) {
  char buf[64];
  out << "rank " << t.rank() << " flux " << to_string(t.flux()) << "\n";
  for (int i = 0; i < t.rank(); ++i) {
    out << "leg " << i << (t.leg(i).direction() == Direction::In ? " in" : " out");
    for (const auto& s : t.leg(i).sectors()) out << " " << to_string(s.charge) << "x" << s.dim;
    out << "\n";
  }
  for (const auto& [key, data] : t.blocks()) {
    out << "block [";
    for (int i = 0; i < key.rank; ++i) out << (i ? " " : "") << key[i];
    out << "] shape [";
    const auto shape = t.block_shape(key);
    for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? " " : "") << shape[i];
    double s = 0.0;
    for (double x : data) s += x * x;
    std::snprintf(buf, sizeof buf, "%.12e", std::sqrt(s));
    out << "] norm " << buf << "\n";
  }
}

}  // namespace curvemps
