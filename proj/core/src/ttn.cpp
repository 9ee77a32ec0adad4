#include "curvemps/ttn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <span>
#include <unordered_map>

#include "curvemps/lanczos.hpp"
#include "curvemps/lattice.hpp"
#include "curvemps/local_ops.hpp"

namespace curvemps {

// ---------------------------------------------------------------- topology

std::vector<std::vector<int>> TreeTopology::adjacency() const {
  std::vector<std::vector<int>> adj(n_nodes);
  for (const auto& [a, b] : edges) {
    adj[a - 1].push_back(b - 1);
    adj[b - 1].push_back(a - 1);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

int TreeTopology::degree(int node) const {
  int d = 0;
  for (const auto& [a, b] : edges) d += (a == node) + (b == node);
  return d;
}

bool TreeTopology::has_edge(int a, int b) const {
  const std::pair<int, int> e{std::min(a, b), std::max(a, b)};
  return std::binary_search(edges.begin(), edges.end(), e);
}

void TreeTopology::validate() const {
  if (n_nodes < 1) throw ConfigError("tree needs at least one node");
  if (static_cast<int>(edges.size()) != n_nodes - 1) {
    throw ConfigError("tree on " + std::to_string(n_nodes) + " nodes needs " + std::to_string(n_nodes - 1) +
                      " edges, got " + std::to_string(edges.size()));
  }
  for (const auto& [a, b] : edges) {
    if (a < 1 || b > n_nodes || a >= b) {
      throw ConfigError("bad tree edge " + std::to_string(a) + "-" + std::to_string(b));
    }
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i] == edges[i - 1]) throw ConfigError("duplicate tree edge");
  }
  const auto adj = adjacency();
  for (int v = 0; v < n_nodes; ++v) {
    if (adj[v].size() > 3) throw ConfigError("node " + std::to_string(v + 1) + " has degree above 3");
  }
  std::vector<bool> seen(n_nodes, false);
  std::vector<int> stack{0};
  seen[0] = true;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int x : adj[v]) {
      if (!seen[x]) {
        seen[x] = true;
        ++count;
        stack.push_back(x);
      }
    }
  }
  if (count != n_nodes) throw ConfigError("tree is not connected");
}

TreeTopology TreeTopology::from_edges(int n_nodes, std::vector<std::pair<int, int>> edges) {
  TreeTopology t;
  t.n_nodes = n_nodes;
  for (auto& [a, b] : edges) {
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  t.edges = std::move(edges);
  t.validate();
  return t;
}

TreeTopology TreeTopology::path(int n_nodes) {
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i < n_nodes; ++i) e.emplace_back(i, i + 1);
  return from_edges(n_nodes, std::move(e));
}

namespace {

// Removes the chain link between the second and third quadrant and joins the
// central site of the first quadrant to the central site of quadrant `target`.
void rewire(const PathMapping& map, std::set<std::pair<int, int>>& edges, std::vector<int>& degree, int r0, int c0,
            int size, int target) {
  if (size < 4) return;
  const int h = size / 2;
  struct Quad {
    int r, c, first, centre;
  };
  std::vector<Quad> quads;
  for (int qr : {r0, r0 + h}) {
    for (int qc : {c0, c0 + h}) {
      int first = std::numeric_limits<int>::max();
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < h; ++j) first = std::min(first, map.chain_index({qr + i, qc + j}));
      }
      const int cr = qr == r0 ? r0 + h - 1 : r0 + h;
      const int cc = qc == c0 ? c0 + h - 1 : c0 + h;
      quads.push_back({qr, qc, first, map.chain_index({cr, cc})});
    }
  }
  std::sort(quads.begin(), quads.end(), [](const Quad& a, const Quad& b) { return a.first < b.first; });
  const int cut_a = quads[2].first - 1;
  const int cut_b = quads[2].first;
  const int from = quads[0].centre;
  const int to = quads[target].centre;
  if (edges.count({cut_a, cut_b}) && degree[from] < 3 && degree[to] < 3 && from != to) {
    edges.erase({cut_a, cut_b});
    --degree[cut_a];
    --degree[cut_b];
    edges.insert({std::min(from, to), std::max(from, to)});
    ++degree[from];
    ++degree[to];
  }
  for (const Quad& q : quads) rewire(map, edges, degree, q.r, q.c, h, target);
}

TreeTopology build_hilbert_tree(int k, int target) {
  if (k < 2 || k > 6) throw ConfigError("tree order k must be between 2 and 6, got " + std::to_string(k));
  const int n = 1 << k;
  const LatticeSpec spec{n, n, Boundary::Open};
  const PathMapping map = hilbert_map(spec);
  std::set<std::pair<int, int>> edges;
  std::vector<int> degree(n * n + 1, 0);
  for (int i = 1; i < n * n; ++i) {
    edges.insert({i, i + 1});
    ++degree[i];
    ++degree[i + 1];
  }
  rewire(map, edges, degree, 0, 0, n, target);
  return TreeTopology::from_edges(n * n, {edges.begin(), edges.end()});
}

}  // namespace

TreeTopology build_ttn_a(int k) { return build_hilbert_tree(k, 2); }
TreeTopology build_ttn_b(int k) { return build_hilbert_tree(k, 3); }

TreeTopology load_topology(std::istream& in, int n_nodes) {
  std::vector<std::pair<int, int>> edges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    int a = 0;
    int b = 0;
    if (!(ls >> a)) continue;
    std::string rest;
    if (!(ls >> b) || (ls >> rest)) {
      throw ConfigError("topology line " + std::to_string(line_no) + ": expected two node labels");
    }
    if (a < 1 || b < 1 || a > n_nodes || b > n_nodes || a == b) {
      throw ConfigError("topology line " + std::to_string(line_no) + ": node label out of range");
    }
    edges.emplace_back(a, b);
  }
  return TreeTopology::from_edges(n_nodes, std::move(edges));
}

TreeTopology load_topology_file(const std::string& path, int n_nodes) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open topology file " + path);
  return load_topology(in, n_nodes);
}

void write_topology(std::ostream& out, const TreeTopology& topology) {
  for (const auto& [a, b] : topology.edges) out << a << ' ' << b << '\n';
}

std::vector<int> jw_positions(const TreeTopology& topology) {
  const auto adj = topology.adjacency();
  std::vector<int> pos(topology.n_nodes, -1);
  std::vector<int> stack{0};
  int next = 0;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (pos[v] >= 0) continue;
    pos[v] = next++;
    for (auto it = adj[v].rbegin(); it != adj[v].rend(); ++it) {
      if (pos[*it] < 0) stack.push_back(*it);
    }
  }
  return pos;
}

// ---------------------------------------------------------------- state

int TTNState::max_bond() const {
  int m = 0;
  const auto adj = topology.adjacency();
  for (int v = 0; v < topology.n_nodes; ++v) {
    for (std::size_t j = 0; j < adj[v].size(); ++j) m = std::max(m, nodes[v].leg(1 + static_cast<int>(j)).total_dim());
  }
  return m;
}

void TTNState::check() const {
  topology.validate();
  if (static_cast<int>(nodes.size()) != topology.n_nodes) throw ShapeError("TTN state: wrong node count");
  const auto adj = topology.adjacency();
  for (int v = 0; v < topology.n_nodes; ++v) {
    const int expect = 1 + static_cast<int>(adj[v].size()) + (v == 0 ? 1 : 0);
    if (nodes[v].rank() != expect) throw ShapeError("TTN state: node " + std::to_string(v + 1) + " has wrong rank");
    nodes[v].check();
    for (std::size_t j = 0; j < adj[v].size(); ++j) {
      const int x = adj[v][j];
      const auto& ax = adj[x];
      const int back = 1 + static_cast<int>(std::find(ax.begin(), ax.end(), v) - ax.begin());
      if (!(nodes[v].leg(1 + static_cast<int>(j)) == nodes[x].leg(back).dual())) {
        throw ShapeError("TTN state: bond legs of nodes " + std::to_string(v + 1) + " and " +
                         std::to_string(x + 1) + " do not match");
      }
    }
  }
}

namespace {

struct Rooted {
  std::vector<std::vector<int>> adj;
  std::vector<int> parent;
  std::vector<int> pos;     // preorder position
  std::vector<int> hi;      // last preorder position in the subtree
  std::vector<int> preorder;

  explicit Rooted(const TreeTopology& t) : adj(t.adjacency()), parent(t.n_nodes, -1) {
    pos = jw_positions(t);
    preorder.assign(t.n_nodes, 0);
    for (int v = 0; v < t.n_nodes; ++v) preorder[pos[v]] = v;
    for (int v : preorder) {
      for (int x : adj[v]) {
        if (x != parent[v] && !(v == 0 && x == 0)) parent[x] = v;
      }
    }
    parent[0] = -1;
    hi = pos;
    for (auto it = preorder.rbegin(); it != preorder.rend(); ++it) {
      if (parent[*it] >= 0) hi[parent[*it]] = std::max(hi[parent[*it]], hi[*it]);
    }
  }
  int slot(int v, int x) const {
    const auto& a = adj[v];
    return static_cast<int>(std::find(a.begin(), a.end(), x) - a.begin());
  }
  int leg(int v, int x) const { return 1 + slot(v, x); }
  // Edge id: the child end of the edge.
  int edge(int v, int x) const { return parent[x] == v ? x : v; }
  bool inside(int c, int p) const { return p >= pos[c] && p <= hi[c]; }
};

// ---------------------------------------------------------------- tree operator

struct NodeEntry {
  std::vector<int> ch;  // channel per adjacency slot
  local::Op op{};
  double coef = 1.0;
};

struct TreeOperator {
  std::vector<int> n_channels;  // per edge id (child node); root unused
  std::vector<int> done;        // per edge id, -1 if no term closes inside the subtree
  std::vector<std::vector<NodeEntry>> entries;
};

constexpr int kPass = -3;
constexpr int kParity = -2;
constexpr int kDone = -1;

TreeOperator build_tree_operator(const Rooted& rt, const TermList& terms) {
  const int n = static_cast<int>(rt.adj.size());
  if (terms.n_sites != n) throw ConfigError("terms and tree have different site counts");
  if (terms.empty()) throw ConfigError("empty term list");

  struct Term {
    int lo = 0;
    int hi = 0;
    local::Op op_lo{};
    local::Op op_hi{};
    double amp = 0.0;
  };
  std::vector<Term> list;
  const local::Op par = local::parity();
  for (const auto& h : terms.hoppings) {
    const int a = rt.pos[h.mu - 1];
    const int b = rt.pos[h.nu - 1];
    const local::Op cd = local::create(h.spin);
    const local::Op c = local::annihilate(h.spin);
    // c^dag_mu c_nu and its conjugate c^dag_nu c_mu, each as lower / upper endpoint operators.
    for (int dir = 0; dir < 2; ++dir) {
      const int pc = dir == 0 ? a : b;
      const int pa = dir == 0 ? b : a;
      Term t;
      t.lo = std::min(pc, pa);
      t.hi = std::max(pc, pa);
      t.amp = h.amplitude;
      t.op_lo = pc < pa ? local::matmul(cd, par) : local::matmul(par, c);
      t.op_hi = pc < pa ? c : cd;
      list.push_back(t);
    }
  }
  for (const auto& o : terms.onsite) {
    Term t;
    t.lo = t.hi = rt.pos[o.mu - 1];
    t.op_lo = local::double_occupancy();
    t.amp = o.amplitude;
    list.push_back(t);
  }

  TreeOperator op;
  op.n_channels.assign(n, 0);
  std::vector<std::map<int, int>> index(n);
  for (int c = 1; c < n; ++c) {
    index[c][kPass] = 0;
    op.n_channels[c] = 1;
  }
  const auto channel = [&](int c, int key) {
    auto [it, fresh] = index[c].try_emplace(key, op.n_channels[c]);
    if (fresh) ++op.n_channels[c];
    return it->second;
  };
  const local::Op id = local::identity();
  op.entries.assign(n, {});
  std::vector<std::set<std::pair<std::vector<int>, int>>> shared(n);

  for (int ti = 0; ti < static_cast<int>(list.size()); ++ti) {
    const Term& t = list[ti];
    std::vector<int> key(n, kPass);
    for (int c = 1; c < n; ++c) {
      const bool has_lo = rt.inside(c, t.lo);
      const bool has_hi = rt.inside(c, t.hi);
      if (has_lo && has_hi) {
        key[c] = kDone;
      } else if (has_lo || has_hi) {
        key[c] = ti;
      } else if (rt.pos[c] > t.lo && rt.hi[c] < t.hi) {
        key[c] = kParity;
      }
    }
    for (int v = 0; v < n; ++v) {
      NodeEntry e;
      bool is_shared = true;
      for (int x : rt.adj[v]) {
        const int c = rt.edge(v, x);
        if (key[c] >= 0) is_shared = false;
        e.ch.push_back(channel(c, key[c]));
      }
      const int p = rt.pos[v];
      int kind = 0;  // 0 identity, 1 parity, 2 endpoint
      if (p == t.lo) {
        e.op = t.op_lo;
        kind = 2;
      } else if (p == t.hi) {
        e.op = t.op_hi;
        kind = 2;
      } else if (p > t.lo && p < t.hi) {
        e.op = par;
        kind = 1;
      } else {
        e.op = id;
      }
      const bool contains = rt.inside(v, t.lo) && rt.inside(v, t.hi);
      bool child_contains = false;
      for (int x : rt.adj[v]) {
        if (x != rt.parent[v] && rt.inside(x, t.lo) && rt.inside(x, t.hi)) child_contains = true;
      }
      const bool lca = contains && !child_contains;
      if (lca) e.coef = t.amp;
      if (kind == 2 || lca) is_shared = false;
      if (is_shared) {
        if (!shared[v].insert({e.ch, kind}).second) continue;
      }
      op.entries[v].push_back(std::move(e));
    }
  }
  op.done.assign(n, -1);
  for (int c = 1; c < n; ++c) {
    if (const auto it = index[c].find(kDone); it != index[c].end()) op.done[c] = it->second;
  }
  return op;
}

// ---------------------------------------------------------------- flat block kernels

// Block list over a fixed set of legs with one contiguous payload; the hot
// loops run on these instead of the map-backed tensor.
struct FBlock {
  BlockKey key;
  std::array<int, kMaxRank> dim{};
  std::size_t off = 0;
  std::size_t size = 0;
};

struct FTensor {
  int rank = 0;
  std::vector<FBlock> blocks;
  std::vector<double> data;
};

struct KeyHash {
  std::size_t operator()(const BlockKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (int i = 0; i < k.rank; ++i) h = (h ^ static_cast<std::uint16_t>(k.idx[i])) * 1099511628211ull;
    return static_cast<std::size_t>(h);
  }
};

template <class V>
using KeyMap = std::unordered_map<BlockKey, V, KeyHash>;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

FBlock make_block(const BlockTensor& t, const BlockKey& key, std::size_t off) {
  FBlock b;
  b.key = key;
  b.off = off;
  b.size = 1;
  for (int l = 0; l < t.rank(); ++l) {
    b.dim[l] = t.leg(l).dim(key[l]);
    b.size *= static_cast<std::size_t>(b.dim[l]);
  }
  return b;
}

FTensor to_flat(const BlockTensor& t) {
  FTensor f;
  f.rank = t.rank();
  std::size_t off = 0;
  for (const auto& [key, data] : t.blocks()) {
    f.blocks.push_back(make_block(t, key, off));
    off += data.size();
  }
  f.data.reserve(off);
  for (const auto& [key, data] : t.blocks()) f.data.insert(f.data.end(), data.begin(), data.end());
  return f;
}

Charge key_flux(const std::vector<Leg>& legs, const BlockKey& key) {
  Charge q;
  for (std::size_t l = 0; l < legs.size(); ++l) {
    const Charge c = legs[l].charge(key[static_cast<int>(l)]);
    q += sign(legs[l].direction()) == 1 ? c : -c;
  }
  return q;
}

BlockTensor from_flat(const FTensor& f, const std::vector<Leg>& legs) {
  BlockTensor t(legs, f.blocks.empty() ? Charge{} : key_flux(legs, f.blocks.front().key));
  for (const FBlock& b : f.blocks) {
    t.set_block(b.key, std::vector<double>(f.data.begin() + static_cast<std::ptrdiff_t>(b.off),
                                           f.data.begin() + static_cast<std::ptrdiff_t>(b.off + b.size)));
  }
  return t;
}

// pre x dim[k] x post view of a block.
std::pair<Eigen::Index, Eigen::Index> split_at(const FBlock& b, int rank, int k) {
  Eigen::Index pre = 1;
  Eigen::Index post = 1;
  for (int l = 0; l < k; ++l) pre *= b.dim[l];
  for (int l = k + 1; l < rank; ++l) post *= b.dim[l];
  return {pre, post};
}

// One operator channel of an environment: ket sector j maps to bra sector bra[j]
// through the matrix m[j] (bra x ket).
struct Env {
  std::vector<int> bra;
  std::vector<linalg::Matrix> m;
  bool empty() const {
    return std::none_of(bra.begin(), bra.end(), [](int i) { return i >= 0; });
  }
};

FTensor apply_env(const Env& e, const FTensor& y, int k) {
  FTensor out;
  out.rank = y.rank;
  std::vector<std::size_t> src;
  std::size_t total = 0;
  for (std::size_t i = 0; i < y.blocks.size(); ++i) {
    const FBlock& b = y.blocks[i];
    const int j = b.key[k];
    if (j >= static_cast<int>(e.bra.size()) || e.bra[j] < 0) continue;
    FBlock nb = b;
    nb.key[k] = static_cast<std::int16_t>(e.bra[j]);
    nb.dim[k] = static_cast<int>(e.m[j].rows());
    nb.size = b.size / static_cast<std::size_t>(b.dim[k]) * static_cast<std::size_t>(nb.dim[k]);
    nb.off = total;
    total += nb.size;
    out.blocks.push_back(nb);
    src.push_back(i);
  }
  out.data.resize(total);
  std::uint64_t flops = 0;
  for (std::size_t n = 0; n < src.size(); ++n) {
    const FBlock& b = y.blocks[src[n]];
    const FBlock& nb = out.blocks[n];
    const linalg::Matrix& m = e.m[b.key[k]];
    const auto [pre, post] = split_at(b, y.rank, k);
    const Eigen::Index di = m.rows();
    const Eigen::Index dj = m.cols();
    const double* in = y.data.data() + b.off;
    double* o = out.data.data() + nb.off;
    if (post == 1) {
      RowMap(o, pre, di).noalias() = ConstRowMap(in, pre, dj) * m.transpose();
    } else {
      for (Eigen::Index p = 0; p < pre; ++p) {
        RowMap(o + p * di * post, di, post).noalias() = m * ConstRowMap(in + p * dj * post, dj, post);
      }
    }
    flops += static_cast<std::uint64_t>(2 * pre * di * dj * post);
  }
  add_flops(flops);
  return out;
}

// The identity channel of an environment is skipped rather than applied:
// pass for a subtree seen from its parent, done for the complement seen from a child.
struct LegEnv {
  int leg = 0;
  const std::vector<Env>* env = nullptr;
  int identity = 0;
};

struct ApplyItem {
  std::vector<int> ch;  // external channels, in LegEnv order
  local::Op op_a{};
  local::Op op_b{};
  double coef = 1.0;
  int out = 0;
};

using Leaf = std::function<void(const FTensor&, std::span<const ApplyItem* const>)>;

void run_trie(const FTensor& y, const std::vector<LegEnv>& legs, std::span<const ApplyItem* const> items,
              std::size_t depth, const Leaf& leaf) {
  if (depth == legs.size()) {
    leaf(y, items);
    return;
  }
  std::size_t i = 0;
  while (i < items.size()) {
    const int c = items[i]->ch[depth];
    std::size_t j = i;
    while (j < items.size() && items[j]->ch[depth] == c) ++j;
    const auto sub = items.subspan(i, j - i);
    if (c == legs[depth].identity) {
      run_trie(y, legs, sub, depth + 1, leaf);
    } else {
      const Env& e = (*legs[depth].env)[c];
      if (!e.empty()) {
        const FTensor y2 = apply_env(e, y, legs[depth].leg);
        if (!y2.blocks.empty()) run_trie(y2, legs, sub, depth + 1, leaf);
      }
    }
    i = j;
  }
}

void sort_items(std::vector<const ApplyItem*>& items) {
  std::sort(items.begin(), items.end(), [](const ApplyItem* a, const ApplyItem* b) {
    if (a->ch != b->ch) return a->ch < b->ch;
    return a->out < b->out;
  });
}

constexpr int kD = local::kDim;

std::array<double, kD * kD> site_matrix(std::span<const ApplyItem* const> group) {
  std::array<double, kD * kD> m{};
  for (const ApplyItem* it : group) {
    for (int i = 0; i < kD * kD; ++i) m[i] += it->coef * it->op_a[i];
  }
  return m;
}

std::array<double, kD * kD * kD * kD> pair_matrix(std::span<const ApplyItem* const> group) {
  constexpr int kP = kD * kD;
  std::array<double, kP * kP> m{};
  for (const ApplyItem* it : group) {
    for (int a2 = 0; a2 < kD; ++a2) {
      for (int a = 0; a < kD; ++a) {
        const double x = it->coef * it->op_a[a2 * kD + a];
        if (x == 0.0) continue;
        for (int b2 = 0; b2 < kD; ++b2) {
          for (int b = 0; b < kD; ++b) {
            const double z = it->op_b[b2 * kD + b];
            if (z != 0.0) m[(a2 * kD + b2) * kP + a * kD + b] += x * z;
          }
        }
      }
    }
  }
  return m;
}

BlockKey masked(BlockKey k, int a, int b = -1) {
  k[a] = 0;
  if (b >= 0) k[b] = 0;
  return k;
}

void axpy_block(double x, const double* src, double* dst, std::size_t n) {
  Eigen::Map<Eigen::VectorXd>(dst, static_cast<Eigen::Index>(n)) +=
      x * Eigen::Map<const Eigen::VectorXd>(src, static_cast<Eigen::Index>(n));
}

using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------- engine

class TreeEngine {
 public:
  TreeEngine(const TreeTopology& topo, const TermList& terms, const DMRGConfig& cfg)
      : topo_(topo), rt_(topo), cfg_(cfg), op_(build_tree_operator(rt_, terms)) {}

  void load(const TTNState& st) {
    t_ = st.nodes;
    total_ = st.total_charge;
    for (auto it = rt_.preorder.rbegin(); it != rt_.preorder.rend(); ++it) {
      if (rt_.parent[*it] >= 0) compute_env(*it, rt_.parent[*it]);
    }
  }

  TTNState state() const {
    TTNState st;
    st.topology = topo_;
    st.nodes = t_;
    st.center = 1;
    st.total_charge = total_;
    return st;
  }

  std::vector<std::pair<int, int>> euler_tour() const {
    std::vector<std::pair<int, int>> moves;
    std::function<void(int)> visit = [&](int v) {
      for (int x : rt_.adj[v]) {
        if (x == rt_.parent[v]) continue;
        moves.emplace_back(v, x);
        visit(x);
        moves.emplace_back(x, v);
      }
    };
    visit(0);
    return moves;
  }

  double update(int u, int v, int max_bond, double alpha, double& disc, int& used);

 private:
  int edge_cap(int u, int v, int m) const {
    const auto it = cfg_.edge_caps.find({std::min(u, v) + 1, std::max(u, v) + 1});
    return it == cfg_.edge_caps.end() ? m : std::min(m, it->second);
  }
  void compute_env(int u, int v);
  int identity(int from, int to) const { return rt_.parent[from] == to ? 0 : op_.done[rt_.edge(from, to)]; }
  LegEnv leg_env(int leg, int from, int to) const { return {leg, &env_.at({from, to}), identity(from, to)}; }
  const std::vector<ApplyItem>& pair_items(int u, int v);
  BlockTensor perturbation(const BlockTensor& theta, int u, int v, const std::vector<LegEnv>& ulegs,
                           std::span<const std::pair<int, int>> v_pairs) const;

  const TreeTopology& topo_;
  Rooted rt_;
  const DMRGConfig& cfg_;
  TreeOperator op_;
  std::vector<BlockTensor> t_;
  Charge total_;
  std::map<std::pair<int, int>, std::vector<Env>> env_;
  std::map<std::pair<int, int>, std::vector<ApplyItem>> pair_cache_;
};

// Orders the external legs by decreasing dimension so the large applications sit near the trie root.
std::vector<int> leg_order(const std::vector<LegEnv>& legs, const BlockTensor& t) {
  std::vector<int> order(legs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return t.leg(legs[a].leg).total_dim() > t.leg(legs[b].leg).total_dim();
  });
  return order;
}

void TreeEngine::compute_env(int u, int v) {
  const BlockTensor& tu = t_[u];
  const int k = rt_.leg(u, v);
  const int sv = rt_.slot(u, v);
  std::vector<LegEnv> raw;
  std::vector<int> raw_slot;
  for (std::size_t j = 0; j < rt_.adj[u].size(); ++j) {
    const int x = rt_.adj[u][j];
    if (x == v) continue;
    raw.push_back(leg_env(1 + static_cast<int>(j), x, u));
    raw_slot.push_back(static_cast<int>(j));
  }
  const std::vector<int> order = leg_order(raw, tu);
  std::vector<LegEnv> legs;
  for (int i : order) legs.push_back(raw[i]);

  std::vector<ApplyItem> items;
  const int skip = identity(u, v);
  for (const NodeEntry& e : op_.entries[u]) {
    if (e.ch[sv] == skip) continue;
    ApplyItem it;
    for (int i : order) it.ch.push_back(e.ch[raw_slot[i]]);
    it.op_a = e.op;
    it.coef = e.coef;
    it.out = e.ch[sv];
    items.push_back(std::move(it));
  }
  std::vector<const ApplyItem*> ptr;
  for (const auto& it : items) ptr.push_back(&it);
  sort_items(ptr);

  const FTensor bra = to_flat(tu);
  KeyMap<std::array<int, kD>> bra_index;
  for (std::size_t i = 0; i < bra.blocks.size(); ++i) {
    auto [it, fresh] = bra_index.try_emplace(masked(bra.blocks[i].key, 0, k));
    if (fresh) it->second.fill(-1);
    it->second[bra.blocks[i].key[0]] = static_cast<int>(i);
  }
  const int n_sec = tu.leg(k).n_sectors();
  const int rank = tu.rank();
  std::vector<Env> env(op_.n_channels[rt_.edge(u, v)]);
  const Leaf leaf = [&](const FTensor& y, std::span<const ApplyItem* const> group) {
    std::size_t i = 0;
    while (i < group.size()) {
      const int out = group[i]->out;
      std::size_t j = i;
      while (j < group.size() && group[j]->out == out) ++j;
      const auto m4 = site_matrix(group.subspan(i, j - i));
      i = j;
      Env& e = env[out];
      if (e.bra.empty()) {
        e.bra.assign(n_sec, -1);
        e.m.resize(n_sec);
      }
      for (const FBlock& yb : y.blocks) {
        const auto found = bra_index.find(masked(yb.key, 0, k));
        if (found == bra_index.end()) continue;
        const int s = yb.key[0];
        const int jk = yb.key[k];
        const auto [pre, post] = split_at(yb, rank, k);
        const Eigen::Index dj = yb.dim[k];
        for (int s2 = 0; s2 < kD; ++s2) {
          const double x = m4[s2 * kD + s];
          const int tb = found->second[s2];
          if (x == 0.0 || tb < 0) continue;
          const FBlock& bb = bra.blocks[tb];
          const int ik = bb.key[k];
          const Eigen::Index di = bb.dim[k];
          if (e.bra[jk] < 0) {
            e.bra[jk] = ik;
            e.m[jk] = linalg::Matrix::Zero(di, dj);
          } else if (e.bra[jk] != ik) {
            throw NumericalError("tree environment: inconsistent channel charge");
          }
          const double* tp = bra.data.data() + bb.off;
          const double* yp = y.data.data() + yb.off;
          if (post == 1) {
            e.m[jk].noalias() += x * ConstRowMap(tp, pre, di).transpose() * ConstRowMap(yp, pre, dj);
          } else {
            for (Eigen::Index p = 0; p < pre; ++p) {
              e.m[jk].noalias() += x * ConstRowMap(tp + p * di * post, di, post) *
                                   ConstRowMap(yp + p * dj * post, dj, post).transpose();
            }
          }
          add_flops(static_cast<std::uint64_t>(2 * pre * di * dj * post));
        }
      }
    }
  };
  run_trie(bra, legs, ptr, 0, leaf);
  env_[{u, v}] = std::move(env);
}

const std::vector<ApplyItem>& TreeEngine::pair_items(int u, int v) {
  auto it = pair_cache_.find({u, v});
  if (it != pair_cache_.end()) return it->second;
  const int su = rt_.slot(u, v);
  const int sv = rt_.slot(v, u);
  std::map<int, std::vector<const NodeEntry*>> by_channel;
  for (const NodeEntry& e : op_.entries[v]) by_channel[e.ch[sv]].push_back(&e);
  std::vector<ApplyItem> items;
  for (const NodeEntry& a : op_.entries[u]) {
    const auto found = by_channel.find(a.ch[su]);
    if (found == by_channel.end()) continue;
    for (const NodeEntry* b : found->second) {
      ApplyItem item;
      for (std::size_t j = 0; j < a.ch.size(); ++j) {
        if (static_cast<int>(j) != su) item.ch.push_back(a.ch[j]);
      }
      for (std::size_t j = 0; j < b->ch.size(); ++j) {
        if (static_cast<int>(j) != sv) item.ch.push_back(b->ch[j]);
      }
      item.op_a = a.op;
      item.op_b = b->op;
      item.coef = a.coef * b->coef;
      if (item.coef != 0.0) items.push_back(std::move(item));
    }
  }
  return pair_cache_.emplace(std::make_pair(u, v), std::move(items)).first->second;
}

// Upper bound on the elements of contract(t, t.dual()) over legs >= n_left:
// keys on the first n_left legs pair up within one fused charge.
double rho_elements(const BlockTensor& t, int n_left) {
  std::map<Charge, double> dim;
  std::set<BlockKey> seen;
  for (const auto& [key, data] : t.blocks()) {
    BlockKey k = BlockKey::of_rank(n_left);
    Charge q;
    double d = 1.0;
    for (int i = 0; i < n_left; ++i) {
      k[i] = key[i];
      const Leg& leg = t.leg(i);
      q += leg.direction() == Direction::Out ? leg.charge(key[i]) : -leg.charge(key[i]);
      d *= leg.dim(key[i]);
    }
    if (seen.insert(k).second) dim[q] += d;
  }
  double total = 0.0;
  for (const auto& [q, d] : dim) total += d * d;
  return total;
}

// Sum over operator channels on the (u, v) bond of the u-side half applied to
// theta, traced over the v-side legs. Normalised to unit trace.
BlockTensor TreeEngine::perturbation(const BlockTensor& theta, int u, int v, const std::vector<LegEnv>& ulegs,
                                     std::span<const std::pair<int, int>> v_pairs) const {
  const int su = rt_.slot(u, v);
  std::map<int, std::vector<ApplyItem>> by_channel;
  std::vector<int> u_slots;
  for (std::size_t j = 0; j < rt_.adj[u].size(); ++j) {
    if (rt_.adj[u][j] != v) u_slots.push_back(static_cast<int>(j));
  }
  for (const NodeEntry& e : op_.entries[u]) {
    ApplyItem it;
    for (int s : u_slots) it.ch.push_back(e.ch[s]);
    it.op_a = e.op;
    it.coef = e.coef;
    by_channel[e.ch[su]].push_back(std::move(it));
  }
  const FTensor flat = to_flat(theta);
  BlockTensor pert;
  double trace = 0.0;
  for (auto& [w, list] : by_channel) {
    std::vector<const ApplyItem*> p;
    for (const auto& it : list) p.push_back(&it);
    sort_items(p);
    FTensor acc;
    acc.rank = flat.rank;
    KeyMap<int> where;
    const Leaf leaf = [&](const FTensor& y, std::span<const ApplyItem* const> group) {
      const auto m4 = site_matrix(group);
      for (const FBlock& yb : y.blocks) {
        const int s = yb.key[0];
        for (int s2 = 0; s2 < kD; ++s2) {
          const double x = m4[s2 * kD + s];
          if (x == 0.0) continue;
          BlockKey nk = yb.key;
          nk[0] = static_cast<std::int16_t>(s2);
          auto [it, fresh] = where.try_emplace(nk, static_cast<int>(acc.blocks.size()));
          if (fresh) {
            FBlock nb = yb;
            nb.key = nk;
            nb.off = acc.data.size();
            acc.blocks.push_back(nb);
            acc.data.resize(acc.data.size() + nb.size, 0.0);
          }
          const FBlock& ab = acc.blocks[it->second];
          axpy_block(x, y.data.data() + yb.off, acc.data.data() + ab.off, yb.size);
        }
      }
    };
    run_trie(flat, ulegs, p, 0, leaf);
    if (acc.blocks.empty()) continue;
    const BlockTensor a = from_flat(acc, theta.legs());
    const double n2 = std::pow(a.norm(), 2);
    if (n2 == 0.0) continue;
    trace += n2;
    const BlockTensor r = contract(a, a.dual(), v_pairs);
    if (pert.rank() == 0) {
      pert = r;
    } else {
      pert.axpy(1.0, r);
    }
  }
  if (trace > 0.0) pert.scale(1.0 / trace);
  return pert;
}

double TreeEngine::update(int u, int v, int max_bond, double alpha, double& disc, int& used) {
  const int ku = rt_.leg(u, v);
  const int kv = rt_.leg(v, u);
  const int ru = t_[u].rank();
  const int rv = t_[v].rank();
  const BlockTensor theta0 = contract(t_[u], t_[v], {{ku, kv}});
  const auto u_leg = [&](int j) { return j < ku ? j : j - 1; };
  const auto v_leg = [&](int j) { return ru - 1 + (j < kv ? j : j - 1); };
  const int phys_u = 0;
  const int phys_v = v_leg(0);

  // External legs: u's other bonds, then v's other bonds (slot order).
  std::vector<LegEnv> raw;
  std::vector<int> u_ext;  // indices into raw belonging to u
  for (std::size_t j = 0; j < rt_.adj[u].size(); ++j) {
    const int x = rt_.adj[u][j];
    if (x == v) continue;
    u_ext.push_back(static_cast<int>(raw.size()));
    raw.push_back(leg_env(u_leg(1 + static_cast<int>(j)), x, u));
  }
  for (std::size_t j = 0; j < rt_.adj[v].size(); ++j) {
    const int y = rt_.adj[v][j];
    if (y == u) continue;
    raw.push_back(leg_env(v_leg(1 + static_cast<int>(j)), y, v));
  }
  const std::vector<int> order = leg_order(raw, theta0);
  std::vector<LegEnv> legs;
  for (int i : order) legs.push_back(raw[i]);

  const std::vector<ApplyItem>& base = pair_items(u, v);
  std::vector<ApplyItem> items;
  items.reserve(base.size());
  for (const ApplyItem& b : base) {
    ApplyItem it = b;
    it.ch.clear();
    for (int i : order) it.ch.push_back(b.ch[i]);
    items.push_back(std::move(it));
  }
  std::vector<const ApplyItem*> ptr;
  for (const auto& it : items) ptr.push_back(&it);
  sort_items(ptr);

  // Lanczos vectors are the payload of every allowed two-node block.
  FTensor space;
  space.rank = theta0.rank();
  {
    const BlockTensor probe(theta0.legs(), theta0.flux());
    std::size_t off = 0;
    for (const BlockKey& key : probe.allowed_keys()) {
      space.blocks.push_back(make_block(probe, key, off));
      off += space.blocks.back().size;
    }
    space.data.assign(off, 0.0);
  }
  if (space.data.empty()) throw NumericalError("no two-node block is compatible with the target charge");
  KeyMap<std::array<int, kD * kD>> index;
  for (std::size_t i = 0; i < space.blocks.size(); ++i) {
    const BlockKey& key = space.blocks[i].key;
    auto [it, fresh] = index.try_emplace(masked(key, phys_u, phys_v));
    if (fresh) it->second.fill(-1);
    it->second[key[phys_u] * kD + key[phys_v]] = static_cast<int>(i);
  }
  const auto n = static_cast<Eigen::Index>(space.data.size());
  linalg::Vector start = linalg::Vector::Zero(n);
  for (const auto& [key, data] : theta0.blocks()) {
    const auto found = index.find(masked(key, phys_u, phys_v));
    if (found == index.end()) continue;
    const int b = found->second[key[phys_u] * kD + key[phys_v]];
    if (b >= 0) std::copy(data.begin(), data.end(), start.data() + space.blocks[b].off);
  }

  constexpr int kP = kD * kD;
  const MatVec mv = [&](const linalg::Vector& x, linalg::Vector& y) {
    std::copy(x.data(), x.data() + n, space.data.begin());
    y.setZero(n);
    const Leaf leaf = [&](const FTensor& t, std::span<const ApplyItem* const> group) {
      const auto m16 = pair_matrix(group);
      for (const FBlock& tb : t.blocks) {
        const auto found = index.find(masked(tb.key, phys_u, phys_v));
        if (found == index.end()) continue;
        const int col = tb.key[phys_u] * kD + tb.key[phys_v];
        for (int r = 0; r < kP; ++r) {
          const double c = m16[r * kP + col];
          const int ob = found->second[r];
          if (c == 0.0 || ob < 0) continue;
          axpy_block(c, t.data.data() + tb.off, y.data() + space.blocks[ob].off, tb.size);
        }
      }
    };
    run_trie(space, legs, ptr, 0, leaf);
  };
  LanczosOptions lo;
  lo.max_iter = cfg_.lanczos_max_iter;
  lo.tol = cfg_.lanczos_tol;
  // Krylov vectors dominate memory on wide nodes; restart rather than exceed the budget.
  constexpr double kKrylovBytes = 1.5e9;
  lo.max_basis = static_cast<int>(std::clamp(kKrylovBytes / (8.0 * static_cast<double>(n)), 4.0,
                                             static_cast<double>(std::max(4, lo.max_iter))));
  const LanczosResult res = lanczos_lowest(mv, start, lo);
  std::copy(res.vector.data(), res.vector.data() + n, space.data.begin());
  BlockTensor theta = from_flat(space, theta0.legs());
  theta.prune();
  const double norm2 = std::pow(theta.norm(), 2);

  std::vector<int> left(ru - 1);
  std::iota(left.begin(), left.end(), 0);
  std::vector<std::pair<int, int>> v_pairs;
  for (int i = ru - 1; i < theta.rank(); ++i) v_pairs.emplace_back(i, i);
  const TruncationSpec spec{edge_cap(u, v, max_bond), cfg_.discard_cutoff};
  BlockTensor iso;
  // Mixing needs the u-side density matrix; past this size it is skipped for the bond.
  constexpr double kMixElements = 2.0e7;
  if (alpha > 0.0 && rho_elements(theta, ru - 1) <= kMixElements) {
    BlockTensor rho = contract(theta, theta.dual(), std::span<const std::pair<int, int>>(v_pairs));
    rho.scale(1.0 / norm2);
    std::vector<LegEnv> ulegs;
    for (int i : u_ext) ulegs.push_back(raw[i]);
    const BlockTensor pert = perturbation(theta, u, v, ulegs, v_pairs);
    if (pert.rank() > 0) rho.axpy(alpha, pert);
    iso = eigh_truncate(rho, ru - 1, spec).isometry;
  } else {
    iso = svd_truncate(theta, std::span<const int>(left), spec).left;
  }
  std::vector<std::pair<int, int>> u_pairs;
  for (int i = 0; i < ru - 1; ++i) u_pairs.emplace_back(i, i);
  BlockTensor center = contract(iso.dual(), theta, std::span<const std::pair<int, int>>(u_pairs));
  const double kept2 = std::pow(center.norm(), 2);
  disc = std::max(0.0, 1.0 - kept2 / norm2);
  if (kept2 > 0.0) center.scale(1.0 / std::sqrt(kept2));

  std::vector<int> pu(ru);
  for (int i = 0; i < ru; ++i) pu[i] = i < ku ? i : (i == ku ? ru - 1 : i - 1);
  std::vector<int> pv(rv);
  for (int i = 0; i < rv; ++i) pv[i] = i < kv ? i + 1 : (i == kv ? 0 : i);
  t_[u] = iso.permute(pu);
  t_[v] = center.permute(pv);
  used = t_[u].leg(ku).total_dim();
  compute_env(u, v);
  return res.value;
}

}  // namespace

TTNState ttn_product_state(const TreeTopology& topology, const std::vector<int>& states) {
  topology.validate();
  const int n = topology.n_nodes;
  if (static_cast<int>(states.size()) != n) throw ConfigError("product state length does not match the tree");
  for (int s : states) {
    if (s < 0 || s > 3) throw ConfigError("local state must be 0..3");
  }
  const Rooted rt(topology);
  std::vector<Charge> sub(n);
  for (auto it = rt.preorder.rbegin(); it != rt.preorder.rend(); ++it) {
    const int v = *it;
    sub[v] += local::state_charge(states[v]);
    if (rt.parent[v] >= 0) sub[rt.parent[v]] += sub[v];
  }
  TTNState st;
  st.topology = topology;
  st.total_charge = sub[0];
  st.center = 1;
  for (int v = 0; v < n; ++v) {
    std::vector<Leg> legs{local::physical_leg(Direction::In)};
    BlockKey key = BlockKey::of_rank(1 + static_cast<int>(rt.adj[v].size()) + (v == 0 ? 1 : 0));
    key[0] = static_cast<std::int16_t>(states[v]);
    for (int x : rt.adj[v]) {
      const bool up = x == rt.parent[v];
      legs.emplace_back(up ? Direction::Out : Direction::In, std::vector<Sector>{{up ? sub[v] : sub[x], 1}});
    }
    if (v == 0) legs.emplace_back(Direction::Out, std::vector<Sector>{{sub[0], 1}});
    BlockTensor t(std::move(legs));
    t.set_block(key, {1.0});
    st.nodes.push_back(std::move(t));
  }
  st.check();
  return st;
}

linalg::Matrix ttn_operator_dense(const TreeTopology& topology, const TermList& terms) {
  if (topology.n_nodes > 5) throw ShapeError("ttn_operator_dense supports at most 5 nodes");
  topology.validate();
  const Rooted rt(topology);
  const TreeOperator op = build_tree_operator(rt, terms);
  const auto kron = [](const linalg::Matrix& a, const linalg::Matrix& b) {
    linalg::Matrix r(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
    return r;
  };
  std::function<std::vector<linalg::Matrix>(int)> build = [&](int v) {
    std::vector<std::vector<linalg::Matrix>> child;
    std::vector<int> child_slot;
    int dim = local::kDim;
    for (std::size_t j = 0; j < rt.adj[v].size(); ++j) {
      const int x = rt.adj[v][j];
      if (x == rt.parent[v]) continue;
      child.push_back(build(x));
      child_slot.push_back(static_cast<int>(j));
      dim *= static_cast<int>(child.back().front().rows());
    }
    const int up = rt.parent[v] >= 0 ? rt.slot(v, rt.parent[v]) : -1;
    const int n_out = up >= 0 ? op.n_channels[v] : 1;
    std::vector<linalg::Matrix> out(n_out, linalg::Matrix::Zero(dim, dim));
    for (const NodeEntry& e : op.entries[v]) {
      linalg::Matrix m(local::kDim, local::kDim);
      for (int b = 0; b < local::kDim; ++b) {
        for (int k = 0; k < local::kDim; ++k) m(b, k) = e.coef * e.op[b * local::kDim + k];
      }
      for (std::size_t c = 0; c < child.size(); ++c) m = kron(m, child[c][e.ch[child_slot[c]]]);
      out[up >= 0 ? e.ch[up] : 0] += m;
    }
    return out;
  };
  return build(0).front();
}

std::vector<int> ttn_operator_bonds(const TreeTopology& topology, const TermList& terms) {
  topology.validate();
  const Rooted rt(topology);
  const TreeOperator op = build_tree_operator(rt, terms);
  std::vector<int> out;
  for (const auto& [a, b] : topology.edges) out.push_back(op.n_channels[rt.edge(a - 1, b - 1)]);
  return out;
}

DMRGResult ttn_ground_state(const TreeTopology& topology, const TermList& terms, const DMRGConfig& config,
                            const std::vector<int>& initial_states, TTNState* final_state) {
  config.validate();
  topology.validate();
  if (topology.n_nodes < 2) throw ConfigError("two-node sweeps need at least two nodes");
  for (const auto& [edge, cap] : config.edge_caps) {
    if (!topology.has_edge(edge.first, edge.second) || cap < 1) {
      throw ConfigError("edge cap on " + std::to_string(edge.first) + "-" + std::to_string(edge.second) +
                        " does not name a tree edge with a positive cap");
    }
  }
  TreeEngine eng(topology, terms, config);
  eng.load(ttn_product_state(topology, initial_states));
  const auto moves = eng.euler_tour();

  DMRGResult result;
  result.n_sites = topology.n_nodes;
  double alpha = config.alpha;
  double prev = std::numeric_limits<double>::quiet_NaN();
  const int total = config.schedule.size();
  for (int k = 0; k < total; ++k) {
    const auto t0 = Clock::now();
    const int m = config.schedule.max_bond[k];
    const double a = k >= total - config.pure_final_sweeps ? 0.0 : alpha;
    SweepRecord rec;
    rec.sweep = k + 1;
    rec.max_bond_target = m;
    rec.alpha = a;
    for (const auto& [u, v] : moves) {
      double disc = 0.0;
      int used = 0;
      rec.energy = eng.update(u, v, m, a, disc, used);
      rec.max_discarded = std::max(rec.max_discarded, disc);
      rec.max_bond_used = std::max(rec.max_bond_used, used);
    }
    rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (config.log) {
      *config.log << "sweep " << rec.sweep << " tree m=" << m << " used=" << rec.max_bond_used
                  << " trunc=" << std::scientific << std::setprecision(3) << rec.max_discarded << " E=" << std::fixed
                  << std::setprecision(12) << rec.energy << " t=" << std::setprecision(2) << rec.seconds << "s"
                  << std::defaultfloat << std::endl;
    }
    result.sweeps.push_back(rec);
    const double delta = std::isnan(prev) ? std::numeric_limits<double>::infinity() : std::abs(rec.energy - prev);
    const double improvement = std::isnan(prev) ? std::numeric_limits<double>::infinity() : prev - rec.energy;
    if (improvement < 10.0 * config.criteria.energy_threshold) {
      alpha = std::max(config.alpha_floor, alpha * config.alpha_decay);
    }
    prev = rec.energy;
    if (rec.max_discarded < config.criteria.trunc_threshold && delta < config.criteria.energy_threshold) {
      result.converged = true;
      if (config.early_stop) break;
    }
  }
  result.final_energy = result.sweeps.back().energy;
  result.energy_per_site = result.final_energy / topology.n_nodes;
  if (final_state) *final_state = eng.state();
  return result;
}

std::uint64_t ttn_node_update_flops(int z, int m) {
  if (z < 1 || z > 3 || m < 1) throw ConfigError("synthetic node needs 1 <= z <= 3 and m >= 1");
  std::mt19937_64 rng(7);
  const Leg phys = local::physical_leg(Direction::In);
  const Leg in_bond(Direction::In, {{Charge{}, m}});
  std::vector<Sector> out_sectors;
  for (int s = 0; s < local::kDim; ++s) out_sectors.push_back({local::state_charge(s), m});
  const Leg out_bond(Direction::Out, out_sectors);
  std::vector<Leg> legs{phys};
  for (int i = 0; i + 1 < z; ++i) legs.push_back(in_bond);
  legs.push_back(out_bond);
  const BlockTensor t = BlockTensor::random(legs, {}, rng);
  const BlockTensor env = BlockTensor::random({in_bond, in_bond.dual()}, {}, rng);
  const int k = z;  // environment toward the out bond
  reset_flop_count();
  BlockTensor y = t;
  for (int i = 1; i < z; ++i) y = apply_on_leg(env, y, i);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < t.rank(); ++i) {
    if (i != k) pairs.emplace_back(i, i);
  }
  const BlockTensor r = contract(t.dual(), y, std::span<const std::pair<int, int>>(pairs));
  (void)r;
  return flop_count();
}

}  // namespace curvemps
