#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "curvemps/dmrg.hpp"
#include "curvemps/hamiltonian.hpp"
#include "curvemps/linalg.hpp"
#include "curvemps/symtensor.hpp"

namespace curvemps {

// Nodes are chain indices 1..n_nodes, each carrying a physical site.
struct TreeTopology {
  int n_nodes = 0;
  std::vector<std::pair<int, int>> edges;  // 1-based, first < second, sorted

  // Sorted neighbour lists, 0-based.
  std::vector<std::vector<int>> adjacency() const;
  int degree(int node) const;  // 1-based node
  bool has_edge(int a, int b) const;
  // Connected, acyclic, N-1 edges, degree <= 3. Throws ConfigError.
  void validate() const;

  static TreeTopology path(int n_nodes);
  static TreeTopology from_edges(int n_nodes, std::vector<std::pair<int, int>> edges);
};

// Hilbert-curve trees on the 2^k x 2^k lattice; k = 2 is the 4x4 network,
// larger k applies the same rewiring recursively (experimental).
TreeTopology build_ttn_a(int k);
TreeTopology build_ttn_b(int k);

// "a b" per line, 1-based; '#' starts a comment.
TreeTopology load_topology(std::istream& in, int n_nodes);
TreeTopology load_topology_file(const std::string& path, int n_nodes);
void write_topology(std::ostream& out, const TreeTopology& topology);

// Fermion ordering on the tree: depth-first preorder from node 1, neighbours in
// increasing label order. Returns position[node - 1] (0-based positions).
std::vector<int> jw_positions(const TreeTopology& topology);

// Node tensors carry legs [physical (In), one bond per neighbour in adjacency
// order]; node 1 has an extra last leg (Out) holding the total charge. Bonds
// point from child to parent in the tree rooted at node 1.
struct TTNState {
  TreeTopology topology;
  std::vector<BlockTensor> nodes;
  int center = 1;  // 1-based
  Charge total_charge;

  int max_bond() const;
  void check() const;
};

TTNState ttn_product_state(const TreeTopology& topology, const std::vector<int>& states);

// Dense Hamiltonian assembled from the tree operator, in the Kronecker basis of
// the fermion ordering (position 0 most significant). At most 5 nodes.
linalg::Matrix ttn_operator_dense(const TreeTopology& topology, const TermList& terms);

// Bond dimension of the tree operator on each edge, in topology.edges order.
std::vector<int> ttn_operator_bonds(const TreeTopology& topology, const TermList& terms);

// Two-node sweeps along an Euler tour of the tree. `initial_states` gives the
// product state in chain order. DMRGResult::final_state stays empty; the tree
// state is returned through `final_state` when given.
DMRGResult ttn_ground_state(const TreeTopology& topology, const TermList& terms, const DMRGConfig& config,
                            const std::vector<int>& initial_states, TTNState* final_state = nullptr);

// Flops counted for one environment update through a synthetic degree-z node
// whose bonds all have dimension m.
std::uint64_t ttn_node_update_flops(int z, int m);

}  // namespace curvemps
