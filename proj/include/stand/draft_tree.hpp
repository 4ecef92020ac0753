#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stand/types.hpp"

namespace stand {

// Static, ancestor-closed draft-tree shape. Node 0 is the root: the already
// committed context position at depth 0; it is not counted as a draft node.
// Child order is total and stable; it is the order in which the drafter
// assigns sampled tokens to slots.
struct TreeTopology {
  struct Node {
    int id = 0;
    int parent = -1;  // -1 for the root
    int depth = 0;
    std::vector<int> children;
  };
  std::vector<Node> nodes;  // indexed by id, root first

  std::size_t draft_node_count() const { return nodes.size() - 1; }
  int max_depth() const;
};

// Throws std::invalid_argument when connectivity, ancestor-closure, depth
// consistency, or child ordering is broken. Every topology emitted by this
// module passes it; tests reuse it as the single structural oracle.
void validate_topology(const TreeTopology& topology);

// Per-node acceptance bookkeeping, indexed by topology node id. Entry 0
// (the root) stays zero.
struct NodeStats {
  std::vector<std::uint64_t> acceptance;
  std::vector<std::uint64_t> visits;

  explicit NodeStats(std::size_t n_nodes = 0)
      : acceptance(n_nodes, 0), visits(n_nodes, 0) {}
};

// Increments acceptance along `accepted_path` (topology node ids, starting
// at a level-1 node, parent-connected) and visits for every drafted node of
// the round. Disconnected paths are input errors.
void record_acceptance(NodeStats& stats, const TreeTopology& topology,
                       const std::vector<int>& accepted_path,
                       const std::vector<int>& drafted_nodes);

// Greedy top-k pruning with forced ancestor inclusion: repeatedly take the
// highest-acceptance unselected node together with its missing ancestors
// until exactly min(k, draft nodes) are selected. Ties break toward
// breadth-first order, so all-zero stats yield the shallowest k nodes.
// Output ids are relabeled breadth-first and children are reordered by
// descending acceptance.
TreeTopology prune_to_top_k(const TreeTopology& topology,
                            const NodeStats& stats, std::size_t k);

// Per-depth draft-node counts, index 0 = depth 1.
std::vector<std::size_t> depth_histogram(const TreeTopology& topology);

// The 625-node, depth-20 initialization tree: wide shallow levels with a
// long narrowing tail. The per-depth profile is an artifact constant.
TreeTopology build_initial_tree();

// Simple chain/branchy shapes for tests and small benchmarks:
// children_per_depth[d] children under every node at depth d.
TreeTopology build_uniform_tree(const std::vector<int>& children_per_depth);

// Seeded random ancestor-closed k-node subtree (pruning baseline).
TreeTopology random_subtree(const TreeTopology& topology, std::size_t k,
                            Rng& rng);

std::string topology_to_json(const TreeTopology& topology);
TreeTopology parse_topology_json(const std::string& text);
void save_topology(const TreeTopology& topology, const std::string& path);
TreeTopology load_topology(const std::string& path);

void save_stats(const NodeStats& stats, const std::string& path);
NodeStats load_stats(const std::string& path, std::size_t n_nodes);

}  // namespace stand
