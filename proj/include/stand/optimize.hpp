#pragma once

#include <memory>

#include "stand/draft_tree.hpp"
#include "stand/engine.hpp"

namespace stand {

struct OptimizationConfig {
  int n_problems = 30;
  int trajectories_per_problem = 4;
  int max_tokens = 200;
  std::size_t target_nodes = 80;
  std::uint64_t seed = 0;
  DraftMode mode = DraftMode::stochastic;
};

struct OptimizationResult {
  TreeTopology tree;
  NodeStats stats;  // measured on the initial tree
};

// The 625 -> 80 pipeline: speculative decoding over the measurement problems
// with per-node acceptance tracking on `initial`, then greedy top-k pruning.
// Problems are independent decodes (distinct prompts) sharing nothing but
// the measured statistics.
OptimizationResult optimize_tree(std::shared_ptr<const TargetModel> target,
                                 const TreeTopology& initial,
                                 const OptimizationConfig& config);

// Mean acceptance length of `topology` over a block of seeded problems;
// the benchmark used to compare candidate trees.
double benchmark_accept_length(std::shared_ptr<const TargetModel> target,
                               const TreeTopology& topology, DraftMode mode,
                               int n_problems, int trajectories, int max_tokens,
                               std::uint64_t seed);

// Default 80-node topology shipped with the binary; produced by running
// optimize_tree on the synthetic redundant benchmark.
TreeTopology builtin_optimized_tree();

}  // namespace stand
