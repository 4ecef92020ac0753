#include "stand/optimize.hpp"

namespace stand {

namespace {

std::vector<TokenId> problem_prompt(int problem, int vocab_size) {
  // Two-token prompts cycling through the vocabulary.
  return {static_cast<TokenId>(problem % vocab_size),
          static_cast<TokenId>((problem * 7 + 3) % vocab_size)};
}

}  // namespace

OptimizationResult optimize_tree(std::shared_ptr<const TargetModel> target,
                                 const TreeTopology& initial,
                                 const OptimizationConfig& config) {
  if (config.n_problems < 1)
    throw std::invalid_argument("measurement problem set is empty");
  validate_topology(initial);

  NodeStats stats(initial.nodes.size());
  for (int p = 0; p < config.n_problems; ++p) {
    SessionConfig sc;
    sc.mode = config.mode;
    sc.scope = StoreScope::per_problem;
    sc.seed = config.seed + static_cast<std::uint64_t>(p) * 7919;
    sc.max_tokens = config.max_tokens;
    Session session(target, initial, sc);
    session.attach_stats(&stats);
    session.run_problem(problem_prompt(p, target->vocab_size()),
                        config.trajectories_per_problem);
  }

  OptimizationResult result{prune_to_top_k(initial, stats,
                                           config.target_nodes),
                            std::move(stats)};
  return result;
}

double benchmark_accept_length(std::shared_ptr<const TargetModel> target,
                               const TreeTopology& topology, DraftMode mode,
                               int n_problems, int trajectories,
                               int max_tokens, std::uint64_t seed) {
  std::uint64_t tokens = 0, rounds = 0;
  for (int p = 0; p < n_problems; ++p) {
    SessionConfig sc;
    sc.mode = mode;
    sc.scope = StoreScope::per_problem;
    sc.seed = seed + static_cast<std::uint64_t>(p) * 104729;
    sc.max_tokens = max_tokens;
    Session session(target, topology, sc);
    auto results =
        session.run_problem(problem_prompt(p, target->vocab_size()),
                            trajectories);
    for (const auto& r : results) {
      tokens += r.metrics.tokens;
      rounds += r.metrics.rounds;
    }
  }
  return rounds ? static_cast<double>(tokens) / rounds : 1.0;
}

TreeTopology builtin_optimized_tree() {
  static const char* kOptimized80Json =
#include "builtin_optimized_tree.inc"
      ;
  return parse_topology_json(kOptimized80Json);
}

}  // namespace stand
