#pragma once

#include <vector>

#include "stand/drafter.hpp"
#include "stand/target_model.hpp"
#include "stand/types.hpp"

namespace stand {

// Accept/reject record for one draft node position.
struct NodeTrace {
  int node_id;
  TokenId token;
  bool accepted;
};

struct PositionResult {
  bool accepted = false;
  int sibling_index = -1;  // which sibling was accepted
  // Final residual after all rejections (valid when !accepted).
  DenseDistribution residual;
  std::vector<bool> rejected;  // parallel to the sibling list
};

// Sequential rejection over an ordered sibling group: sibling x with draft
// distribution q is accepted with min(1, p_cur(x)/q(x)); on rejection
// p_cur <- norm(max(0, p_cur - q)) and the next sibling's q is conditioned
// on rejected tokens being removed (the drafter's without-replacement rule).
// When the residual mass vanishes, remaining siblings auto-reject and the
// residual falls back to the original p restricted to non-rejected tokens.
PositionResult verify_position(
    const DenseDistribution& p,
    const std::vector<TokenId>& sibling_tokens,
    const std::vector<std::vector<WeightedToken>>& sibling_qs, Rng& rng);

struct VerificationOutcome {
  std::vector<int> accepted_node_ids;     // root-down path, possibly empty
  std::vector<TokenId> accepted_tokens;   // tokens along that path
  TokenId bonus = -1;
  int accepted_length = 0;      // |path| + 1, bonus included
  int positions_evaluated = 0;  // filled draft nodes + committed position
  std::vector<NodeTrace> trace;
  // Target distribution at each accepted position plus the bonus position
  // (size accepted_length); these feed the store update.
  std::vector<DenseDistribution> path_target_dists;
};

// Walks the draft tree from the committed position, verifying each accepted
// node's children and sampling the bonus token at the first position with no
// accepted child. The emitted token stream is distributed exactly as plain
// autoregressive sampling from the target. Position count charges one target
// evaluation per filled node plus the committed position.
VerificationOutcome verify_tree(std::span<const TokenId> context,
                                const DraftTree& draft,
                                const TargetModel& target, Rng& rng);

struct CostSummary {
  std::uint64_t tokens = 0;
  std::uint64_t positions = 0;
  std::uint64_t rounds = 0;
  double positions_per_token() const {
    return tokens ? static_cast<double>(positions) / tokens : 0.0;
  }
  double rounds_per_token() const {
    return tokens ? static_cast<double>(rounds) / tokens : 0.0;
  }
};

// Aggregates per-round (accepted length, positions) pairs into the
// calls-per-token cost proxy.
CostSummary count_target_calls(
    const std::vector<std::pair<int, int>>& per_round);

}  // namespace stand
