#pragma once

#include <memory>
#include <string>
#include <vector>

#include "stand/drafter.hpp"
#include "stand/draft_tree.hpp"
#include "stand/ngram_store.hpp"
#include "stand/target_model.hpp"
#include "stand/verifier.hpp"

namespace stand {

enum class StoreScope { per_trajectory, per_problem, global };

struct SessionConfig {
  DraftMode mode = DraftMode::stochastic;
  StoreScope scope = StoreScope::per_problem;
  std::uint64_t seed = 0;
  int max_tokens = 256;
  std::vector<TokenId> stop_tokens;
  bool prefill_seeding = true;
  std::size_t noise_refill = GumbelNoiseCache::kDefaultRefill;
};

struct RoundTrace {
  int accepted_length = 0;
  int positions_evaluated = 0;
};

struct DecodeMetrics {
  std::uint64_t tokens = 0;
  std::uint64_t rounds = 0;
  std::uint64_t target_positions = 0;
  std::uint64_t prefill_positions = 0;
  double accept_len_mean = 0.0;  // tokens / rounds
  double wall_ms = 0.0;
  double throughput_tokens_per_s = 0.0;
};

struct TrajectoryResult {
  std::vector<TokenId> tokens;
  std::vector<RoundTrace> rounds;
  DecodeMetrics metrics;
};

DecodeMetrics compute_metrics(const std::vector<RoundTrace>& rounds,
                              double wall_ms, std::uint64_t prefill_positions);

// One decode session: owns the store, the rng streams, and the drafting
// configuration. Sessions are single-threaded; parallel problems use
// independent sessions.
class Session {
 public:
  Session(std::shared_ptr<const TargetModel> target, TreeTopology topology,
          SessionConfig config);

  // Prefill -> loop(draft -> verify -> commit -> store update). The store is
  // updated with the target distribution at every accepted position and the
  // bonus position; draft-only positions never feed it.
  TrajectoryResult decode_trajectory(std::span<const TokenId> prompt);

  // Sequential trajectories sharing the store under the session scope.
  // per_problem resets the store at the start of each problem,
  // per_trajectory before every trajectory, global never.
  std::vector<TrajectoryResult> run_problem(std::span<const TokenId> prompt,
                                            int n_trajectories);

  NGramStore& store() { return store_; }
  const NGramStore& store() const { return store_; }
  const TreeTopology& topology() const { return topology_; }
  const SessionConfig& config() const { return config_; }

  // Optional acceptance-statistics sink for tree optimization runs.
  void attach_stats(NodeStats* stats) { stats_ = stats; }

 private:
  std::shared_ptr<const TargetModel> target_;
  TreeTopology topology_;
  SessionConfig config_;
  NGramStore store_;
  Rng rng_;
  GumbelNoiseCache noise_;
  NodeStats* stats_ = nullptr;
};

}  // namespace stand
