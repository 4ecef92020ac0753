#include "stand/engine.hpp"

#include <algorithm>
#include <chrono>

namespace stand {

DecodeMetrics compute_metrics(const std::vector<RoundTrace>& rounds,
                              double wall_ms,
                              std::uint64_t prefill_positions) {
  DecodeMetrics m;
  for (const auto& r : rounds) {
    m.tokens += r.accepted_length;
    m.target_positions += r.positions_evaluated;
    m.rounds += 1;
  }
  m.prefill_positions = prefill_positions;
  m.accept_len_mean =
      m.rounds ? static_cast<double>(m.tokens) / m.rounds : 1.0;
  m.wall_ms = wall_ms;
  m.throughput_tokens_per_s =
      wall_ms > 0.0 ? 1000.0 * static_cast<double>(m.tokens) / wall_ms : 0.0;
  return m;
}

Session::Session(std::shared_ptr<const TargetModel> target,
                 TreeTopology topology, SessionConfig config)
    : target_(std::move(target)), topology_(std::move(topology)),
      config_(config), store_(target_->vocab_size()), rng_(config.seed),
      noise_(config.seed ^ 0xd1b54a32d192ed03ull, config.noise_refill) {
  validate_topology(topology_);
}

TrajectoryResult Session::decode_trajectory(std::span<const TokenId> prompt) {
  if (prompt.empty())
    throw std::invalid_argument("decode_trajectory requires a prompt");
  auto t0 = std::chrono::steady_clock::now();

  TrajectoryResult result;
  std::uint64_t prefill_positions = 0;
  if (config_.prefill_seeding) {
    for (std::size_t i = 1; i < prompt.size(); ++i) {
      auto ctx = prompt.subspan(0, i);
      store_.update(ctx, target_->next_distribution(ctx));
      ++prefill_positions;
    }
  }

  std::vector<TokenId> committed(prompt.begin(), prompt.end());
  std::size_t prompt_len = prompt.size();
  bool stopped = false;

  while (!stopped &&
         committed.size() - prompt_len <
             static_cast<std::size_t>(config_.max_tokens)) {
    auto draft =
        build_draft(committed, topology_, store_, noise_, config_.mode);
    std::vector<TokenId> round_tokens;
    int positions = 0;

    if (draft.empty()) {
      // Cold store: one plain autoregressive step.
      DenseDistribution p = target_->next_distribution(committed);
      TokenId tok = sample_from(p, rng_);
      store_.update(committed, p);
      committed.push_back(tok);
      round_tokens.push_back(tok);
      positions = 1;
      if (stats_) record_acceptance(*stats_, topology_, {}, {});
    } else {
      auto outcome = verify_tree(committed, draft, *target_, rng_);
      positions = outcome.positions_evaluated;
      if (stats_)
        record_acceptance(*stats_, topology_, outcome.accepted_node_ids,
                          draft.filled_ids());
      round_tokens = outcome.accepted_tokens;
      round_tokens.push_back(outcome.bonus);
      for (std::size_t i = 0; i < round_tokens.size(); ++i) {
        store_.update(committed, outcome.path_target_dists[i]);
        committed.push_back(round_tokens[i]);
      }
    }

    // Stop handling: emit the stop token, discard anything after it.
    for (std::size_t i = 0; i < round_tokens.size(); ++i) {
      if (std::find(config_.stop_tokens.begin(), config_.stop_tokens.end(),
                    round_tokens[i]) != config_.stop_tokens.end()) {
        std::size_t drop = round_tokens.size() - (i + 1);
        committed.resize(committed.size() - drop);
        round_tokens.resize(i + 1);
        stopped = true;
        break;
      }
    }
    // Budget: never emit more than max_tokens.
    std::size_t emitted = committed.size() - prompt_len;
    if (emitted > static_cast<std::size_t>(config_.max_tokens)) {
      std::size_t drop = emitted - config_.max_tokens;
      committed.resize(committed.size() - drop);
      round_tokens.resize(round_tokens.size() - drop);
    }
    result.rounds.push_back(
        {static_cast<int>(round_tokens.size()), positions});
  }

  result.tokens.assign(committed.begin() + prompt_len, committed.end());
  auto t1 = std::chrono::steady_clock::now();
  double wall_ms =
      std::chrono::duration<double, std::milli>(t1 - t0).count();
  result.metrics = compute_metrics(result.rounds, wall_ms, prefill_positions);
  return result;
}

std::vector<TrajectoryResult> Session::run_problem(
    std::span<const TokenId> prompt, int n_trajectories) {
  if (n_trajectories < 1)
    throw std::invalid_argument("n_trajectories must be >= 1");
  if (config_.scope == StoreScope::per_problem) store_.clear();
  std::vector<TrajectoryResult> results;
  results.reserve(n_trajectories);
  for (int i = 0; i < n_trajectories; ++i) {
    if (config_.scope == StoreScope::per_trajectory) store_.clear();
    results.push_back(decode_trajectory(prompt));
  }
  return results;
}

}  // namespace stand
