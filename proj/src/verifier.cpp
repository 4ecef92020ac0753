#include "stand/verifier.hpp"

#include <algorithm>

namespace stand {

namespace {
constexpr double kMassGuard = 1e-12;
}

PositionResult verify_position(
    const DenseDistribution& p,
    const std::vector<TokenId>& sibling_tokens,
    const std::vector<std::vector<WeightedToken>>& sibling_qs, Rng& rng) {
  if (sibling_tokens.size() != sibling_qs.size())
    throw std::invalid_argument("sibling token/q lists differ in length");

  PositionResult result;
  result.rejected.assign(sibling_tokens.size(), false);
  DenseDistribution p_cur = p;
  bool exhausted = false;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::size_t i = 0; i < sibling_tokens.size(); ++i) {
    TokenId x = sibling_tokens[i];
    double q_x = 0.0;
    for (const auto& w : sibling_qs[i])
      if (w.token == x) q_x = w.prob;
    if (q_x <= 0.0)
      throw std::logic_error("drafted token has zero draft probability");

    if (!exhausted) {
      double accept_prob = std::min(1.0, p_cur[x] / q_x);
      if (unit(rng) < accept_prob) {
        result.accepted = true;
        result.sibling_index = static_cast<int>(i);
        return result;
      }
    }
    result.rejected[i] = true;

    if (!exhausted) {
      double mass = 0.0;
      for (const auto& w : sibling_qs[i]) {
        std::size_t t = static_cast<std::size_t>(w.token);
        p_cur[t] = std::max(0.0, p_cur[t] - w.prob);
      }
      for (double v : p_cur) mass += v;
      if (mass <= kMassGuard) {
        exhausted = true;
      } else {
        for (double& v : p_cur) v /= mass;
      }
    }
  }

  if (exhausted) {
    // Residual vanished: fall back to the pre-round p restricted to
    // non-rejected tokens.
    p_cur = p;
    for (std::size_t i = 0; i < sibling_tokens.size(); ++i)
      if (result.rejected[i]) p_cur[sibling_tokens[i]] = 0.0;
    double mass = 0.0;
    for (double v : p_cur) mass += v;
    if (mass <= kMassGuard) {
      // Last resort: uniform over non-rejected tokens.
      std::vector<bool> banned(p.size(), false);
      for (std::size_t i = 0; i < sibling_tokens.size(); ++i)
        if (result.rejected[i]) banned[sibling_tokens[i]] = true;
      std::size_t open = 0;
      for (bool b : banned)
        if (!b) ++open;
      for (std::size_t t = 0; t < p_cur.size(); ++t)
        p_cur[t] = banned[t] ? 0.0 : 1.0 / open;
    } else {
      for (double& v : p_cur) v /= mass;
    }
  }
  result.residual = std::move(p_cur);
  return result;
}

VerificationOutcome verify_tree(std::span<const TokenId> context,
                                const DraftTree& draft,
                                const TargetModel& target, Rng& rng) {
  if (!std::equal(context.begin(), context.end(), draft.context.begin(),
                  draft.context.end()))
    throw std::invalid_argument("draft was built from a different context");

  VerificationOutcome outcome;
  outcome.positions_evaluated = draft.filled_count + 1;

  std::vector<TokenId> current_ctx(context.begin(), context.end());
  int node_id = 0;
  while (true) {
    DenseDistribution p = target.next_distribution(current_ctx);
    outcome.path_target_dists.push_back(p);

    std::vector<int> filled_children;
    for (int c : draft.topology->nodes[node_id].children)
      if (draft.nodes[c].filled) filled_children.push_back(c);

    if (filled_children.empty()) {
      outcome.bonus = sample_from(p, rng);
      break;
    }

    std::vector<TokenId> tokens;
    std::vector<std::vector<WeightedToken>> qs;
    for (std::size_t i = 0; i < filled_children.size(); ++i) {
      tokens.push_back(draft.nodes[filled_children[i]].token);
      qs.push_back(q_distribution_at(draft, node_id, static_cast<int>(i)));
    }
    auto pos = verify_position(p, tokens, qs, rng);
    for (std::size_t i = 0; i < filled_children.size(); ++i) {
      bool acc = pos.accepted && static_cast<int>(i) == pos.sibling_index;
      if (acc || pos.rejected[i])
        outcome.trace.push_back({filled_children[i], tokens[i], acc});
    }

    if (!pos.accepted) {
      outcome.bonus = sample_from(pos.residual, rng);
      break;
    }
    node_id = filled_children[pos.sibling_index];
    outcome.accepted_node_ids.push_back(node_id);
    outcome.accepted_tokens.push_back(tokens[pos.sibling_index]);
    current_ctx.push_back(tokens[pos.sibling_index]);
  }

  outcome.accepted_length =
      static_cast<int>(outcome.accepted_tokens.size()) + 1;
  return outcome;
}

CostSummary count_target_calls(
    const std::vector<std::pair<int, int>>& per_round) {
  CostSummary s;
  for (const auto& [accepted_len, positions] : per_round) {
    s.tokens += accepted_len;
    s.positions += positions;
    s.rounds += 1;
  }
  return s;
}

}  // namespace stand
