#include "stand/drafter.hpp"

#include <algorithm>
#include <queue>

namespace stand {

std::vector<int> DraftTree::filled_ids() const {
  std::vector<int> out;
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (nodes[i].filled) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<TokenId> DraftTree::path_tokens(int node_id) const {
  std::vector<TokenId> path;
  for (int id = node_id; id != 0; id = topology->nodes[id].parent)
    path.push_back(nodes[id].token);
  std::reverse(path.begin(), path.end());
  return path;
}

namespace {

std::vector<WeightedToken> positive_candidates(
    const CompressedDistribution& dist) {
  std::vector<WeightedToken> out;
  double total = 0.0;
  for (const auto& e : dist.entries)
    if (e.prob > 0.0) total += e.prob;
  if (total <= 0.0) return out;
  for (const auto& e : dist.entries)
    if (e.prob > 0.0) out.push_back({e.token, e.prob / total});
  return out;
}

}  // namespace

DraftTree build_draft(std::span<const TokenId> context,
                      const TreeTopology& topology, const NGramStore& store,
                      NoiseSource& noise, DraftMode mode) {
  if (context.empty())
    throw std::invalid_argument("build_draft requires a non-empty context");

  DraftTree draft;
  draft.topology = &topology;
  draft.nodes.resize(topology.nodes.size());
  draft.candidates.resize(topology.nodes.size());
  draft.context.assign(context.begin(), context.end());
  draft.mode = mode;

  std::queue<int> queue;
  queue.push(0);
  while (!queue.empty()) {
    int id = queue.front();
    queue.pop();
    const auto& node = topology.nodes[id];
    if (node.children.empty()) continue;

    std::vector<TokenId> lookup_ctx = draft.context;
    auto path = draft.path_tokens(id);
    lookup_ctx.insert(lookup_ctx.end(), path.begin(), path.end());
    auto hit = store.lookup(lookup_ctx);
    if (!hit.hit()) continue;

    auto cands = positive_candidates(*hit.dist);
    if (cands.empty()) continue;
    draft.candidates[id] = cands;

    std::size_t slots = node.children.size();
    if (mode == DraftMode::stochastic) {
      auto drawn = sample_without_replacement(cands, slots, noise);
      for (std::size_t i = 0; i < drawn.size(); ++i) {
        int child = node.children[i];
        draft.nodes[child] = {true, drawn[i].token, drawn[i].conditional_prob,
                              hit.level};
        draft.filled_count += 1;
        queue.push(child);
      }
    } else {
      // Candidates are sorted by descending probability (ascending id on
      // ties); one-hot draft distributions, so q = 1 per sibling.
      std::size_t take = std::min(slots, cands.size());
      for (std::size_t i = 0; i < take; ++i) {
        int child = node.children[i];
        draft.nodes[child] = {true, cands[i].token, 1.0, hit.level};
        draft.filled_count += 1;
        queue.push(child);
      }
    }
  }
  return draft;
}

std::vector<WeightedToken> q_distribution_at(const DraftTree& draft,
                                             int parent_id,
                                             int sibling_index) {
  const auto& children = draft.topology->nodes[parent_id].children;
  if (sibling_index < 0 ||
      sibling_index >= static_cast<int>(children.size()) ||
      !draft.nodes[children[sibling_index]].filled)
    throw std::invalid_argument("sibling is not filled");

  if (draft.mode == DraftMode::deterministic) {
    return {{draft.nodes[children[sibling_index]].token, 1.0}};
  }

  std::vector<WeightedToken> q = draft.candidates[parent_id];
  for (int i = 0; i < sibling_index; ++i) {
    TokenId elder = draft.nodes[children[i]].token;
    q.erase(std::remove_if(q.begin(), q.end(),
                           [&](const WeightedToken& w) {
                             return w.token == elder;
                           }),
            q.end());
  }
  double total = 0.0;
  for (const auto& w : q) total += w.prob;
  if (total <= 0.0)
    throw std::logic_error("conditional draft distribution has zero mass");
  for (auto& w : q) w.prob /= total;
  return q;
}

}  // namespace stand
