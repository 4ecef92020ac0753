#pragma once

#include <vector>

#include "stand/draft_tree.hpp"
#include "stand/gumbel.hpp"
#include "stand/ngram_store.hpp"
#include "stand/types.hpp"

namespace stand {

enum class DraftMode { stochastic, deterministic };

// A per-step instantiation of a topology. Filled nodes form an
// ancestor-closed subtree; unfilled subtrees mark store misses or exhausted
// candidate sets.
struct DraftTree {
  struct Node {
    bool filled = false;
    TokenId token = -1;
    double q_value = 0.0;   // draft prob within its sibling group
    int source_level = 0;   // gram length of the parent lookup (1..4)
  };

  const TreeTopology* topology = nullptr;
  std::vector<Node> nodes;  // indexed by topology node id
  // Per node: the renormalized candidate set its children were drawn from.
  std::vector<std::vector<WeightedToken>> candidates;
  std::vector<TokenId> context;  // committed context the draft was built on
  DraftMode mode = DraftMode::stochastic;
  int filled_count = 0;

  bool empty() const { return filled_count == 0; }
  std::vector<int> filled_ids() const;
  // Tokens along the path root -> node (exclusive of root).
  std::vector<TokenId> path_tokens(int node_id) const;
};

// Breadth-first fill: per node with filled ancestors, look up the n-gram
// store under committed context + path tokens and populate its child slots
// by Gumbel-Top-K sampling without replacement (stochastic) or by stored
// probability order (deterministic). Zero-probability candidates are never
// drafted; a root-level miss yields an empty draft.
DraftTree build_draft(std::span<const TokenId> context,
                      const TreeTopology& topology, const NGramStore& store,
                      NoiseSource& noise, DraftMode mode);

// The draft distribution under which sibling `sibling_index` of `parent_id`
// was drawn: candidates minus elder siblings, renormalized. Deterministic
// mode returns a one-hot at the drafted token.
std::vector<WeightedToken> q_distribution_at(const DraftTree& draft,
                                             int parent_id,
                                             int sibling_index);

}  // namespace stand
