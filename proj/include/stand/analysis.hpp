#pragma once

#include <string>
#include <vector>

#include "stand/drafter.hpp"
#include "stand/ngram_store.hpp"
#include "stand/target_model.hpp"

namespace stand {

struct OverlapEntry {
  int k = 0;                 // number of pooled trajectories
  int n = 0;                 // gram length
  double overlap_pct = 0.0;  // occurrence-multiset definition
  double distinct_pct = 0.0; // alternative distinct-type definition
  std::size_t occurrences = 0;
};

struct OverlapReport {
  std::vector<OverlapEntry> entries;
};

// Percentage of pooled n-gram occurrences whose n-gram appears at least
// twice across the trajectories, counting duplicates multiple times.
// Throws std::invalid_argument when no n-gram exists.
double overlap(const std::vector<std::vector<TokenId>>& trajectories, int n);

// Alternative reading: percentage of distinct n-gram types seen >= 2 times.
double overlap_distinct(const std::vector<std::vector<TokenId>>& trajectories,
                        int n);

// Full report over n in {2..5} and k in {1..len}, pooling the first k
// trajectories. Entries with no n-grams are omitted.
OverlapReport overlap_report(
    const std::vector<std::vector<TokenId>>& trajectories);

std::vector<std::vector<TokenId>> load_trajectories(const std::string& path);
void save_trajectories(const std::vector<std::vector<TokenId>>& trajectories,
                       const std::string& path);

struct ProbeResult {
  double mean_acceptance = 0.0;  // mean P(some sibling accepted)
  int contexts = 0;
};

// Fig-3-style probe: expected acceptance probability of a depth-1, width-3
// draft, computed analytically from p and the sequential-rejection masses
// (no acceptance coin flips). Drafting itself is stochastic or deterministic
// per `mode`; contexts are decoded from the target so the store sees
// realistic queries. Contexts without a store hit are skipped.
ProbeResult acceptance_probe(const TargetModel& target,
                             const NGramStore& store, DraftMode mode,
                             int rounds, std::uint64_t seed);

// Expected acceptance probability for one context (exposed for oracle
// tests): siblings with their conditional draft distributions against p.
double expected_acceptance(const DenseDistribution& p,
                           const std::vector<TokenId>& sibling_tokens,
                           const std::vector<std::vector<WeightedToken>>& qs);

}  // namespace stand
