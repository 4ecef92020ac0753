#include <doctest.h>

#include <map>
#include <set>

#include "stand/drafter.hpp"
#include "support/fixtures.hpp"
#include "support/stats.hpp"

using namespace stand;

namespace {

DenseDistribution one_hot(int vocab, TokenId t) {
  DenseDistribution d(vocab, 0.0);
  d[t] = 1.0;
  return d;
}

}  // namespace

TEST_CASE("chain drafts fill along 4-gram hits") {
  NGramStore store(16);
  // Context ...3,4,5,6 continues 7,8,9 via 4-gram keys.
  std::vector<TokenId> stream{3, 4, 5, 6, 7, 8, 9};
  for (std::size_t i = 4; i <= 6; ++i) {
    std::span<const TokenId> ctx(stream.data(), i);
    store.update(ctx, one_hot(16, stream[i]));
  }
  auto chain = build_uniform_tree({1, 1, 1});
  ZeroNoise zero;
  std::vector<TokenId> context{3, 4, 5, 6};
  auto draft =
      build_draft(context, chain, store, zero, DraftMode::stochastic);
  CHECK(draft.filled_count == 3);
  CHECK(draft.nodes[1].token == 7);
  CHECK(draft.nodes[2].token == 8);
  CHECK(draft.nodes[3].token == 9);
  for (int id : {1, 2, 3}) CHECK(draft.nodes[id].source_level == 4);
}

TEST_CASE("empty store yields an empty draft") {
  NGramStore store(16);
  auto tree = build_uniform_tree({2, 2});
  ZeroNoise zero;
  std::vector<TokenId> context{1, 2};
  auto draft = build_draft(context, tree, store, zero, DraftMode::stochastic);
  CHECK(draft.empty());
  CHECK(draft.filled_ids().empty());
}

TEST_CASE("sibling groups never contain duplicate tokens") {
  NGramStore store(32);
  Rng rng(5);
  GumbelNoiseCache noise(6, 4096);
  std::uniform_int_distribution<TokenId> tok(0, 31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<TokenId> stream{1, 2, 3, 4};
  for (int i = 0; i < 500; ++i) {
    DenseDistribution d(32, 0.0);
    double total = 0.0;
    for (int j = 0; j < 6; ++j) {
      double w = unit(rng);
      d[tok(rng)] += w;
      total += w;
    }
    for (auto& p : d) p /= total;
    store.update(stream, d);
    stream.push_back(tok(rng));
  }
  auto tree = build_uniform_tree({4, 3, 2});
  std::vector<TokenId> context{stream.end() - 4, stream.end()};
  for (int trial = 0; trial < 200; ++trial) {
    auto draft =
        build_draft(context, tree, store, noise, DraftMode::stochastic);
    for (const auto& node : tree.nodes) {
      std::set<TokenId> seen;
      for (int c : node.children) {
        if (!draft.nodes[c].filled) continue;
        CHECK(seen.insert(draft.nodes[c].token).second);
        CHECK(draft.nodes[c].q_value > 0.0);
        CHECK(draft.nodes[c].q_value <= 1.0);
      }
    }
    // Ancestor closure of the filled set.
    for (int id : draft.filled_ids()) {
      int parent = tree.nodes[id].parent;
      if (parent != 0) CHECK(draft.nodes[parent].filled);
    }
  }
}

TEST_CASE("3-of-10 slot fill matches the without-replacement oracle") {
  // One key with a fixed 10-candidate distribution.
  NGramStore store(16);
  std::vector<double> weights{0.22, 0.18, 0.14, 0.11, 0.09,
                              0.08, 0.07, 0.05, 0.04, 0.02};
  DenseDistribution d(16, 0.0);
  for (int t = 0; t < 10; ++t) d[t] = weights[t];
  std::vector<TokenId> context{12};
  store.update(context, d);

  auto tree = build_uniform_tree({3});
  GumbelNoiseCache noise(404, 65536);
  std::map<std::set<TokenId>, int> counts;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    auto draft =
        build_draft(context, tree, store, noise, DraftMode::stochastic);
    std::set<TokenId> chosen;
    for (int c : tree.nodes[0].children) chosen.insert(draft.nodes[c].token);
    REQUIRE(chosen.size() == 3);
    counts[chosen] += 1;
  }
  // Expected unordered-set probabilities: sum Plackett-Luce over orderings.
  std::map<std::set<TokenId>, double> expected;
  for (const auto& ordered : testfix::ordered_selections(10, 3)) {
    std::set<TokenId> s(ordered.begin(), ordered.end());
    expected[s] += testfix::plackett_luce_prob(weights, ordered);
  }
  std::vector<double> obs, exp;
  for (const auto& [s, p] : expected) {
    obs.push_back(counts[s]);
    exp.push_back(n * p);
  }
  auto result = teststats::chi_square_test(obs, exp);
  CHECK(result.p_value > 0.001);
}

TEST_CASE("q distributions condition on elder siblings") {
  NGramStore store(8);
  DenseDistribution d(8, 0.0);
  d[0] = 0.5;
  d[1] = 0.3;
  d[2] = 0.2;
  std::vector<TokenId> context{4};
  store.update(context, d);
  auto tree = build_uniform_tree({3});
  ZeroNoise zero;
  auto draft = build_draft(context, tree, store, zero, DraftMode::stochastic);
  REQUIRE(draft.filled_count == 3);
  // Zero noise drafts 0, 1, 2 in probability order.
  auto q0 = q_distribution_at(draft, 0, 0);
  REQUIRE(q0.size() == 3);
  CHECK(q0[0].prob == doctest::Approx(0.5));
  auto q1 = q_distribution_at(draft, 0, 1);
  REQUIRE(q1.size() == 2);
  CHECK(q1[0].token == 1);
  CHECK(q1[0].prob == doctest::Approx(0.6));
  CHECK(q1[1].prob == doctest::Approx(0.4));

  auto det = build_draft(context, tree, store, zero, DraftMode::deterministic);
  auto dq = q_distribution_at(det, 0, 1);
  REQUIRE(dq.size() == 1);
  CHECK(dq[0].token == det.nodes[tree.nodes[0].children[1]].token);
  CHECK(dq[0].prob == doctest::Approx(1.0));
}

TEST_CASE("deterministic mode is a pure function and consumes no noise") {
  NGramStore store(8);
  DenseDistribution d(8, 0.0);
  d[3] = 0.6;
  d[5] = 0.4;
  std::vector<TokenId> context{2};
  store.update(context, d);
  auto tree = build_uniform_tree({2, 1});
  GumbelNoiseCache noise(1, 128);
  auto a = build_draft(context, tree, store, noise, DraftMode::deterministic);
  auto b = build_draft(context, tree, store, noise, DraftMode::deterministic);
  CHECK(noise.consumed() == 0);
  REQUIRE(a.filled_count == b.filled_count);
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    CHECK(a.nodes[i].filled == b.nodes[i].filled);
    if (a.nodes[i].filled) CHECK(a.nodes[i].token == b.nodes[i].token);
  }
  CHECK(a.nodes[tree.nodes[0].children[0]].token == 3);
  CHECK(a.nodes[tree.nodes[0].children[1]].token == 5);
}

TEST_CASE("zero-probability candidates never fill slots") {
  NGramStore store(8);
  DenseDistribution d(8, 0.0);
  d[1] = 1.0;
  std::vector<TokenId> context{0};
  store.update(context, d);
  auto tree = build_uniform_tree({3});
  ZeroNoise zero;
  auto draft = build_draft(context, tree, store, zero, DraftMode::stochastic);
  CHECK(draft.filled_count == 1);  // only one positive candidate
}

TEST_CASE("updates to unrelated keys leave an existing draft unchanged") {
  NGramStore store(16);
  DenseDistribution d(16, 0.0);
  d[2] = 0.7;
  d[9] = 0.3;
  std::vector<TokenId> context{5};
  store.update(context, d);
  auto tree = build_uniform_tree({2});
  ZeroNoise zero;
  auto before =
      build_draft(context, tree, store, zero, DraftMode::deterministic);
  std::vector<TokenId> other{11, 12};
  store.update(other, d);
  auto after =
      build_draft(context, tree, store, zero, DraftMode::deterministic);
  for (std::size_t i = 0; i < before.nodes.size(); ++i) {
    CHECK(before.nodes[i].filled == after.nodes[i].filled);
    if (before.nodes[i].filled)
      CHECK(before.nodes[i].token == after.nodes[i].token);
  }
  // Enlarging the store never converts the root hit into a miss.
  std::vector<TokenId> longer{1, 2, 3, 5};
  store.update(longer, d);
  auto grown =
      build_draft(longer, tree, store, zero, DraftMode::deterministic);
  CHECK(grown.filled_count >= 1);
}
