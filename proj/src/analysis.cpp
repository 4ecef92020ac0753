#include "stand/analysis.hpp"

#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "stand/gumbel.hpp"

namespace stand {

namespace {

std::unordered_map<std::string, std::size_t> gram_counts(
    const std::vector<std::vector<TokenId>>& trajectories, int n) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& traj : trajectories) {
    if (traj.size() < static_cast<std::size_t>(n)) continue;
    for (std::size_t i = 0; i + n <= traj.size(); ++i) {
      counts[context_key(std::span<const TokenId>(traj.data() + i, n))] += 1;
    }
  }
  return counts;
}

}  // namespace

double overlap(const std::vector<std::vector<TokenId>>& trajectories, int n) {
  if (n < 2) throw std::invalid_argument("gram length must be >= 2");
  auto counts = gram_counts(trajectories, n);
  std::size_t total = 0, repeated = 0;
  for (const auto& [gram, c] : counts) {
    total += c;
    if (c >= 2) repeated += c;
  }
  if (total == 0)
    throw std::invalid_argument("no n-grams of the requested length exist");
  return 100.0 * static_cast<double>(repeated) / total;
}

double overlap_distinct(const std::vector<std::vector<TokenId>>& trajectories,
                        int n) {
  if (n < 2) throw std::invalid_argument("gram length must be >= 2");
  auto counts = gram_counts(trajectories, n);
  std::size_t types = 0, repeated = 0;
  for (const auto& [gram, c] : counts) {
    ++types;
    if (c >= 2) ++repeated;
  }
  if (types == 0)
    throw std::invalid_argument("no n-grams of the requested length exist");
  return 100.0 * static_cast<double>(repeated) / types;
}

OverlapReport overlap_report(
    const std::vector<std::vector<TokenId>>& trajectories) {
  OverlapReport report;
  for (int k = 1; k <= static_cast<int>(trajectories.size()); ++k) {
    std::vector<std::vector<TokenId>> pool(trajectories.begin(),
                                           trajectories.begin() + k);
    for (int n = 2; n <= 5; ++n) {
      auto counts = gram_counts(pool, n);
      std::size_t total = 0;
      for (const auto& [gram, c] : counts) total += c;
      if (total == 0) continue;
      OverlapEntry e;
      e.k = k;
      e.n = n;
      e.overlap_pct = overlap(pool, n);
      e.distinct_pct = overlap_distinct(pool, n);
      e.occurrences = total;
      report.entries.push_back(e);
    }
  }
  return report;
}

std::vector<std::vector<TokenId>> load_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  std::vector<std::vector<TokenId>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    out.push_back(j.at("tokens").get<std::vector<TokenId>>());
  }
  return out;
}

void save_trajectories(const std::vector<std::vector<TokenId>>& trajectories,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory file: " + path);
  for (const auto& traj : trajectories) {
    nlohmann::json j;
    j["tokens"] = traj;
    out << j.dump() << '\n';
  }
}

double expected_acceptance(
    const DenseDistribution& p, const std::vector<TokenId>& sibling_tokens,
    const std::vector<std::vector<WeightedToken>>& qs) {
  DenseDistribution p_cur = p;
  double reject_all = 1.0;
  bool exhausted = false;
  for (std::size_t i = 0; i < sibling_tokens.size(); ++i) {
    if (exhausted) break;
    double q_x = 0.0;
    for (const auto& w : qs[i])
      if (w.token == sibling_tokens[i]) q_x = w.prob;
    if (q_x <= 0.0) throw std::logic_error("zero draft probability");
    double a = std::min(1.0, p_cur[sibling_tokens[i]] / q_x);
    reject_all *= (1.0 - a);
    if (reject_all <= 0.0) return 1.0;
    for (const auto& w : qs[i]) {
      std::size_t t = static_cast<std::size_t>(w.token);
      p_cur[t] = std::max(0.0, p_cur[t] - w.prob);
    }
    double mass = 0.0;
    for (double v : p_cur) mass += v;
    if (mass <= 1e-12)
      exhausted = true;  // later siblings auto-reject
    else
      for (double& v : p_cur) v /= mass;
  }
  return 1.0 - reject_all;
}

ProbeResult acceptance_probe(const TargetModel& target,
                             const NGramStore& store, DraftMode mode,
                             int rounds, std::uint64_t seed) {
  Rng rng(seed);
  GumbelNoiseCache noise(seed ^ 0xa24baed4963ee407ull, 4096);
  constexpr int kWidth = 3;

  ProbeResult result;
  double sum = 0.0;
  std::vector<TokenId> ctx{0};
  int attempts = 0;
  while (result.contexts < rounds && attempts < rounds * 50) {
    ++attempts;
    // Advance a reference decode so probed contexts look like real ones.
    ctx.push_back(sample_next(target, ctx, rng));
    if (ctx.size() > 64) ctx.erase(ctx.begin(), ctx.begin() + 32);

    auto hit = store.lookup(ctx);
    if (!hit.hit()) continue;

    std::vector<WeightedToken> cands;
    double total = 0.0;
    for (const auto& e : hit.dist->entries)
      if (e.prob > 0.0) total += e.prob;
    if (total <= 0.0) continue;
    for (const auto& e : hit.dist->entries)
      if (e.prob > 0.0) cands.push_back({e.token, e.prob / total});

    std::vector<TokenId> tokens;
    std::vector<std::vector<WeightedToken>> qs;
    if (mode == DraftMode::stochastic) {
      auto drawn = sample_without_replacement(cands, kWidth, noise);
      std::vector<WeightedToken> remaining = cands;
      for (const auto& d : drawn) {
        tokens.push_back(d.token);
        qs.push_back(remaining);
        double rem_total = 0.0;
        std::erase_if(remaining, [&](const WeightedToken& w) {
          return w.token == d.token;
        });
        for (const auto& w : remaining) rem_total += w.prob;
        if (rem_total > 0.0)
          for (auto& w : remaining) w.prob /= rem_total;
      }
    } else {
      std::size_t take = std::min<std::size_t>(kWidth, cands.size());
      for (std::size_t i = 0; i < take; ++i) {
        tokens.push_back(cands[i].token);
        qs.push_back({{cands[i].token, 1.0}});
      }
    }

    DenseDistribution p = target.next_distribution(ctx);
    sum += expected_acceptance(p, tokens, qs);
    result.contexts += 1;
  }
  result.mean_acceptance = result.contexts ? sum / result.contexts : 0.0;
  return result;
}

}  // namespace stand
