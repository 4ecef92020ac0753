#include "stand/gumbel.hpp"

#include <algorithm>
#include <cmath>

namespace stand {

GumbelNoiseCache::GumbelNoiseCache(std::uint64_t seed, std::size_t refill_size)
    : refill_size_(refill_size == 0 ? 1 : refill_size), rng_(seed) {
  refill();
  refills_ = 0;  // the constructor fill is not a depletion refresh
}

void GumbelNoiseCache::refill() {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  buffer_.resize(refill_size_);
  for (double& g : buffer_) {
    // Clamp away from {0, 1} to keep the noise finite.
    double u = std::clamp(unit(rng_), 1e-12, 1.0 - 1e-12);
    g = -std::log(-std::log(u));
  }
  pos_ = 0;
  ++refills_;
}

double GumbelNoiseCache::next() {
  if (pos_ >= buffer_.size()) refill();
  ++consumed_;
  return buffer_[pos_++];
}

std::vector<SampledToken> sample_without_replacement(
    const std::vector<WeightedToken>& candidates, std::size_t k,
    NoiseSource& noise) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (candidates.empty())
    throw std::invalid_argument("candidate set must be non-empty");

  struct Scored {
    TokenId token;
    double prob;       // renormalized over positive candidates
    double perturbed;  // log prob + Gumbel noise
  };
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  double total = 0.0;
  for (const auto& c : candidates) {
    if (c.prob > 0.0) total += c.prob;
  }
  if (total <= 0.0) return {};  // draft miss

  for (const auto& c : candidates) {
    if (c.prob <= 0.0) continue;
    double p = c.prob / total;
    scored.push_back({c.token, p, std::log(p) + noise.next()});
  }

  std::stable_sort(scored.begin(), scored.end(), [](const auto& a,
                                                    const auto& b) {
    if (a.perturbed != b.perturbed) return a.perturbed > b.perturbed;
    return a.token < b.token;  // zero-noise hook can tie on equal probs
  });

  std::size_t take = std::min(k, scored.size());
  std::vector<SampledToken> out;
  out.reserve(take);
  double remaining = 1.0;
  for (std::size_t i = 0; i < take; ++i) {
    double q = remaining > 1e-12 ? std::min(1.0, scored[i].prob / remaining)
                                 : 1.0;
    out.push_back({scored[i].token, q});
    remaining -= scored[i].prob;
  }
  return out;
}

}  // namespace stand
