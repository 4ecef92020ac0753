#pragma once

#include <cstdint>
#include <vector>

#include "stand/types.hpp"

namespace stand {

// Injectable noise stream so determinism tests and distributional tests share
// one sampling code path.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual double next() = 0;
};

// Pre-drawn standard Gumbel variates (-log(-log U)), consumed in draw order
// and refilled from the cache's own rng stream when depleted.
class GumbelNoiseCache : public NoiseSource {
 public:
  static constexpr std::size_t kDefaultRefill = 65536;

  explicit GumbelNoiseCache(std::uint64_t seed,
                            std::size_t refill_size = kDefaultRefill);

  double next() override;
  void refill();

  std::size_t available() const { return buffer_.size() - pos_; }
  std::uint64_t refill_count() const { return refills_; }
  std::uint64_t consumed() const { return consumed_; }

 private:
  std::size_t refill_size_;
  Rng rng_;
  std::vector<double> buffer_;
  std::size_t pos_ = 0;
  std::uint64_t refills_ = 0;
  std::uint64_t consumed_ = 0;
};

// Degenerate noise-free source: perturbed scores reduce to log-probabilities,
// so top-k becomes an argmax chain.
class ZeroNoise : public NoiseSource {
 public:
  double next() override { return 0.0; }
};

struct WeightedToken {
  TokenId token;
  double prob;
};

struct SampledToken {
  TokenId token;
  // Probability of the token under the renormalized candidate set,
  // conditioned on earlier draws being removed (Plackett-Luce factor).
  double conditional_prob;
};

// Gumbel-Top-K draw of min(k, positive candidates) distinct tokens, ordered
// by descending perturbed score. Consumes exactly one noise variate per
// positive-probability candidate, in candidate order. Empty result when all
// probabilities are zero.
std::vector<SampledToken> sample_without_replacement(
    const std::vector<WeightedToken>& candidates, std::size_t k,
    NoiseSource& noise);

}  // namespace stand
