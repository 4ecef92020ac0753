#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stand/types.hpp"

namespace stand {

struct ModelConfig {
  int vocab_size = 0;
  double temperature = 0.6;
  std::uint64_t seed = 0;
};

// Abstract next-token distribution provider. Implementations are immutable
// after construction and safe for concurrent reads. Returned distributions
// are post-temperature: the store and the sampler always see the same
// probabilities.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual int vocab_size() const = 0;

  // Temperature-adjusted next-token probabilities; deterministic for a
  // fixed model and context. Throws std::invalid_argument on out-of-vocab
  // context tokens.
  virtual DenseDistribution next_distribution(
      std::span<const TokenId> context) const = 0;
};

TokenId sample_next(const TargetModel& model, std::span<const TokenId> context,
                    Rng& rng);

// One injected phrase: whenever the context sits inside the phrase, the
// next-phrase token receives `prob` mass on top of the base row.
struct PatternSpec {
  std::vector<TokenId> tokens;
  double prob = 0.0;
};

struct MarkovModelSpec {
  int vocab_size = 0;
  int order = 1;
  double temperature = 0.6;
  // Key = comma-joined context tokens, exactly `order` of them.
  std::unordered_map<std::string, DenseDistribution> rows;
  std::vector<PatternSpec> patterns;
};

// Synthetic Markov language model with optional pattern injection. Pattern
// blending happens after temperature scaling so injection probabilities are
// exact; contexts without a table row fall back to uniform.
class MarkovModel : public TargetModel {
 public:
  explicit MarkovModel(MarkovModelSpec spec);

  int vocab_size() const override { return spec_.vocab_size; }
  double temperature() const { return spec_.temperature; }
  const MarkovModelSpec& spec() const { return spec_; }

  DenseDistribution next_distribution(
      std::span<const TokenId> context) const override;

 private:
  MarkovModelSpec spec_;
  std::unordered_map<std::string, DenseDistribution> scaled_rows_;
};

// Empirical n-gram model over recorded trajectories: longest-suffix match up
// to `max_order`, counts normalized then temperature-scaled; uniform when no
// suffix of the context ever occurred.
class CorpusReplayModel : public TargetModel {
 public:
  CorpusReplayModel(std::vector<std::vector<TokenId>> trajectories,
                    int vocab_size, double temperature = 0.6,
                    int max_order = 4);

  int vocab_size() const override { return vocab_size_; }

  DenseDistribution next_distribution(
      std::span<const TokenId> context) const override;

 private:
  int vocab_size_;
  double temperature_;
  int max_order_;
  // One table per context length, context key -> next-token counts.
  std::vector<std::unordered_map<std::string, std::vector<double>>> tables_;
};

MarkovModelSpec load_markov_spec(const std::string& path);
void save_markov_spec(const MarkovModelSpec& spec, const std::string& path);
MarkovModelSpec parse_markov_spec_json(const std::string& text);

// Random order-1 model with concentrated rows plus injected phrases; the
// desk-scale stand-in for a redundant reasoning corpus.
MarkovModelSpec make_redundant_spec(int vocab_size, std::uint64_t seed,
                                    int n_patterns = 4, int pattern_len = 10,
                                    double pattern_prob = 0.85,
                                    double temperature = 0.6);

// Pattern-free random order-1 model (cold-start / no-redundancy control).
MarkovModelSpec make_random_spec(int vocab_size, std::uint64_t seed,
                                 double temperature = 0.6);

}  // namespace stand
