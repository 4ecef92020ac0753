#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stand/types.hpp"

namespace stand {

inline constexpr int kMaxGram = 4;
inline constexpr std::size_t kStoreTopK = 10;

// Top-K (token, probability) pairs plus the number of merged observations.
// Entries are sorted by descending probability, ties by ascending token id.
// Stored mass is <= 1 and is NOT renormalized after truncation; the drafter
// renormalizes at sampling time.
struct CompressedDistribution {
  struct Entry {
    TokenId token;
    double prob;
  };
  std::vector<Entry> entries;
  std::uint64_t count = 0;

  double mass() const {
    double m = 0.0;
    for (const auto& e : entries) m += e.prob;
    return m;
  }
};

struct StoreStats {
  std::array<std::size_t, kMaxGram> entries_per_level{};
  std::size_t total_entries = 0;
  std::size_t memory_estimate_bytes = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
};

struct LookupResult {
  const CompressedDistribution* dist = nullptr;
  int level = 0;  // gram length of the match, 0 on miss
  bool hit() const { return dist != nullptr; }
};

// Four lookup tables keyed by the last 1..4 tokens, each mapping to a
// compressed next-token distribution. Merging is a k/(k+1) weighted average
// followed by top-10 truncation. Single-writer, multiple-reader.
class NGramStore {
 public:
  explicit NGramStore(int vocab_size, std::size_t lru_cap_per_table = 0)
      : vocab_size_(vocab_size), lru_cap_(lru_cap_per_table) {}

  int vocab_size() const { return vocab_size_; }

  // Updates every table whose gram length fits the context, keyed by the
  // last-n-token suffix.
  void update(std::span<const TokenId> context,
              const DenseDistribution& observed);

  // Longest-suffix match, 4-grams down to unigrams. Miss is a normal
  // outcome. Counts hits/misses for snapshot_stats.
  LookupResult lookup(std::span<const TokenId> context) const;

  StoreStats snapshot_stats() const;
  void clear();

  void save(const std::string& path) const;
  static NGramStore load(const std::string& path);

 private:
  using Table = std::unordered_map<std::string, CompressedDistribution>;

  void merge_into(CompressedDistribution& cur,
                  const DenseDistribution& observed);
  void touch_lru(int level, const std::string& key);

  int vocab_size_;
  std::size_t lru_cap_;
  std::array<Table, kMaxGram> tables_;
  // Insertion/touch order per table, oldest first; only kept when capped.
  std::array<std::vector<std::string>, kMaxGram> lru_order_;
  mutable std::uint64_t hits_ = 0;
  mutable std::uint64_t misses_ = 0;

  friend class StoreSerializer;
};

}  // namespace stand
