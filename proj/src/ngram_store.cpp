#include "stand/ngram_store.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

namespace stand {

void NGramStore::merge_into(CompressedDistribution& cur,
                            const DenseDistribution& observed) {
  double w_old = static_cast<double>(cur.count) / (cur.count + 1);
  double w_new = 1.0 / (cur.count + 1);

  // Union of supports; non-stored indices of the old entry count as zero.
  std::map<TokenId, double> merged;
  for (const auto& e : cur.entries) merged[e.token] = w_old * e.prob;
  for (std::size_t t = 0; t < observed.size(); ++t) {
    if (observed[t] <= 0.0) continue;
    merged[static_cast<TokenId>(t)] += w_new * observed[t];
  }

  cur.entries.clear();
  cur.entries.reserve(merged.size());
  for (const auto& [token, prob] : merged) cur.entries.push_back({token, prob});
  // Descending probability, ties by ascending token id (map order is
  // ascending by id, stable_sort preserves it).
  std::stable_sort(cur.entries.begin(), cur.entries.end(),
                   [](const auto& a, const auto& b) { return a.prob > b.prob; });
  if (cur.entries.size() > kStoreTopK) cur.entries.resize(kStoreTopK);
  cur.count += 1;
}

void NGramStore::update(std::span<const TokenId> context,
                        const DenseDistribution& observed) {
  if (context.empty())
    throw std::invalid_argument("update requires a non-empty context");
  for (int n = 1; n <= kMaxGram; ++n) {
    if (context.size() < static_cast<std::size_t>(n)) break;
    auto key = context_key(context.subspan(context.size() - n));
    auto& table = tables_[n - 1];
    auto it = table.find(key);
    if (it == table.end()) {
      it = table.emplace(key, CompressedDistribution{}).first;
      if (lru_cap_ > 0) touch_lru(n - 1, key);
    }
    merge_into(it->second, observed);
  }
}

void NGramStore::touch_lru(int level, const std::string& key) {
  auto& order = lru_order_[level];
  order.push_back(key);
  if (tables_[level].size() > lru_cap_) {
    // Evict oldest still-present key.
    for (auto it = order.begin(); it != order.end(); ++it) {
      if (tables_[level].erase(*it) > 0) {
        order.erase(order.begin(), it + 1);
        break;
      }
    }
  }
}

LookupResult NGramStore::lookup(std::span<const TokenId> context) const {
  if (context.empty())
    throw std::invalid_argument("lookup requires a non-empty context");
  int max_n = std::min<int>(kMaxGram, static_cast<int>(context.size()));
  for (int n = max_n; n >= 1; --n) {
    auto key = context_key(context.subspan(context.size() - n));
    auto it = tables_[n - 1].find(key);
    if (it != tables_[n - 1].end()) {
      ++hits_;
      return {&it->second, n};
    }
  }
  ++misses_;
  return {};
}

StoreStats NGramStore::snapshot_stats() const {
  StoreStats stats;
  for (int n = 0; n < kMaxGram; ++n) {
    stats.entries_per_level[n] = tables_[n].size();
    stats.total_entries += tables_[n].size();
    for (const auto& [key, dist] : tables_[n]) {
      stats.memory_estimate_bytes +=
          key.size() + sizeof(CompressedDistribution) +
          dist.entries.size() * sizeof(CompressedDistribution::Entry);
    }
  }
  stats.hits = hits_;
  stats.misses = misses_;
  return stats;
}

void NGramStore::clear() {
  for (auto& t : tables_) t.clear();
  for (auto& o : lru_order_) o.clear();
  hits_ = 0;
  misses_ = 0;
}

namespace {

std::vector<TokenId> parse_key(const std::string& key) {
  std::vector<TokenId> out;
  std::size_t pos = 0;
  while (pos < key.size()) {
    std::size_t next = key.find(',', pos);
    if (next == std::string::npos) next = key.size();
    out.push_back(std::stoi(key.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

}  // namespace

void NGramStore::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write store file: " + path);
  nlohmann::json header = {
      {"format", "stand-store"}, {"version", 1}, {"vocab_size", vocab_size_}};
  out << header.dump() << '\n';
  for (int n = 1; n <= kMaxGram; ++n) {
    // Deterministic file order: sorted keys.
    std::vector<const std::string*> keys;
    keys.reserve(tables_[n - 1].size());
    for (const auto& [key, dist] : tables_[n - 1]) keys.push_back(&key);
    std::sort(keys.begin(), keys.end(),
              [](const auto* a, const auto* b) { return *a < *b; });
    for (const auto* key : keys) {
      const auto& dist = tables_[n - 1].at(*key);
      nlohmann::json rec;
      rec["n"] = n;
      rec["key"] = parse_key(*key);
      rec["count"] = dist.count;
      auto& ids = rec["ids"] = nlohmann::json::array();
      auto& probs = rec["probs"] = nlohmann::json::array();
      for (const auto& e : dist.entries) {
        ids.push_back(e.token);
        probs.push_back(e.prob);
      }
      out << rec.dump() << '\n';
    }
  }
}

NGramStore NGramStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open store file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw ProtocolError("store file is empty: " + path);
  nlohmann::json header = nlohmann::json::parse(line);
  if (header.value("format", "") != "stand-store")
    throw ProtocolError("not a stand-store file: " + path);
  if (header.value("version", -1) != 1)
    throw ProtocolError("unsupported stand-store version in " + path);
  NGramStore store(header.at("vocab_size").get<int>());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line);
    int n = rec.at("n").get<int>();
    if (n < 1 || n > kMaxGram)
      throw ProtocolError("store record with invalid gram length");
    auto key_tokens = rec.at("key").get<std::vector<TokenId>>();
    if (static_cast<int>(key_tokens.size()) != n)
      throw ProtocolError("store record key length mismatch");
    CompressedDistribution dist;
    dist.count = rec.at("count").get<std::uint64_t>();
    auto ids = rec.at("ids").get<std::vector<TokenId>>();
    auto probs = rec.at("probs").get<std::vector<double>>();
    if (ids.size() != probs.size() || ids.size() > kStoreTopK)
      throw ProtocolError("store record entry list malformed");
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= store.vocab_size_)
        throw ProtocolError("store record token out of vocab range");
      dist.entries.push_back({ids[i], probs[i]});
    }
    store.tables_[n - 1][context_key(key_tokens)] = std::move(dist);
  }
  return store;
}

}  // namespace stand
