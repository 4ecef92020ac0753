#include "stand/target_model.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace stand {
namespace {

void check_context(std::span<const TokenId> context, int vocab_size) {
  for (TokenId t : context) {
    if (t < 0 || t >= vocab_size)
      throw std::invalid_argument("context token " + std::to_string(t) +
                                  " out of vocab range");
  }
}

}  // namespace

TokenId sample_next(const TargetModel& model, std::span<const TokenId> context,
                    Rng& rng) {
  return sample_from(model.next_distribution(context), rng);
}

MarkovModel::MarkovModel(MarkovModelSpec spec) : spec_(std::move(spec)) {
  if (spec_.vocab_size < 2)
    throw std::invalid_argument("vocab_size must be >= 2");
  if (spec_.order < 1) throw std::invalid_argument("order must be >= 1");
  if (!(spec_.temperature > 0.0))
    throw std::invalid_argument("temperature must be positive");
  for (const auto& [key, row] : spec_.rows) {
    if (static_cast<int>(row.size()) != spec_.vocab_size)
      throw std::invalid_argument("row '" + key + "' has wrong size");
    if (!is_valid_distribution(row))
      throw std::invalid_argument("row '" + key +
                                  "' is not a valid distribution");
    scaled_rows_[key] = apply_temperature(row, spec_.temperature);
  }
  for (const auto& pat : spec_.patterns) {
    if (pat.tokens.size() < 2)
      throw std::invalid_argument("pattern needs at least 2 tokens");
    if (!(pat.prob >= 0.0 && pat.prob <= 1.0))
      throw std::invalid_argument("pattern prob outside [0,1]");
    for (TokenId t : pat.tokens)
      if (t < 0 || t >= spec_.vocab_size)
        throw std::invalid_argument("pattern token out of vocab range");
  }
}

DenseDistribution MarkovModel::next_distribution(
    std::span<const TokenId> context) const {
  if (context.empty())
    throw std::invalid_argument("MarkovModel requires a non-empty context");
  check_context(context, spec_.vocab_size);

  DenseDistribution base;
  std::size_t order = static_cast<std::size_t>(spec_.order);
  if (context.size() >= order) {
    auto key = context_key(context.subspan(context.size() - order));
    auto it = scaled_rows_.find(key);
    if (it != scaled_rows_.end()) base = it->second;
  }
  if (base.empty()) {
    base.assign(spec_.vocab_size, 1.0 / spec_.vocab_size);
  }

  // Pattern injection: longest context suffix that is a proper prefix of an
  // injected phrase pins `prob` mass on the phrase's next token.
  const PatternSpec* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& pat : spec_.patterns) {
    std::size_t max_prefix = std::min(pat.tokens.size() - 1, context.size());
    for (std::size_t len = max_prefix; len > best_len; --len) {
      bool match = true;
      for (std::size_t i = 0; i < len; ++i) {
        if (context[context.size() - len + i] != pat.tokens[i]) {
          match = false;
          break;
        }
      }
      if (match) {
        best = &pat;
        best_len = len;
        break;
      }
    }
  }
  if (best != nullptr) {
    TokenId next = best->tokens[best_len];
    for (double& p : base) p *= (1.0 - best->prob);
    base[next] += best->prob;
  }
  return base;
}

CorpusReplayModel::CorpusReplayModel(
    std::vector<std::vector<TokenId>> trajectories, int vocab_size,
    double temperature, int max_order)
    : vocab_size_(vocab_size), temperature_(temperature),
      max_order_(max_order) {
  if (vocab_size_ < 2) throw std::invalid_argument("vocab_size must be >= 2");
  if (max_order_ < 1) throw std::invalid_argument("max_order must be >= 1");
  tables_.resize(max_order_);
  for (const auto& traj : trajectories) {
    for (TokenId t : traj)
      if (t < 0 || t >= vocab_size_)
        throw std::invalid_argument("corpus token out of vocab range");
    for (int n = 1; n <= max_order_; ++n) {
      for (std::size_t i = n; i < traj.size(); ++i) {
        auto key = context_key(
            std::span<const TokenId>(traj.data() + i - n, n));
        auto& counts = tables_[n - 1][key];
        if (counts.empty()) counts.assign(vocab_size_, 0.0);
        counts[traj[i]] += 1.0;
      }
    }
  }
}

DenseDistribution CorpusReplayModel::next_distribution(
    std::span<const TokenId> context) const {
  if (context.empty())
    throw std::invalid_argument("CorpusReplayModel requires a context");
  check_context(context, vocab_size_);
  int max_n = std::min<int>(max_order_, static_cast<int>(context.size()));
  for (int n = max_n; n >= 1; --n) {
    auto key = context_key(context.subspan(context.size() - n));
    auto it = tables_[n - 1].find(key);
    if (it == tables_[n - 1].end()) continue;
    DenseDistribution d = it->second;
    renormalize(d);
    return apply_temperature(d, temperature_);
  }
  return DenseDistribution(vocab_size_, 1.0 / vocab_size_);
}

MarkovModelSpec parse_markov_spec_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  MarkovModelSpec spec;
  spec.vocab_size = j.at("vocab_size").get<int>();
  spec.order = j.at("order").get<int>();
  spec.temperature = j.value("temperature", 0.6);
  for (const auto& [key, row] : j.at("rows").items())
    spec.rows[key] = row.get<DenseDistribution>();
  if (j.contains("patterns")) {
    for (const auto& p : j["patterns"]) {
      PatternSpec pat;
      pat.tokens = p.at("tokens").get<std::vector<TokenId>>();
      pat.prob = p.at("prob").get<double>();
      spec.patterns.push_back(std::move(pat));
    }
  }
  return spec;
}

MarkovModelSpec load_markov_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model spec: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_markov_spec_json(buf.str());
}

void save_markov_spec(const MarkovModelSpec& spec, const std::string& path) {
  nlohmann::json j;
  j["vocab_size"] = spec.vocab_size;
  j["order"] = spec.order;
  j["temperature"] = spec.temperature;
  j["rows"] = nlohmann::json::object();
  for (const auto& [key, row] : spec.rows) j["rows"][key] = row;
  j["patterns"] = nlohmann::json::array();
  for (const auto& pat : spec.patterns)
    j["patterns"].push_back({{"tokens", pat.tokens}, {"prob", pat.prob}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model spec: " + path);
  out << j.dump(2) << '\n';
}

namespace {

// Dirichlet-style concentrated row: a few strong heads, thin tail.
DenseDistribution random_row(int vocab, Rng& rng, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  DenseDistribution row(vocab);
  double sum = 0.0;
  for (double& p : row) {
    p = std::max(gamma(rng), 1e-12);
    sum += p;
  }
  for (double& p : row) p /= sum;
  return row;
}

}  // namespace

MarkovModelSpec make_random_spec(int vocab_size, std::uint64_t seed,
                                 double temperature) {
  Rng rng(seed);
  MarkovModelSpec spec;
  spec.vocab_size = vocab_size;
  spec.order = 1;
  spec.temperature = temperature;
  for (int t = 0; t < vocab_size; ++t)
    spec.rows[std::to_string(t)] = random_row(vocab_size, rng, 0.3);
  return spec;
}

MarkovModelSpec make_redundant_spec(int vocab_size, std::uint64_t seed,
                                    int n_patterns, int pattern_len,
                                    double pattern_prob, double temperature) {
  MarkovModelSpec spec = make_random_spec(vocab_size, seed, temperature);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_int_distribution<TokenId> tok(0, vocab_size - 1);
  for (int i = 0; i < n_patterns; ++i) {
    PatternSpec pat;
    pat.prob = pattern_prob;
    pat.tokens.reserve(pattern_len);
    for (int j = 0; j < pattern_len; ++j) pat.tokens.push_back(tok(rng));
    spec.patterns.push_back(std::move(pat));
  }
  return spec;
}

}  // namespace stand
