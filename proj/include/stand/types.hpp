#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stand {

using TokenId = std::int32_t;

// Next-token probability vector over the full vocabulary.
using DenseDistribution = std::vector<double>;

// All stochastic operations draw from an explicit, seedable stream.
using Rng = std::mt19937_64;

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kDistributionTolerance = 1e-9;

inline bool is_valid_distribution(const DenseDistribution& d) {
  double sum = 0.0;
  for (double p : d) {
    if (!(p >= 0.0)) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= kDistributionTolerance;
}

inline void renormalize(DenseDistribution& d) {
  double sum = 0.0;
  for (double p : d) sum += p;
  if (sum <= 0.0) throw std::domain_error("renormalize: zero total mass");
  for (double& p : d) p /= sum;
}

inline std::size_t argmax_index(const DenseDistribution& d) {
  return static_cast<std::size_t>(
      std::max_element(d.begin(), d.end()) - d.begin());
}

inline double tv_distance(const DenseDistribution& a,
                          const DenseDistribution& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return 0.5 * acc;
}

// Inverse-CDF draw. The distribution must carry positive mass.
inline TokenId sample_from(const DenseDistribution& d, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  double acc = 0.0;
  TokenId last_positive = -1;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] <= 0.0) continue;
    last_positive = static_cast<TokenId>(i);
    acc += d[i];
    if (u < acc) return last_positive;
  }
  if (last_positive < 0) throw std::domain_error("sample_from: zero mass");
  return last_positive;
}

// Power-scales probabilities by 1/temperature in log space and renormalizes.
// Computed relative to the row maximum so the T -> 0 limit degrades
// gracefully to a one-hot at the argmax instead of overflowing.
inline DenseDistribution apply_temperature(const DenseDistribution& row,
                                           double temperature) {
  if (!(temperature > 0.0))
    throw std::invalid_argument("temperature must be positive");
  double max_p = 0.0;
  for (double p : row) max_p = std::max(max_p, p);
  if (max_p <= 0.0) throw std::domain_error("apply_temperature: zero mass");
  DenseDistribution out(row.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i] <= 0.0) continue;
    out[i] = std::exp((std::log(row[i]) - std::log(max_p)) / temperature);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

inline std::string context_key(std::span<const TokenId> tokens) {
  std::string key;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) key.push_back(',');
    key += std::to_string(tokens[i]);
  }
  return key;
}

}  // namespace stand
