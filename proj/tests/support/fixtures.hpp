#pragma once

#include <map>
#include <vector>

#include "stand/target_model.hpp"

namespace testfix {

// Tiny order-1 chain model over vocab 8 with moderate entropy rows.
inline stand::MarkovModelSpec vocab8_spec(double temperature = 1.0) {
  stand::MarkovModelSpec spec;
  spec.vocab_size = 8;
  spec.order = 1;
  spec.temperature = temperature;
  const double rows[8][8] = {
      {0.30, 0.25, 0.15, 0.10, 0.08, 0.06, 0.04, 0.02},
      {0.05, 0.35, 0.20, 0.15, 0.10, 0.08, 0.05, 0.02},
      {0.10, 0.10, 0.30, 0.20, 0.10, 0.10, 0.05, 0.05},
      {0.20, 0.05, 0.05, 0.40, 0.10, 0.10, 0.05, 0.05},
      {0.12, 0.12, 0.12, 0.12, 0.28, 0.08, 0.08, 0.08},
      {0.02, 0.04, 0.06, 0.08, 0.10, 0.40, 0.20, 0.10},
      {0.25, 0.25, 0.10, 0.10, 0.10, 0.05, 0.10, 0.05},
      {0.05, 0.05, 0.05, 0.05, 0.10, 0.10, 0.25, 0.35}};
  for (int t = 0; t < 8; ++t)
    spec.rows[std::to_string(t)] =
        stand::DenseDistribution(rows[t], rows[t] + 8);
  return spec;
}

inline stand::MarkovModelSpec vocab8_redundant_spec(double temperature = 0.6) {
  auto spec = vocab8_spec(temperature);
  spec.patterns.push_back({{1, 2, 3, 4, 5}, 0.8});
  spec.patterns.push_back({{6, 7, 6}, 0.7});
  return spec;
}

// Probability of drawing `ordered` (without replacement) from weights `w`.
inline double plackett_luce_prob(const std::vector<double>& w,
                                 const std::vector<int>& ordered) {
  double total = 0.0;
  for (double x : w) total += x;
  double prob = 1.0;
  for (int idx : ordered) {
    prob *= w[idx] / total;
    total -= w[idx];
  }
  return prob;
}

// All ordered k-selections from n items.
inline std::vector<std::vector<int>> ordered_selections(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  std::vector<bool> used(n, false);
  auto rec = [&](auto&& self) -> void {
    if (static_cast<int>(cur.size()) == k) {
      out.push_back(cur);
      return;
    }
    for (int i = 0; i < n; ++i) {
      if (used[i]) continue;
      used[i] = true;
      cur.push_back(i);
      self(self);
      cur.pop_back();
      used[i] = false;
    }
  };
  rec(rec);
  return out;
}

}  // namespace testfix
