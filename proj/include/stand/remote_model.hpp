#pragma once

#include <memory>
#include <string>

#include "stand/target_model.hpp"

namespace stand {

struct RemoteConfig {
  std::string host = "127.0.0.1";
  int port = 0;
  int vocab_size = 0;
  double temperature = 0.6;
  int max_retries = 3;
  int timeout_ms = 5000;
};

// Sparse wire distribution; omitted ids carry zero probability.
struct SparseDistribution {
  int vocab_size = 0;
  std::vector<TokenId> ids;
  std::vector<double> probs;
};

SparseDistribution sparsify(const DenseDistribution& d);

// Validates ids against vocab_size, renormalizes when the total is within
// 1e-4 of one, rejects otherwise. Exact inverse of sparsify for
// distributions with <= vocab_size support.
DenseDistribution densify(const SparseDistribution& sparse);

// HTTP client for the logit-server protocol:
//   POST /v1/next_dist  {"context":[...], "temperature": t}
//   -> {"vocab_size": v, "ids": [...], "probs": [...]}
// Requests are serialized per connection; transport failures retry up to
// max_retries before raising TransportError. Malformed responses raise
// ProtocolError.
class RemoteModel : public TargetModel {
 public:
  explicit RemoteModel(RemoteConfig config);
  ~RemoteModel() override;

  int vocab_size() const override { return config_.vocab_size; }

  DenseDistribution next_distribution(
      std::span<const TokenId> context) const override;

 private:
  RemoteConfig config_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stand
