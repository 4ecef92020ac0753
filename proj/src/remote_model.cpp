#include "stand/remote_model.hpp"

#include <cmath>
#include <mutex>

#include <httplib.h>
#include <json.hpp>

namespace stand {

SparseDistribution sparsify(const DenseDistribution& d) {
  SparseDistribution out;
  out.vocab_size = static_cast<int>(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] == 0.0) continue;
    out.ids.push_back(static_cast<TokenId>(i));
    out.probs.push_back(d[i]);
  }
  return out;
}

DenseDistribution densify(const SparseDistribution& sparse) {
  if (sparse.vocab_size < 2)
    throw ProtocolError("response vocab_size must be >= 2");
  if (sparse.ids.size() != sparse.probs.size())
    throw ProtocolError("ids/probs length mismatch");
  DenseDistribution d(sparse.vocab_size, 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < sparse.ids.size(); ++i) {
    TokenId id = sparse.ids[i];
    if (id < 0 || id >= sparse.vocab_size)
      throw ProtocolError("response id " + std::to_string(id) +
                          " outside vocab");
    double p = sparse.probs[i];
    if (!(p >= 0.0) || !std::isfinite(p))
      throw ProtocolError("response probability is negative or non-finite");
    d[id] += p;
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-4)
    throw ProtocolError("response mass " + std::to_string(sum) +
                        " outside normalization tolerance");
  for (double& p : d) p /= sum;
  return d;
}

struct RemoteModel::Impl {
  httplib::Client client;
  std::mutex mutex;

  Impl(const RemoteConfig& config) : client(config.host, config.port) {
    client.set_connection_timeout(0, config.timeout_ms * 1000);
    client.set_read_timeout(0, config.timeout_ms * 1000);
  }
};

RemoteModel::RemoteModel(RemoteConfig config)
    : config_(config), impl_(std::make_unique<Impl>(config)) {
  if (config_.vocab_size < 2)
    throw std::invalid_argument("vocab_size must be >= 2");
}

RemoteModel::~RemoteModel() = default;

DenseDistribution RemoteModel::next_distribution(
    std::span<const TokenId> context) const {
  for (TokenId t : context)
    if (t < 0 || t >= config_.vocab_size)
      throw std::invalid_argument("context token out of vocab range");

  nlohmann::json body;
  body["context"] = std::vector<TokenId>(context.begin(), context.end());
  body["temperature"] = config_.temperature;
  std::string payload = body.dump();

  std::lock_guard<std::mutex> lock(impl_->mutex);
  httplib::Result res;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    res = impl_->client.Post("/v1/next_dist", payload, "application/json");
    if (res) break;
  }
  if (!res)
    throw TransportError("logit server unreachable after " +
                         std::to_string(config_.max_retries + 1) +
                         " attempts");
  if (res->status != 200)
    throw ProtocolError("logit server returned HTTP " +
                        std::to_string(res->status));

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed response body: ") + e.what());
  }
  SparseDistribution sparse;
  try {
    sparse.vocab_size = j.at("vocab_size").get<int>();
    sparse.ids = j.at("ids").get<std::vector<TokenId>>();
    sparse.probs = j.at("probs").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("response missing fields: ") + e.what());
  }
  if (sparse.vocab_size != config_.vocab_size)
    throw ProtocolError("server vocab_size disagrees with client config");
  return densify(sparse);
}

}  // namespace stand
