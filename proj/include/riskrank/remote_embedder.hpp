#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "riskrank/embedding.hpp"
#include "riskrank/embedding_cache.hpp"

namespace riskrank {

/// Connection settings for one remote embedding model. Every provider is
/// reached through the same `POST {base_url}/embeddings` JSON shape.
struct ProviderConfig {
  std::string provider_id;
  std::string model_id;
  std::string base_url;
  std::string api_key_env;
  std::size_t dim = 0;
  std::size_t max_batch = 64;
  int timeout_ms = 30000;
  bool normalize = true;

  void validate() const;
  static ProviderConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Minimal POST abstraction so tests can count or fake requests.
class EmbeddingTransport {
 public:
  virtual ~EmbeddingTransport() = default;
  /// Throws RemoteError(retryable) when the connection itself fails.
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::vector<std::pair<std::string, std::string>>& headers,
                            int timeout_ms) = 0;
};

/// cpp-httplib backed transport (http and https).
class HttpTransport final : public EmbeddingTransport {
 public:
  HttpResponse post(const std::string& url, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>& headers,
                    int timeout_ms) override;
};

std::string build_embedding_request(const std::string& model_id, std::span<const std::string> texts);

/// Parses a `{"data":[{"index":i,"embedding":[...]}]}` body. Entries are
/// placed by `index`, never by arrival order. Throws RemoteError on a
/// partial or malformed response and DimensionMismatch on a wrong width.
std::vector<DenseVector> parse_embedding_response(const std::string& body, std::size_t expected_count,
                                                  std::size_t expected_dim,
                                                  const std::string& context);

struct RemoteEmbedStats {
  std::size_t cache_hits = 0;
  std::size_t requests = 0;
};

/// Cache-first embedding of `texts`. Misses (deduplicated by content) are
/// sent in batches of at most `config.max_batch`, up to `parallelism`
/// requests in flight, and written back to the cache. Results are returned
/// in input order.
std::vector<DenseVector> remote_embed(const ProviderConfig& config, std::span<const std::string> texts,
                                      const EmbeddingCache& cache, EmbeddingTransport& transport,
                                      std::size_t parallelism = 1, RemoteEmbedStats* stats = nullptr);

class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(ProviderConfig config, EmbeddingCache cache,
                 std::shared_ptr<EmbeddingTransport> transport, std::size_t parallelism = 1);

  std::size_t dim() const override { return config_.dim; }
  std::vector<DenseVector> embed(std::span<const std::string> texts) override;
  nlohmann::json describe() const override;
  const RemoteEmbedStats& stats() const noexcept { return stats_; }

 private:
  ProviderConfig config_;
  EmbeddingCache cache_;
  std::shared_ptr<EmbeddingTransport> transport_;
  std::size_t parallelism_;
  RemoteEmbedStats stats_;
};

}  // namespace riskrank
