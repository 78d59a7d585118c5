#include "riskrank/remote_embedder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <unordered_map>

#include "httplib.h"
#include "riskrank/errors.hpp"

namespace riskrank {

void ProviderConfig::validate() const {
  if (provider_id.empty() || model_id.empty()) throw InvalidArgument("provider: provider_id and model_id are required");
  if (base_url.empty()) throw InvalidArgument("provider " + provider_id + ": base_url is required");
  if (dim < 1) throw InvalidArgument("provider " + provider_id + ": dim must be >= 1");
  if (max_batch < 1) throw InvalidArgument("provider " + provider_id + ": max_batch must be >= 1");
  if (timeout_ms < 1) throw InvalidArgument("provider " + provider_id + ": timeout_ms must be >= 1");
}

ProviderConfig ProviderConfig::from_json(const nlohmann::json& j) {
  ProviderConfig c;
  c.provider_id = j.at("provider_id").get<std::string>();
  c.model_id = j.at("model_id").get<std::string>();
  c.base_url = j.at("base_url").get<std::string>();
  c.api_key_env = j.value("api_key_env", std::string());
  c.dim = j.at("dim").get<std::size_t>();
  c.max_batch = j.value("max_batch", c.max_batch);
  c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
  c.normalize = j.value("normalize", c.normalize);
  c.validate();
  return c;
}

nlohmann::json ProviderConfig::to_json() const {
  return {{"kind", "remote"},           {"provider_id", provider_id}, {"model_id", model_id},
          {"base_url", base_url},       {"api_key_env", api_key_env}, {"dim", dim},
          {"max_batch", max_batch},     {"timeout_ms", timeout_ms},   {"normalize", normalize}};
}

HttpResponse HttpTransport::post(const std::string& url, const std::string& body,
                                 const std::vector<std::pair<std::string, std::string>>& headers,
                                 int timeout_ms) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("bad url: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  const auto secs = timeout_ms / 1000;
  const auto usecs = (timeout_ms % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path, h, body, "application/json");
  if (!res) {
    throw RemoteError("POST " + url + " failed: " + httplib::to_string(res.error()), true);
  }
  return {res->status, res->body};
}

std::string build_embedding_request(const std::string& model_id, std::span<const std::string> texts) {
  nlohmann::json j;
  j["model"] = model_id;
  j["input"] = nlohmann::json::array();
  for (const auto& t : texts) j["input"].push_back(t);
  return j.dump();
}

std::vector<DenseVector> parse_embedding_response(const std::string& body, std::size_t expected_count,
                                                  std::size_t expected_dim,
                                                  const std::string& context) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError(context + ": response is not JSON: " + e.what(), false);
  }
  if (!j.is_object() || !j.contains("data") || !j["data"].is_array()) {
    throw RemoteError(context + ": response lacks a data array", false);
  }
  const auto& data = j["data"];
  if (data.size() != expected_count) {
    throw RemoteError(context + ": partial response, expected " + std::to_string(expected_count) +
                          " embeddings, got " + std::to_string(data.size()),
                      false);
  }
  std::vector<DenseVector> out(expected_count);
  std::vector<bool> seen(expected_count, false);
  for (const auto& item : data) {
    if (!item.contains("index") || !item["index"].is_number_integer() || !item.contains("embedding") ||
        !item["embedding"].is_array()) {
      throw RemoteError(context + ": malformed data entry", false);
    }
    const auto idx = item["index"].get<long long>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= expected_count || seen[idx]) {
      throw RemoteError(context + ": bad or repeated index " + std::to_string(idx), false);
    }
    const auto& emb = item["embedding"];
    if (emb.size() != expected_dim) {
      throw DimensionMismatch(context + ": provider returned " + std::to_string(emb.size()) +
                              "-dim vectors, config expects " + std::to_string(expected_dim));
    }
    std::vector<float> values;
    values.reserve(emb.size());
    for (const auto& v : emb) {
      if (!v.is_number()) throw RemoteError(context + ": non-numeric embedding value", false);
      values.push_back(v.get<float>());
    }
    DenseVector vec(std::move(values));
    if (!vec.all_finite()) throw RemoteError(context + ": non-finite embedding value", false);
    out[idx] = std::move(vec);
    seen[idx] = true;
  }
  return out;
}

std::vector<DenseVector> remote_embed(const ProviderConfig& config, std::span<const std::string> texts,
                                      const EmbeddingCache& cache, EmbeddingTransport& transport,
                                      std::size_t parallelism, RemoteEmbedStats* stats) {
  config.validate();
  if (texts.empty()) throw InvalidArgument("remote_embed: no texts");
  const std::string context = "provider " + config.provider_id + "/" + config.model_id;

  std::vector<std::string> digests(texts.size());
  std::vector<DenseVector> raw(texts.size());
  std::vector<bool> have(texts.size(), false);
  // unique miss digest -> first text index
  std::vector<std::size_t> misses;
  std::unordered_map<std::string, std::size_t> miss_slot;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    digests[i] = sha256_hex(texts[i]);
    if (auto rec = cache.get(digests[i], config.provider_id, config.model_id)) {
      if (rec->vector.dim() != config.dim) {
        throw DimensionMismatch(context + ": cached vector for " + digests[i] + " has dim " +
                                std::to_string(rec->vector.dim()));
      }
      raw[i] = std::move(rec->vector);
      have[i] = true;
      if (stats) ++stats->cache_hits;
    } else if (miss_slot.emplace(digests[i], misses.size()).second) {
      misses.push_back(i);
    }
  }

  if (!misses.empty()) {
    // An empty api_key_env means the endpoint takes no credentials.
    std::vector<std::pair<std::string, std::string>> headers;
    if (!config.api_key_env.empty()) {
      const char* key = std::getenv(config.api_key_env.c_str());
      if (key == nullptr || *key == '\0') {
        throw RemoteError(context + ": API key variable '" + config.api_key_env + "' is not set", false);
      }
      headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
    std::string url = config.base_url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    url += "/embeddings";

    const std::size_t n_batches = (misses.size() + config.max_batch - 1) / config.max_batch;
    std::vector<std::vector<DenseVector>> batch_results(n_batches);
    auto run_batch = [&](std::size_t b) {
      const std::size_t lo = b * config.max_batch;
      const std::size_t hi = std::min(misses.size(), lo + config.max_batch);
      std::vector<std::string> inputs;
      for (std::size_t m = lo; m < hi; ++m) inputs.push_back(texts[misses[m]]);
      const auto res = transport.post(url, build_embedding_request(config.model_id, inputs), headers,
                                      config.timeout_ms);
      if (res.status < 200 || res.status >= 300) {
        throw RemoteError(context + ": HTTP " + std::to_string(res.status) + " from " + url, true);
      }
      batch_results[b] = parse_embedding_response(res.body, inputs.size(), config.dim, context);
      for (std::size_t m = lo; m < hi; ++m) {
        cache.put({digests[misses[m]], config.provider_id, config.model_id, batch_results[b][m - lo]});
      }
    };

    const std::size_t width = std::max<std::size_t>(1, parallelism);
    for (std::size_t start = 0; start < n_batches; start += width) {
      const std::size_t stop = std::min(n_batches, start + width);
      if (width == 1) {
        run_batch(start);
      } else {
        std::vector<std::future<void>> inflight;
        for (std::size_t b = start; b < stop; ++b) inflight.push_back(std::async(std::launch::async, run_batch, b));
        for (auto& f : inflight) f.get();
      }
      if (stats) stats->requests += stop - start;
    }

    for (std::size_t b = 0; b < n_batches; ++b) {
      for (std::size_t k = 0; k < batch_results[b].size(); ++k) {
        const std::size_t text_index = misses[b * config.max_batch + k];
        raw[text_index] = std::move(batch_results[b][k]);
        have[text_index] = true;
      }
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (!have[i]) {
        raw[i] = raw[misses[miss_slot.at(digests[i])]];
        have[i] = true;
      }
    }
  }

  if (config.normalize) {
    for (auto& v : raw) v = l2_normalize(v);
  }
  return raw;
}

RemoteEmbedder::RemoteEmbedder(ProviderConfig config, EmbeddingCache cache,
                               std::shared_ptr<EmbeddingTransport> transport, std::size_t parallelism)
    : config_(std::move(config)),
      cache_(std::move(cache)),
      transport_(std::move(transport)),
      parallelism_(parallelism) {
  config_.validate();
  if (!transport_) transport_ = std::make_shared<HttpTransport>();
}

std::vector<DenseVector> RemoteEmbedder::embed(std::span<const std::string> texts) {
  if (texts.empty()) return {};
  return remote_embed(config_, texts, cache_, *transport_, parallelism_, &stats_);
}

nlohmann::json RemoteEmbedder::describe() const {
  auto j = config_.to_json();
  j.erase("timeout_ms");
  j.erase("max_batch");
  return j;
}

}  // namespace riskrank
