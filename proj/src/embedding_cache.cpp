#include "riskrank/embedding_cache.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <cstdlib>

#include "riskrank/binio.hpp"
#include "riskrank/errors.hpp"

namespace riskrank {
namespace {

// Provider and model ids become directory names; anything outside a safe
// set (e.g. the '/' in "models/embedding-001") is replaced.
std::string path_component(const std::string& id) {
  if (id.empty()) throw InvalidArgument("cache: empty provider or model id");
  std::string out = id;
  for (char& c : out) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  if (out == "." || out == "..") out = "_" + out;
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("crypto", "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

EmbeddingCache::EmbeddingCache(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path EmbeddingCache::path_for(const std::string& digest,
                                               const std::string& provider_id,
                                               const std::string& model_id) const {
  if (digest.size() != 64 || digest.find_first_not_of("0123456789abcdef") != std::string::npos) {
    throw InvalidArgument("cache: digest must be 64 lowercase hex chars");
  }
  return root_ / path_component(provider_id) / path_component(model_id) / (digest + ".vec");
}

void EmbeddingCache::put(const EmbeddingRecord& record) const {
  if (record.vector.dim() == 0 || !record.vector.all_finite()) {
    throw InvalidArgument("cache put: vector must be non-empty and finite");
  }
  const auto path = path_for(record.text_digest, record.provider_id, record.model_id);
  binio::write_file_atomic(path, binio::encode_vectors(static_cast<std::uint32_t>(record.vector.dim()),
                                                       record.vector.values));
}

std::optional<EmbeddingRecord> EmbeddingCache::get(const std::string& digest,
                                                   const std::string& provider_id,
                                                   const std::string& model_id) const {
  const auto path = path_for(digest, provider_id, model_id);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  auto decoded = binio::decode_vectors(binio::read_file(path), path.string(), 1);
  return EmbeddingRecord{digest, provider_id, model_id, DenseVector(std::move(decoded.values))};
}

std::filesystem::path EmbeddingCache::default_root(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("RISKRANK_CACHE_DIR"); env != nullptr && *env != '\0') {
    return std::filesystem::path(env);
  }
  return fallback;
}

}  // namespace riskrank
