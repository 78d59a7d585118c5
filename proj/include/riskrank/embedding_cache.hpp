#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "riskrank/embedding.hpp"

namespace riskrank {

/// Lowercase hex SHA-256 of the raw bytes of `text`.
std::string sha256_hex(std::string_view text);

struct EmbeddingRecord {
  std::string text_digest;  // sha256_hex of the source text
  std::string provider_id;
  std::string model_id;
  DenseVector vector;
};

/// Content-addressed on-disk cache, one `.vec` file per record at
/// `<root>/<provider>/<model>/<digest>.vec`. Files are replaced atomically, so
/// concurrent readers are safe and duplicate writes of a key are idempotent.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path root);

  void put(const EmbeddingRecord& record) const;
  /// nullopt when absent; CorruptFile naming the path when the file is damaged.
  std::optional<EmbeddingRecord> get(const std::string& digest, const std::string& provider_id,
                                     const std::string& model_id) const;

  std::filesystem::path path_for(const std::string& digest, const std::string& provider_id,
                                 const std::string& model_id) const;
  const std::filesystem::path& root() const noexcept { return root_; }

  /// RISKRANK_CACHE_DIR when set, otherwise `fallback`.
  static std::filesystem::path default_root(const std::filesystem::path& fallback);

 private:
  std::filesystem::path root_;
};

}  // namespace riskrank
