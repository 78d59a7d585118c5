#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskrank/benchmark.hpp"
#include "riskrank/corpus.hpp"
#include "riskrank/embedding.hpp"
#include "riskrank/finetune.hpp"

namespace riskrank {

/// Command-line values that take precedence over the config file.
struct ConfigOverrides {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::vector<std::size_t>> k_list;
};

/// Resolved run configuration: defaults < config file < flags. Relative
/// paths in the file are resolved against the file's directory.
struct ProjectConfig {
  std::filesystem::path base_dir;
  nlohmann::json resolved;  // effective values, echoed into the digest

  std::filesystem::path pairs_path;
  QaFormat format = QaFormat::jsonl;
  std::optional<std::filesystem::path> documents_path;
  double split_ratio = 0.95;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  std::filesystem::path cache_dir;
  nlohmann::json embedder;
  TrainingConfig train;
  std::filesystem::path adapter_dir;
  EvalConfig eval;
  std::optional<std::filesystem::path> eval_adapter;
  std::size_t chunk_window = kDefaultChunkWindow;
  std::size_t chunk_stride = kDefaultChunkStride;
  nlohmann::json bench;

  /// 16 hex chars of SHA-256 over `resolved`.
  std::string digest() const;
  std::filesystem::path resolve(const std::string& p) const;
};

ProjectConfig load_project_config(const std::filesystem::path& path, const ConfigOverrides& overrides);
ProjectConfig make_project_config(const nlohmann::json& file, const std::filesystem::path& base_dir,
                                  const ConfigOverrides& overrides);

/// Builds an embedder from a spec such as {"kind":"hash","dim":256,"seed":0}
/// or a remote ProviderConfig object ({"kind":"remote", ...}).
std::shared_ptr<Embedder> make_embedder(const nlohmann::json& spec, const std::filesystem::path& cache_dir,
                                        std::size_t jobs);

}  // namespace riskrank
