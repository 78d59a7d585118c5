#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "riskrank/embedding.hpp"

namespace riskrank {

struct RankedHit {
  std::string item_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  friend bool operator==(const RankedHit&, const RankedHit&) = default;
};

struct RankedList {
  std::string query_id;
  std::vector<RankedHit> hits;

  friend bool operator==(const RankedList&, const RankedList&) = default;
};

/// Ranks 1..n contiguous, scores non-increasing, item ids distinct.
bool is_well_formed(const RankedList& list);

/// Sorts (item, score) pairs by descending score then ascending item id,
/// keeps the first `k` and assigns ranks. k == 0 keeps everything.
RankedList rank_scored(std::string query_id, std::vector<std::pair<std::string, double>> scored,
                       std::size_t k);

/// Exact (full scan) cosine index with L2-normalized rows.
class DenseIndex {
 public:
  DenseIndex() = default;

  /// Throws InvalidArgument on duplicate ids or a count mismatch and
  /// DimensionMismatch on ragged vectors.
  static DenseIndex build(std::vector<std::string> ids, const std::vector<DenseVector>& vectors);
  /// Adopts an already normalized row-major matrix (used when loading).
  static DenseIndex from_rows(std::vector<std::string> ids, std::size_t dim, std::vector<float> matrix);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::string>& item_ids() const noexcept { return ids_; }
  const std::vector<float>& matrix() const noexcept { return matrix_; }
  std::span<const float> row(std::size_t i) const { return {matrix_.data() + i * dim_, dim_}; }
  std::optional<std::size_t> find(const std::string& id) const;

 private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 0;
  std::vector<float> matrix_;
  std::unordered_map<std::string, std::size_t> rows_;
};

/// Exact top-k by cosine; ties by ascending item id. An empty index returns
/// an empty list for any query.
RankedList dense_search(const DenseIndex& index, const DenseVector& query, std::size_t k,
                        std::string query_id = {});

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Okapi BM25 inverted index over tokenize()d item texts.
class LexicalIndex {
 public:
  struct Posting {
    std::size_t row;
    std::uint32_t tf;
  };

  LexicalIndex() = default;
  static LexicalIndex build(std::vector<std::string> ids, const std::vector<std::string>& texts,
                            Bm25Params params = {});
  /// Rebuilds from persisted postings; doc_len is aligned with ids.
  static LexicalIndex from_parts(std::vector<std::string> ids, std::vector<std::uint32_t> doc_len,
                                 std::map<std::string, std::vector<Posting>> postings, Bm25Params params);

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& item_ids() const noexcept { return ids_; }
  const std::vector<std::uint32_t>& doc_len() const noexcept { return doc_len_; }
  const std::map<std::string, std::vector<Posting>>& postings() const noexcept { return postings_; }
  double avgdl() const noexcept { return avgdl_; }
  const Bm25Params& params() const noexcept { return params_; }
  std::optional<std::size_t> find(const std::string& id) const;

  /// ln(1 + (N - df + 0.5) / (df + 0.5)); 0 for terms not in the index.
  double idf(const std::string& term) const;
  /// Contribution of one query-term occurrence for a document.
  double term_weight(double idf, std::uint32_t tf, std::uint32_t len) const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::uint32_t> doc_len_;
  double avgdl_ = 0.0;
  Bm25Params params_;
  std::map<std::string, std::vector<Posting>> postings_;
  std::unordered_map<std::string, std::size_t> rows_;
};

/// Sum over query terms (repeats included) of the BM25 term weight.
/// Throws InvalidArgument for an unknown item.
double bm25_score(const LexicalIndex& index, std::span<const std::string> query_terms,
                  const std::string& item_id);

/// Tokenizes the query, scores every item with a matching term, drops
/// zero scores and returns the top k with the dense_search tie rule.
RankedList lexical_search(const LexicalIndex& index, std::string_view query_text, std::size_t k,
                          std::string query_id = {});

inline constexpr std::size_t kDefaultRrfK = 60;
inline constexpr std::size_t kDefaultRrfDepth = 100;

/// Reciprocal rank fusion: score(item) = sum over lists of 1 / (k_rrf + rank)
/// for hits ranked within `depth`. Throws InvalidArgument when the lists
/// disagree on query_id.
RankedList rrf_fuse(std::span<const RankedList> lists, std::size_t k_rrf = kDefaultRrfK,
                    std::size_t depth = kDefaultRrfDepth);

/// A re-ranker returns the candidates in its preferred order with
/// non-increasing scores; ranks are renumbered by rerank().
using RerankHook = std::function<RankedList(const std::string& query_text, const RankedList& candidates)>;

/// Applies `hook` and checks its output is a reordering of the same items;
/// an empty hook is the identity. Throws ContractError otherwise.
RankedList rerank(const RerankHook& hook, const std::string& query_text, const RankedList& candidates);

/// Name -> hook table. "none" and "identity" are always present.
class RerankRegistry {
 public:
  static RerankRegistry& global();
  void add(const std::string& name, RerankHook hook);
  /// Throws InvalidArgument for unknown names.
  const RerankHook& get(const std::string& name) const;
  bool contains(const std::string& name) const;

 private:
  RerankRegistry();
  std::map<std::string, RerankHook> hooks_;
};

/// Run files: one JSON object per query, hits in rank order.
std::string runs_to_jsonl(const std::vector<RankedList>& runs);
std::vector<RankedList> parse_runs_jsonl(std::string_view text);

/// Persists either or both indexes to `dir` as meta.json, vectors.bin and
/// postings.jsonl. `extra` is merged into meta.json under "extra". When both
/// are given they must hold the same item ids in the same order.
void save_index(const std::filesystem::path& dir, const DenseIndex* dense, const LexicalIndex* lexical,
                const nlohmann::json& extra = nlohmann::json::object());

struct LoadedIndex {
  std::optional<DenseIndex> dense;
  std::optional<LexicalIndex> lexical;
  nlohmann::json meta;
};
LoadedIndex load_index(const std::filesystem::path& dir);

}  // namespace riskrank
