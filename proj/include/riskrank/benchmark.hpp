#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "riskrank/corpus.hpp"
#include "riskrank/embedding.hpp"
#include "riskrank/index.hpp"
#include "riskrank/metrics.hpp"

namespace riskrank {

enum class RetrievalMode { dense, lexical, hybrid };
enum class CandidatePool { all_contexts, test_contexts };

std::string to_string(RetrievalMode m);
std::string to_string(CandidatePool p);
RetrievalMode parse_retrieval_mode(const std::string& s);
CandidatePool parse_candidate_pool(const std::string& s);

struct EvalConfig {
  RetrievalMode mode = RetrievalMode::dense;
  std::string rerank = "none";
  CandidatePool pool = CandidatePool::all_contexts;
  std::vector<std::size_t> k_list = {5, 10, 100};
  std::uint64_t seed = 0;
  std::size_t rrf_k = kDefaultRrfK;
  Bm25Params bm25;

  /// max(k_list..., 100), so MAP@100 is always defined.
  std::size_t depth() const;
  void validate() const;
  nlohmann::json to_json() const;
  static EvalConfig from_json(const nlohmann::json& j);
};

struct EvalResult {
  MetricReport report;
  std::vector<RankedList> run;
  nlohmann::json fingerprint;
};

/// Embeds the candidate pool and the test questions, retrieves `depth` hits
/// per question in the configured mode, applies the rerank hook and scores
/// the run against single-relevant qrels at every k_list cutoff plus MRR@10,
/// MAP@100, NDCG@10 and HR@5. `embedder` may be null only in
/// lexical mode. Throws LeakageError if the embedder was trained on any test
/// pair.
EvalResult run_eval(const DatasetSplit& split, Embedder* embedder, const EvalConfig& config);

/// Hex digest (16 chars) of a JSON value's compact serialization.
std::string json_digest(const nlohmann::json& j);

struct BenchmarkRow {
  std::string system;
  double hr_at_5 = 0.0;
  double improvement = 0.0;  // reference HR@5 minus this row's, in percentage points
  std::size_t embedding_dim = 0;
  bool is_reference = false;
};

struct BenchmarkTable {
  std::string reference;
  std::vector<BenchmarkRow> rows;  // ascending HR@5, ties by name

  nlohmann::json to_json() const;
};

/// Table of HR@5 and the reference system's improvement over each row,
/// computed from unrounded values.
BenchmarkTable compare_systems(const std::vector<std::pair<std::string, MetricReport>>& reports,
                               const std::string& reference, const std::map<std::string, std::size_t>& dims);

}  // namespace riskrank
