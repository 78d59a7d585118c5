#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskrank/corpus.hpp"
#include "riskrank/index.hpp"

namespace riskrank {

enum class MetricKind { mrr, map, ndcg, hit_rate };

struct MetricSpec {
  MetricKind kind;
  std::size_t k;
  std::string name() const;  // e.g. "MRR@10", "HR@5"
  static MetricSpec parse(const std::string& name);
  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

/// Per-query and mean metric values. Only queries present in the run are
/// scored; a query with an empty hit list scores 0.
struct MetricReport {
  std::map<std::string, std::map<std::string, double>> per_query;
  std::map<std::string, double> aggregate;
  std::map<std::string, std::size_t> k_settings;
  std::size_t query_count = 0;

  bool has(const std::string& metric) const { return aggregate.count(metric) != 0; }
  double at(const std::string& metric) const;
  /// Adds the metrics of `other`, which must cover the same queries.
  void merge(const MetricReport& other);

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
  /// Two-column "metric,value" CSV of the aggregates.
  std::string to_csv() const;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Throws InvalidArgument if a run query is missing from qrels or k is 0.
MetricReport mrr_at_k(const std::vector<RankedList>& run, const Qrels& qrels, std::size_t k);
/// AP@k normalized by min(|relevant|, k).
MetricReport map_at_k(const std::vector<RankedList>& run, const Qrels& qrels, std::size_t k);
/// Binary gain, 1/log2(rank+1) discount, ideal DCG over min(|relevant|, k).
MetricReport ndcg_at_k(const std::vector<RankedList>& run, const Qrels& qrels, std::size_t k);
MetricReport hit_rate_at_k(const std::vector<RankedList>& run, const Qrels& qrels, std::size_t k);

MetricReport evaluate_run(const std::vector<RankedList>& run, const Qrels& qrels,
                          const std::vector<MetricSpec>& metrics);

/// MRR, MAP, NDCG and HR at every cutoff in `k_list`.
std::vector<MetricSpec> metrics_for_cutoffs(const std::vector<std::size_t>& k_list);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace riskrank
