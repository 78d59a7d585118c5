#pragma once

#include <string>

#include "riskrank/benchmark.hpp"
#include "riskrank/report.hpp"

namespace testsupport {

inline std::string golden_path(const std::string& name) { return std::string(RISKRANK_GOLDEN_DIR) + "/" + name; }

inline riskrank::MetricReport aggregate_only(double mrr10, double map100, double ndcg10, double hr5) {
  riskrank::MetricReport r;
  r.aggregate = {{"MRR@10", mrr10}, {"MAP@100", map100}, {"NDCG@10", ndcg10}, {"HR@5", hr5}};
  r.query_count = 1;
  return r;
}

/// Base vs finetuned comparison with fixed headline values.
inline riskrank::ModelComparison comparison_fixture() {
  riskrank::ModelComparison cmp;
  cmp.base = aggregate_only(0.38, 0.39, 0.43, 0.5);
  cmp.finetuned = aggregate_only(0.84, 0.84, 0.86, 0.9);
  return cmp;
}

inline riskrank::BenchmarkTable benchmark_fixture() {
  return riskrank::compare_systems({{"finetuned", aggregate_only(0, 0, 0, 0.88)},
                                    {"system-b", aggregate_only(0, 0, 0, 0.86)},
                                    {"system-a", aggregate_only(0, 0, 0, 0.84)}},
                                   "finetuned", {{"finetuned", 768}, {"system-a", 768}, {"system-b", 1536}});
}

}  // namespace testsupport
