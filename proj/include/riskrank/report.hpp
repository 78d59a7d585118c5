#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "riskrank/benchmark.hpp"
#include "riskrank/metrics.hpp"

namespace riskrank {

enum class ReportFormat { json, markdown, csv };
ReportFormat parse_report_format(const std::string& s);

/// Base-vs-finetuned comparison on the MRR@10 / MAP@100 / NDCG@10 rows.
struct ModelComparison {
  std::string base_label = "Base";
  std::string finetuned_label = "Finetuned";
  MetricReport base;
  MetricReport finetuned;
  nlohmann::json fingerprint = nlohmann::json::object();
};

inline constexpr int kDisplayDecimals = 1;

/// Round-half-even of `value` at `decimals` places (applied to value * 10^decimals).
double round_half_even(double value, int decimals);
/// Fraction in [0,1] rendered as a percentage with `decimals` places.
std::string format_percent(double fraction, int decimals = kDisplayDecimals);

std::string render_markdown(const ModelComparison& cmp, int decimals = kDisplayDecimals);
/// Single-system table on the same three rows.
std::string render_markdown(const MetricReport& report, const std::string& label,
                            int decimals = kDisplayDecimals);
std::string render_markdown(const BenchmarkTable& table, int decimals = kDisplayDecimals);
std::string render_json(const ModelComparison& cmp);
std::string render_json(const BenchmarkTable& table, const nlohmann::json& fingerprint = nlohmann::json::object());
/// Long-form "metric,system,value" rows for grouped bar charts.
std::string render_csv(const ModelComparison& cmp);
std::string render_csv(const BenchmarkTable& table);

/// Renders and writes atomically. An empty table or a comparison missing a
/// required metric is rejected before any file is touched.
void emit_report(const ModelComparison& cmp, ReportFormat format, const std::filesystem::path& path);
void emit_report(const BenchmarkTable& table, ReportFormat format, const std::filesystem::path& path,
                 const nlohmann::json& fingerprint = nlohmann::json::object());

}  // namespace riskrank
