#include "riskrank/report.hpp"

#include <cfenv>
#include <cmath>
#include <cstdio>

#include "riskrank/binio.hpp"
#include "riskrank/errors.hpp"

namespace riskrank {

using nlohmann::json;

namespace {

const char* const kComparisonRows[] = {"MRR@10", "MAP@100", "NDCG@10"};

void check_comparison(const ModelComparison& cmp) {
  for (const char* m : kComparisonRows) {
    if (!cmp.base.has(m) || !cmp.finetuned.has(m)) {
      throw InvalidArgument(std::string("report: comparison lacks ") + m);
    }
  }
}

void check_table(const BenchmarkTable& table) {
  if (table.rows.empty()) throw InvalidArgument("report: empty comparison set");
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

}  // namespace

ReportFormat parse_report_format(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  if (s == "csv") return ReportFormat::csv;
  throw InvalidArgument("unknown report format '" + s + "' (json|markdown|csv)");
}

double round_half_even(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double r = std::nearbyint(value * scale) / scale;
  std::fesetround(saved);
  return r;
}

std::string format_percent(double fraction, int decimals) {
  return fixed(round_half_even(fraction * 100.0, decimals), decimals);
}

std::string render_markdown(const ModelComparison& cmp, int decimals) {
  check_comparison(cmp);
  std::string out = "| Metric | " + cmp.base_label + " | " + cmp.finetuned_label + " |\n";
  out += "|---|---:|---:|\n";
  for (const char* m : kComparisonRows) {
    out += std::string("| ") + m + " | " + format_percent(cmp.base.at(m), decimals) + " | " +
           format_percent(cmp.finetuned.at(m), decimals) + " |\n";
  }
  return out;
}

std::string render_markdown(const MetricReport& report, const std::string& label, int decimals) {
  std::string out = "| Metric | " + label + " |\n|---|---:|\n";
  for (const char* m : kComparisonRows) {
    if (!report.has(m)) throw InvalidArgument(std::string("report: lacks ") + m);
    out += std::string("| ") + m + " | " + format_percent(report.at(m), decimals) + " |\n";
  }
  return out;
}

std::string render_markdown(const BenchmarkTable& table, int decimals) {
  check_table(table);
  std::string out = "| System | HR@5 [%] | Improvement [%] | Embedding Size |\n";
  out += "|---|---:|---:|---:|\n";
  for (const auto& r : table.rows) {
    const std::string improvement = r.is_reference ? "-" : fixed(round_half_even(r.improvement, decimals), decimals);
    out += "| " + r.system + " | " + format_percent(r.hr_at_5, decimals) + " | " + improvement + " | " +
           std::to_string(r.embedding_dim) + " |\n";
  }
  return out;
}

std::string render_json(const ModelComparison& cmp) {
  check_comparison(cmp);
  json j{{"kind", "model_comparison"},
         {"base_label", cmp.base_label},
         {"finetuned_label", cmp.finetuned_label},
         {"base", cmp.base.to_json()},
         {"finetuned", cmp.finetuned.to_json()},
         {"config", cmp.fingerprint}};
  return j.dump(2) + "\n";
}

std::string render_json(const BenchmarkTable& table, const json& fingerprint) {
  check_table(table);
  json j = table.to_json();
  j["kind"] = "benchmark_table";
  j["config"] = fingerprint;
  return j.dump(2) + "\n";
}

std::string render_csv(const ModelComparison& cmp) {
  check_comparison(cmp);
  std::string out = "metric,system,value\n";
  for (const char* m : kComparisonRows) {
    out += std::string(m) + "," + cmp.base_label + "," + format_double(cmp.base.at(m)) + "\n";
    out += std::string(m) + "," + cmp.finetuned_label + "," + format_double(cmp.finetuned.at(m)) + "\n";
  }
  return out;
}

std::string render_csv(const BenchmarkTable& table) {
  check_table(table);
  std::string out = "system,hr_at_5,improvement,embedding_size,reference\n";
  for (const auto& r : table.rows) {
    out += r.system + "," + format_double(r.hr_at_5) + "," + format_double(r.improvement) + "," +
           std::to_string(r.embedding_dim) + "," + (r.is_reference ? "1" : "0") + "\n";
  }
  return out;
}

namespace {

void write_report(const std::filesystem::path& path, const std::string& text) {
  try {
    binio::write_file_atomic(path, text);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError("cannot write report " + path.string() + ": " + e.what());
  }
}

}  // namespace

void emit_report(const ModelComparison& cmp, ReportFormat format, const std::filesystem::path& path) {
  switch (format) {
    case ReportFormat::json: write_report(path, render_json(cmp)); break;
    case ReportFormat::markdown: write_report(path, render_markdown(cmp)); break;
    case ReportFormat::csv: write_report(path, render_csv(cmp)); break;
  }
}

void emit_report(const BenchmarkTable& table, ReportFormat format, const std::filesystem::path& path,
                 const json& fingerprint) {
  switch (format) {
    case ReportFormat::json: write_report(path, render_json(table, fingerprint)); break;
    case ReportFormat::markdown: write_report(path, render_markdown(table)); break;
    case ReportFormat::csv: write_report(path, render_csv(table)); break;
  }
}

}  // namespace riskrank
