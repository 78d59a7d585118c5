#include "riskrank/metrics.hpp"

#include <charconv>
#include <cmath>
#include <functional>

#include "riskrank/errors.hpp"

namespace riskrank {
namespace {

using PerQuery = std::function<double(const RankedList&, const std::set<std::string>&, std::size_t)>;

MetricReport score_run(const std::vector<RankedList>& run, const Qrels& qrels, std::size_t k,
                       const std::string& name, const PerQuery& fn) {
  if (k < 1) throw InvalidArgument(name + ": k must be >= 1");
  MetricReport r;
  r.k_settings[name] = k;
  for (const auto& list : run) {
    const auto it = qrels.find(list.query_id);
    if (it == qrels.end()) throw InvalidArgument(name + ": query '" + list.query_id + "' has no relevance judgments");
    if (r.per_query.count(list.query_id)) throw InvalidArgument(name + ": query '" + list.query_id + "' appears twice in the run");
    r.per_query[list.query_id][name] = fn(list, it->second, k);
  }
  double sum = 0.0;
  for (const auto& [qid, values] : r.per_query) sum += values.at(name);
  r.query_count = r.per_query.size();
  r.aggregate[name] = r.query_count == 0 ? 0.0 : sum / static_cast<double>(r.query_count);
  return r;
}

}  // namespace

std::string MetricSpec::name() const {
  const char* prefix = "";
  switch (kind) {
    case MetricKind::mrr: prefix = "MRR"; break;
    case MetricKind::map: prefix = "MAP"; break;
    case MetricKind::ndcg: prefix = "NDCG"; break;
    case MetricKind::hit_rate: prefix = "HR"; break;
  }
  return std::string(prefix) + "@" + std::to_string(k);
}

MetricSpec MetricSpec::parse(const std::string& name) {
  const auto at = name.find('@');
  if (at == std::string::npos) throw InvalidArgument("metric '" + name + "' lacks @k");
  const auto prefix = name.substr(0, at);
  std::size_t k = 0;
  const auto* first = name.data() + at + 1;
  const auto* last = name.data() + name.size();
  const auto [ptr, ec] = std::from_chars(first, last, k);
  if (ec != std::errc() || ptr != last || k == 0) throw InvalidArgument("metric '" + name + "' has a bad cutoff");
  if (prefix == "MRR") return {MetricKind::mrr, k};
  if (prefix == "MAP") return {MetricKind::map, k};
  if (prefix == "NDCG") return {MetricKind::ndcg, k};
  if (prefix == "HR") return {MetricKind::hit_rate, k};
  throw InvalidArgument("unknown metric '" + name + "'");
}

double MetricReport::at(const std::string& metric) const {
  const auto it = aggregate.find(metric);
  if (it == aggregate.end()) throw InvalidArgument("report has no metric '" + metric + "'");
  return it->second;
}

void MetricReport::merge(const MetricReport& other) {
  if (per_query.empty() && aggregate.empty()) {
    *this = other;
    return;
  }
  if (other.query_count != query_count) throw InvalidArgument("MetricReport::merge: query sets differ");
  for (const auto& [qid, values] : other.per_query) {
    auto it = per_query.find(qid);
    if (it == per_query.end()) throw InvalidArgument("MetricReport::merge: query sets differ");
    for (const auto& [m, v] : values) it->second[m] = v;
  }
  for (const auto& [m, v] : other.aggregate) aggregate[m] = v;
  for (const auto& [m, k] : other.k_settings) k_settings[m] = k;
}

nlohmann::json MetricReport::to_json() const {
  return {{"query_count", query_count}, {"k", k_settings}, {"aggregate", aggregate}, {"per_query", per_query}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport r;
  r.query_count = j.at("query_count").get<std::size_t>();
  r.k_settings = j.at("k").get<std::map<std::string, std::size_t>>();
  r.aggregate = j.at("aggregate").get<std::map<std::string, double>>();
  r.per_query = j.at("per_query").get<std::map<std::string, std::map<std::string, double>>>();
  return r;
}

std::string MetricReport::to_csv() const {
  std::string out = "metric,value\n";
  for (const auto& [m, v] : aggregate) out += m + "," + format_double(v) + "\n";
  return out;
}

MetricReport mrr_at_k(const std::vector<RankedList>& run, const Qrels& qrels, std::size_t k) {
  return score_run(run, qrels, k, MetricSpec{MetricKind::mrr, k}.name(),
                   [](const RankedList& list, const std::set<std::string>& rel, std::size_t cut) {
                     const std::size_t n = std::min(cut, list.hits.size());
                     for (std::size_t i = 0; i < n; ++i) {
                       if (rel.count(list.hits[i].item_id)) return 1.0 / static_cast<double>(i + 1);
                     }
                     return 0.0;
                   });
}

MetricReport map_at_k(const std::vector<RankedList>& run, const Qrels& qrels, std::size_t k) {
  return score_run(run, qrels, k, MetricSpec{MetricKind::map, k}.name(),
                   [](const RankedList& list, const std::set<std::string>& rel, std::size_t cut) {
                     const std::size_t n = std::min(cut, list.hits.size());
                     double sum = 0.0;
                     std::size_t found = 0;
                     for (std::size_t i = 0; i < n; ++i) {
                       if (rel.count(list.hits[i].item_id)) {
                         ++found;
                         sum += static_cast<double>(found) / static_cast<double>(i + 1);
                       }
                     }
                     return sum / static_cast<double>(std::min(rel.size(), cut));
                   });
}

MetricReport ndcg_at_k(const std::vector<RankedList>& run, const Qrels& qrels, std::size_t k) {
  return score_run(run, qrels, k, MetricSpec{MetricKind::ndcg, k}.name(),
                   [](const RankedList& list, const std::set<std::string>& rel, std::size_t cut) {
                     const std::size_t n = std::min(cut, list.hits.size());
                     double dcg = 0.0;
                     for (std::size_t i = 0; i < n; ++i) {
                       if (rel.count(list.hits[i].item_id)) dcg += 1.0 / std::log2(static_cast<double>(i + 2));
                     }
                     double ideal = 0.0;
                     const std::size_t m = std::min(rel.size(), cut);
                     for (std::size_t i = 0; i < m; ++i) ideal += 1.0 / std::log2(static_cast<double>(i + 2));
                     return dcg / ideal;
                   });
}

MetricReport hit_rate_at_k(const std::vector<RankedList>& run, const Qrels& qrels, std::size_t k) {
  return score_run(run, qrels, k, MetricSpec{MetricKind::hit_rate, k}.name(),
                   [](const RankedList& list, const std::set<std::string>& rel, std::size_t cut) {
                     const std::size_t n = std::min(cut, list.hits.size());
                     for (std::size_t i = 0; i < n; ++i) {
                       if (rel.count(list.hits[i].item_id)) return 1.0;
                     }
                     return 0.0;
                   });
}

MetricReport evaluate_run(const std::vector<RankedList>& run, const Qrels& qrels,
                          const std::vector<MetricSpec>& metrics) {
  MetricReport out;
  for (const auto& m : metrics) {
    switch (m.kind) {
      case MetricKind::mrr: out.merge(mrr_at_k(run, qrels, m.k)); break;
      case MetricKind::map: out.merge(map_at_k(run, qrels, m.k)); break;
      case MetricKind::ndcg: out.merge(ndcg_at_k(run, qrels, m.k)); break;
      case MetricKind::hit_rate: out.merge(hit_rate_at_k(run, qrels, m.k)); break;
    }
  }
  return out;
}

std::vector<MetricSpec> metrics_for_cutoffs(const std::vector<std::size_t>& k_list) {
  std::vector<MetricSpec> out;
  for (std::size_t k : k_list) {
    for (auto kind : {MetricKind::mrr, MetricKind::map, MetricKind::ndcg, MetricKind::hit_rate}) {
      out.push_back({kind, k});
    }
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format", "cannot format double");
  return std::string(buf, ptr);
}

}  // namespace riskrank
