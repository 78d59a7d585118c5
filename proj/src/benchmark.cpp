#include "riskrank/benchmark.hpp"

#include <algorithm>
#include <optional>
#include <unordered_set>

#include "riskrank/embedding_cache.hpp"
#include "riskrank/errors.hpp"

namespace riskrank {

using nlohmann::json;

std::string to_string(RetrievalMode m) {
  switch (m) {
    case RetrievalMode::dense: return "dense";
    case RetrievalMode::lexical: return "lexical";
    case RetrievalMode::hybrid: return "hybrid";
  }
  return "?";
}

std::string to_string(CandidatePool p) {
  return p == CandidatePool::all_contexts ? "all_contexts" : "test_contexts";
}

RetrievalMode parse_retrieval_mode(const std::string& s) {
  if (s == "dense") return RetrievalMode::dense;
  if (s == "lexical") return RetrievalMode::lexical;
  if (s == "hybrid") return RetrievalMode::hybrid;
  throw InvalidArgument("unknown retrieval mode '" + s + "' (dense|lexical|hybrid)");
}

CandidatePool parse_candidate_pool(const std::string& s) {
  if (s == "all_contexts") return CandidatePool::all_contexts;
  if (s == "test_contexts") return CandidatePool::test_contexts;
  throw InvalidArgument("unknown candidate pool '" + s + "' (all_contexts|test_contexts)");
}

std::size_t EvalConfig::depth() const {
  std::size_t d = 100;
  for (auto k : k_list) d = std::max(d, k);
  return d;
}

void EvalConfig::validate() const {
  if (k_list.empty()) throw InvalidArgument("eval: k_list must not be empty");
  for (auto k : k_list) {
    if (k < 1) throw InvalidArgument("eval: cutoffs must be >= 1");
  }
  if (rrf_k < 1) throw InvalidArgument("eval: rrf_k must be >= 1");
  if (!RerankRegistry::global().contains(rerank)) throw InvalidArgument("eval: unknown rerank hook '" + rerank + "'");
}

json EvalConfig::to_json() const {
  return {{"retrieval_mode", to_string(mode)},
          {"rerank", rerank},
          {"candidate_pool", to_string(pool)},
          {"k_list", k_list},
          {"depth", depth()},
          {"seed", seed},
          {"rrf_k", rrf_k},
          {"bm25", {{"k1", bm25.k1}, {"b", bm25.b}}}};
}

EvalConfig EvalConfig::from_json(const json& j) {
  EvalConfig c;
  if (j.contains("retrieval_mode")) c.mode = parse_retrieval_mode(j["retrieval_mode"].get<std::string>());
  if (j.contains("mode")) c.mode = parse_retrieval_mode(j["mode"].get<std::string>());
  c.rerank = j.value("rerank", c.rerank);
  if (j.contains("candidate_pool")) c.pool = parse_candidate_pool(j["candidate_pool"].get<std::string>());
  if (j.contains("k_list")) c.k_list = j["k_list"].get<std::vector<std::size_t>>();
  c.seed = j.value("seed", c.seed);
  c.rrf_k = j.value("rrf_k", c.rrf_k);
  if (j.contains("bm25")) {
    c.bm25.k1 = j["bm25"].value("k1", c.bm25.k1);
    c.bm25.b = j["bm25"].value("b", c.bm25.b);
  }
  c.validate();
  return c;
}

std::string json_digest(const json& j) { return sha256_hex(j.dump()).substr(0, 16); }

EvalResult run_eval(const DatasetSplit& split, Embedder* embedder, const EvalConfig& config) {
  config.validate();
  if (split.test.empty()) throw InvalidArgument("run_eval: test split is empty");
  if (config.mode != RetrievalMode::lexical && embedder == nullptr) {
    throw InvalidArgument("run_eval: " + to_string(config.mode) + " retrieval needs an embedder");
  }

  if (embedder != nullptr) {
    if (const auto* trained = embedder->training_pair_ids()) {
      std::size_t leaked = 0;
      std::string example;
      for (const auto& p : split.test) {
        if (trained->count(p.pair_id)) {
          if (leaked++ == 0) example = p.pair_id;
        }
      }
      if (leaked > 0) {
        throw LeakageError("run_eval: " + std::to_string(leaked) + " test pairs (e.g. '" + example +
                           "') were in the adapter's training set");
      }
    }
  }

  std::vector<const QAPair*> pool;
  if (config.pool == CandidatePool::all_contexts) {
    for (const auto& p : split.train) pool.push_back(&p);
  }
  for (const auto& p : split.test) pool.push_back(&p);
  std::vector<std::string> item_ids, item_texts;
  for (const auto* p : pool) {
    item_ids.push_back(p->pair_id);
    item_texts.push_back(p->context);
  }
  std::vector<std::string> questions;
  for (const auto& p : split.test) questions.push_back(p.question);

  const std::size_t depth = config.depth();
  std::optional<DenseIndex> dense;
  std::vector<DenseVector> query_vecs;
  if (config.mode != RetrievalMode::lexical) {
    auto item_vecs = embedder->embed(item_texts);
    query_vecs = embedder->embed(questions);
    if (item_vecs.size() != item_texts.size() || query_vecs.size() != questions.size()) {
      throw InvalidArgument("run_eval: missing embeddings (embedder returned " +
                            std::to_string(item_vecs.size() + query_vecs.size()) + " vectors for " +
                            std::to_string(item_texts.size() + questions.size()) + " texts)");
    }
    for (const auto& v : query_vecs) {
      if (v.dim() != embedder->dim()) throw DimensionMismatch("run_eval: query embedding has the wrong dim");
    }
    dense = DenseIndex::build(item_ids, item_vecs);
  }
  std::optional<LexicalIndex> lexical;
  if (config.mode != RetrievalMode::dense) lexical = LexicalIndex::build(item_ids, item_texts, config.bm25);

  const RerankHook& hook = RerankRegistry::global().get(config.rerank);
  EvalResult result;
  result.run.reserve(split.test.size());
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    const auto& q = split.test[i];
    RankedList list;
    switch (config.mode) {
      case RetrievalMode::dense:
        list = dense_search(*dense, query_vecs[i], depth, q.pair_id);
        break;
      case RetrievalMode::lexical:
        list = lexical_search(*lexical, q.question, depth, q.pair_id);
        break;
      case RetrievalMode::hybrid: {
        const RankedList parts[2] = {dense_search(*dense, query_vecs[i], depth, q.pair_id),
                                     lexical_search(*lexical, q.question, depth, q.pair_id)};
        list = rrf_fuse(parts, config.rrf_k, depth);
        if (list.hits.size() > depth) list.hits.resize(depth);
        break;
      }
    }
    result.run.push_back(rerank(hook, q.question, list));
  }

  const Qrels qrels = build_qrels(split.test);
  // The reported tables need MRR@10, MAP@100, NDCG@10 and HR@5 whatever k_list holds.
  auto metrics = metrics_for_cutoffs(config.k_list);
  for (const MetricSpec extra : {MetricSpec{MetricKind::mrr, 10}, MetricSpec{MetricKind::map, 100},
                                 MetricSpec{MetricKind::ndcg, 10}, MetricSpec{MetricKind::hit_rate, 5}}) {
    if (std::find(metrics.begin(), metrics.end(), extra) == metrics.end()) metrics.push_back(extra);
  }
  result.report = evaluate_run(result.run, qrels, metrics);

  std::vector<std::string> test_ids;
  for (const auto& p : split.test) test_ids.push_back(p.pair_id);
  result.fingerprint = config.to_json();
  result.fingerprint["system"] = embedder != nullptr ? embedder->describe() : json(nullptr);
  result.fingerprint["split"] = {{"ratio", split.ratio},
                                 {"seed", split.seed},
                                 {"train", split.train.size()},
                                 {"test", split.test.size()},
                                 {"pool_size", item_ids.size()},
                                 {"test_ids_digest", json_digest(test_ids)}};
  result.fingerprint["config_digest"] = json_digest(result.fingerprint);
  return result;
}

json BenchmarkTable::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"system", r.system},
                         {"hr_at_5", r.hr_at_5},
                         {"improvement", r.improvement},
                         {"embedding_size", r.embedding_dim},
                         {"reference", r.is_reference}});
  }
  return {{"reference", reference}, {"rows", rows_json}};
}

BenchmarkTable compare_systems(const std::vector<std::pair<std::string, MetricReport>>& reports,
                               const std::string& reference, const std::map<std::string, std::size_t>& dims) {
  if (reports.empty()) throw InvalidArgument("compare_systems: no systems to compare");
  const std::string hr = "HR@5";
  std::unordered_set<std::string> names;
  const MetricReport* ref = nullptr;
  for (const auto& [name, report] : reports) {
    if (!names.insert(name).second) throw InvalidArgument("compare_systems: duplicate system '" + name + "'");
    if (!report.has(hr)) throw InvalidArgument("compare_systems: system '" + name + "' has no HR@5");
    if (name == reference) ref = &report;
  }
  if (ref == nullptr) throw InvalidArgument("compare_systems: reference system '" + reference + "' not found");
  const double ref_hr = ref->at(hr);

  BenchmarkTable table;
  table.reference = reference;
  for (const auto& [name, report] : reports) {
    const auto d = dims.find(name);
    if (d == dims.end()) throw InvalidArgument("compare_systems: no embedding size for '" + name + "'");
    BenchmarkRow row;
    row.system = name;
    row.hr_at_5 = report.at(hr);
    row.improvement = name == reference ? 0.0 : (ref_hr - row.hr_at_5) * 100.0;
    row.embedding_dim = d->second;
    row.is_reference = name == reference;
    table.rows.push_back(std::move(row));
  }
  std::sort(table.rows.begin(), table.rows.end(), [](const BenchmarkRow& a, const BenchmarkRow& b) {
    if (a.hr_at_5 != b.hr_at_5) return a.hr_at_5 < b.hr_at_5;
    return a.system < b.system;
  });
  return table;
}

}  // namespace riskrank
