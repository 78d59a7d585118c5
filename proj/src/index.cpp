#include "riskrank/index.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "riskrank/errors.hpp"

namespace riskrank {
namespace {

bool ranks_before(const std::pair<std::string, double>& a, const std::pair<std::string, double>& b) {
  if (a.second != b.second) return a.second > b.second;
  return a.first < b.first;
}

}  // namespace

bool is_well_formed(const RankedList& list) {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < list.hits.size(); ++i) {
    const auto& h = list.hits[i];
    if (h.rank != i + 1) return false;
    if (i > 0 && !(h.score <= list.hits[i - 1].score)) return false;
    if (!seen.insert(h.item_id).second) return false;
  }
  return true;
}

RankedList rank_scored(std::string query_id, std::vector<std::pair<std::string, double>> scored, std::size_t k) {
  const std::size_t keep = k == 0 ? scored.size() : std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), ranks_before);
  RankedList out;
  out.query_id = std::move(query_id);
  out.hits.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    out.hits.push_back({std::move(scored[i].first), scored[i].second, i + 1});
  }
  return out;
}

// ---------------------------------------------------------------- dense

DenseIndex DenseIndex::build(std::vector<std::string> ids, const std::vector<DenseVector>& vectors) {
  if (ids.size() != vectors.size()) {
    throw InvalidArgument("build_dense_index: " + std::to_string(ids.size()) + " ids for " +
                          std::to_string(vectors.size()) + " vectors");
  }
  const std::size_t dim = vectors.empty() ? 0 : vectors.front().dim();
  std::vector<float> matrix;
  matrix.reserve(ids.size() * dim);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dim() != dim || dim == 0) {
      throw DimensionMismatch("build_dense_index: item '" + ids[i] + "' has dim " +
                              std::to_string(vectors[i].dim()) + ", expected " + std::to_string(dim));
    }
    const auto unit = l2_normalize(vectors[i]);
    matrix.insert(matrix.end(), unit.values.begin(), unit.values.end());
  }
  return from_rows(std::move(ids), dim, std::move(matrix));
}

DenseIndex DenseIndex::from_rows(std::vector<std::string> ids, std::size_t dim, std::vector<float> matrix) {
  if (matrix.size() != ids.size() * dim) throw InvalidArgument("dense index: matrix size does not match ids x dim");
  DenseIndex idx;
  idx.dim_ = dim;
  idx.ids_ = std::move(ids);
  idx.matrix_ = std::move(matrix);
  idx.rows_.reserve(idx.ids_.size());
  for (std::size_t i = 0; i < idx.ids_.size(); ++i) {
    if (!idx.rows_.emplace(idx.ids_[i], i).second) {
      throw InvalidArgument("dense index: duplicate item id '" + idx.ids_[i] + "'");
    }
  }
  return idx;
}

std::optional<std::size_t> DenseIndex::find(const std::string& id) const {
  const auto it = rows_.find(id);
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

RankedList dense_search(const DenseIndex& index, const DenseVector& query, std::size_t k, std::string query_id) {
  if (k < 1) throw InvalidArgument("dense_search: k must be >= 1");
  if (index.size() == 0) return RankedList{std::move(query_id), {}};
  if (query.dim() != index.dim()) {
    throw DimensionMismatch("dense_search: query dim " + std::to_string(query.dim()) + ", index dim " +
                            std::to_string(index.dim()));
  }
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    scored.emplace_back(index.item_ids()[i], cosine(std::span<const float>(query.values), index.row(i)));
  }
  return rank_scored(std::move(query_id), std::move(scored), k);
}

// ---------------------------------------------------------------- lexical

LexicalIndex LexicalIndex::build(std::vector<std::string> ids, const std::vector<std::string>& texts,
                                 Bm25Params params) {
  if (ids.size() != texts.size()) throw InvalidArgument("build_lexical_index: ids and texts differ in length");
  std::vector<std::uint32_t> lens(ids.size());
  std::map<std::string, std::vector<Posting>> postings;
  for (std::size_t row = 0; row < texts.size(); ++row) {
    const auto tokens = tokenize(texts[row]);
    lens[row] = static_cast<std::uint32_t>(tokens.size());
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (auto& [term, count] : tf) postings[term].push_back({row, count});
  }
  return from_parts(std::move(ids), std::move(lens), std::move(postings), params);
}

LexicalIndex LexicalIndex::from_parts(std::vector<std::string> ids, std::vector<std::uint32_t> doc_len,
                                      std::map<std::string, std::vector<Posting>> postings, Bm25Params params) {
  if (ids.size() != doc_len.size()) throw InvalidArgument("lexical index: doc_len size mismatch");
  if (!(params.k1 >= 0.0) || !(params.b >= 0.0 && params.b <= 1.0)) {
    throw InvalidArgument("lexical index: need k1 >= 0 and 0 <= b <= 1");
  }
  LexicalIndex idx;
  idx.ids_ = std::move(ids);
  idx.doc_len_ = std::move(doc_len);
  idx.params_ = params;
  idx.postings_ = std::move(postings);
  for (std::size_t i = 0; i < idx.ids_.size(); ++i) {
    if (!idx.rows_.emplace(idx.ids_[i], i).second) {
      throw InvalidArgument("lexical index: duplicate item id '" + idx.ids_[i] + "'");
    }
  }
  for (const auto& [term, plist] : idx.postings_) {
    for (const auto& p : plist) {
      if (p.row >= idx.ids_.size()) throw InvalidArgument("lexical index: posting for '" + term + "' out of range");
    }
  }
  double total = 0.0;
  for (auto l : idx.doc_len_) total += l;
  idx.avgdl_ = idx.ids_.empty() ? 0.0 : total / static_cast<double>(idx.ids_.size());
  return idx;
}

std::optional<std::size_t> LexicalIndex::find(const std::string& id) const {
  const auto it = rows_.find(id);
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

double LexicalIndex::idf(const std::string& term) const {
  const auto it = postings_.find(term);
  if (it == postings_.end()) return 0.0;
  const double n = static_cast<double>(ids_.size());
  const double df = static_cast<double>(it->second.size());
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double LexicalIndex::term_weight(double idf, std::uint32_t tf, std::uint32_t len) const {
  if (tf == 0) return 0.0;
  const double norm = avgdl_ > 0.0 ? static_cast<double>(len) / avgdl_ : 0.0;
  const double t = static_cast<double>(tf);
  return idf * t * (params_.k1 + 1.0) / (t + params_.k1 * (1.0 - params_.b + params_.b * norm));
}

double bm25_score(const LexicalIndex& index, std::span<const std::string> query_terms, const std::string& item_id) {
  const auto row = index.find(item_id);
  if (!row) throw InvalidArgument("bm25_score: unknown item '" + item_id + "'");
  double score = 0.0;
  for (const auto& term : query_terms) {
    const auto it = index.postings().find(term);
    if (it == index.postings().end()) continue;
    const auto& plist = it->second;
    const auto p = std::lower_bound(plist.begin(), plist.end(), *row,
                                    [](const LexicalIndex::Posting& a, std::size_t r) { return a.row < r; });
    if (p == plist.end() || p->row != *row) continue;
    score += index.term_weight(index.idf(term), p->tf, index.doc_len()[*row]);
  }
  return score;
}

RankedList lexical_search(const LexicalIndex& index, std::string_view query_text, std::size_t k,
                          std::string query_id) {
  if (k < 1) throw InvalidArgument("lexical_search: k must be >= 1");
  const auto terms = tokenize(query_text);
  // Term-at-a-time accumulation in query order adds the same terms in the same
  // order as bm25_score, so the two agree bit for bit.
  std::unordered_map<std::size_t, double> acc;
  for (const auto& term : terms) {
    const auto it = index.postings().find(term);
    if (it == index.postings().end()) continue;
    const double idf = index.idf(term);
    for (const auto& p : it->second) acc[p.row] += index.term_weight(idf, p.tf, index.doc_len()[p.row]);
  }
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(acc.size());
  for (const auto& [row, s] : acc) {
    if (s > 0.0) scored.emplace_back(index.item_ids()[row], s);
  }
  return rank_scored(std::move(query_id), std::move(scored), k);
}

// ---------------------------------------------------------------- fusion

RankedList rrf_fuse(std::span<const RankedList> lists, std::size_t k_rrf, std::size_t depth) {
  if (k_rrf < 1 || depth < 1) throw InvalidArgument("rrf_fuse: k_rrf and depth must be >= 1");
  if (lists.empty()) return {};
  const std::string& qid = lists.front().query_id;
  std::map<std::string, double> fused;
  for (const auto& list : lists) {
    if (list.query_id != qid) {
      throw InvalidArgument("rrf_fuse: query ids differ ('" + qid + "' vs '" + list.query_id + "')");
    }
    for (const auto& h : list.hits) {
      if (h.rank > depth) continue;
      fused[h.item_id] += 1.0 / static_cast<double>(k_rrf + h.rank);
    }
  }
  std::vector<std::pair<std::string, double>> scored(fused.begin(), fused.end());
  return rank_scored(qid, std::move(scored), 0);
}

// ---------------------------------------------------------------- rerank

RankedList rerank(const RerankHook& hook, const std::string& query_text, const RankedList& candidates) {
  if (!hook) return candidates;
  RankedList out = hook(query_text, candidates);
  if (out.hits.size() != candidates.hits.size()) {
    throw ContractError("rerank hook returned " + std::to_string(out.hits.size()) + " items for " +
                        std::to_string(candidates.hits.size()) + " candidates");
  }
  std::unordered_set<std::string> expected;
  for (const auto& h : candidates.hits) expected.insert(h.item_id);
  for (const auto& h : out.hits) {
    if (expected.erase(h.item_id) == 0) {
      throw ContractError("rerank hook returned unknown or repeated item '" + h.item_id + "'");
    }
  }
  out.query_id = candidates.query_id;
  for (std::size_t i = 0; i < out.hits.size(); ++i) {
    out.hits[i].rank = i + 1;
    if (i > 0 && !(out.hits[i].score <= out.hits[i - 1].score)) {
      throw ContractError("rerank hook scores are not non-increasing at position " + std::to_string(i + 1));
    }
  }
  return out;
}

RerankRegistry::RerankRegistry() {
  hooks_["none"] = RerankHook{};
  hooks_["identity"] = [](const std::string&, const RankedList& c) { return c; };
}

RerankRegistry& RerankRegistry::global() {
  static RerankRegistry registry;
  return registry;
}

void RerankRegistry::add(const std::string& name, RerankHook hook) { hooks_[name] = std::move(hook); }

const RerankHook& RerankRegistry::get(const std::string& name) const {
  const auto it = hooks_.find(name);
  if (it == hooks_.end()) throw InvalidArgument("unknown rerank hook '" + name + "'");
  return it->second;
}

bool RerankRegistry::contains(const std::string& name) const { return hooks_.count(name) != 0; }

}  // namespace riskrank
