#include <algorithm>
#include <unordered_set>

#include "riskrank/binio.hpp"
#include "riskrank/errors.hpp"
#include "riskrank/index.hpp"

namespace riskrank {

using nlohmann::json;

std::string runs_to_jsonl(const std::vector<RankedList>& runs) {
  std::string out;
  for (const auto& r : runs) {
    json hits = json::array();
    for (const auto& h : r.hits) hits.push_back({{"item_id", h.item_id}, {"score", h.score}});
    out += json{{"query_id", r.query_id}, {"hits", std::move(hits)}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<RankedList> parse_runs_jsonl(std::string_view text) {
  std::vector<RankedList> runs;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    RankedList r;
    try {
      const auto j = json::parse(line);
      r.query_id = j.at("query_id").get<std::string>();
      for (const auto& h : j.at("hits")) {
        r.hits.push_back({h.at("item_id").get<std::string>(), h.at("score").get<double>(), r.hits.size() + 1});
      }
    } catch (const json::exception& e) {
      throw ParseError("run file line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (!seen.insert(r.query_id).second) {
      throw ParseError("run file line " + std::to_string(line_no) + ": duplicate query_id '" + r.query_id + "'",
                       line_no);
    }
    if (!is_well_formed(r)) {
      throw ParseError("run file line " + std::to_string(line_no) + ": hits must have distinct ids and "
                       "non-increasing scores", line_no);
    }
    runs.push_back(std::move(r));
  }
  return runs;
}

void save_index(const std::filesystem::path& dir, const DenseIndex* dense, const LexicalIndex* lexical,
                const json& extra) {
  if (!dense && !lexical) throw InvalidArgument("save_index: nothing to save");
  if (dense && lexical && dense->item_ids() != lexical->item_ids()) {
    throw InvalidArgument("save_index: dense and lexical indexes hold different items");
  }
  const auto& ids = dense ? dense->item_ids() : lexical->item_ids();
  json meta;
  meta["format"] = "riskrank-index/1";
  meta["count"] = ids.size();
  meta["item_ids"] = ids;
  meta["has_dense"] = dense != nullptr;
  meta["has_lexical"] = lexical != nullptr;
  meta["dim"] = dense ? dense->dim() : 0;
  if (lexical) {
    meta["bm25"] = {{"k1", lexical->params().k1}, {"b", lexical->params().b}};
    meta["avgdl"] = lexical->avgdl();
    meta["doc_len"] = lexical->doc_len();
  }
  meta["extra"] = extra;

  std::filesystem::create_directories(dir);
  binio::write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
  if (dense && dense->size() > 0) {
    binio::write_file_atomic(dir / "vectors.bin",
                             binio::encode_vectors(static_cast<std::uint32_t>(dense->dim()), dense->matrix()));
  }
  if (lexical) {
    std::string out;
    for (const auto& [term, plist] : lexical->postings()) {
      json p = json::array();
      for (const auto& e : plist) p.push_back({ids[e.row], e.tf});
      out += json{{"term", term}, {"postings", std::move(p)}}.dump();
      out += '\n';
    }
    binio::write_file_atomic(dir / "postings.jsonl", out);
  }
}

LoadedIndex load_index(const std::filesystem::path& dir) {
  LoadedIndex out;
  const auto meta_path = dir / "meta.json";
  try {
    out.meta = json::parse(binio::read_file(meta_path));
  } catch (const json::exception& e) {
    throw CorruptFile(meta_path.string() + ": " + e.what());
  }
  try {
    auto ids = out.meta.at("item_ids").get<std::vector<std::string>>();
    if (ids.size() != out.meta.at("count").get<std::size_t>()) throw CorruptFile(meta_path.string() + ": count mismatch");
    if (out.meta.at("has_dense").get<bool>()) {
      const auto dim = out.meta.at("dim").get<std::size_t>();
      if (ids.empty()) {
        out.dense = DenseIndex::from_rows({}, dim, {});
      } else {
        const auto path = dir / "vectors.bin";
        auto decoded = binio::decode_vectors(binio::read_file(path), path.string(), ids.size());
        if (decoded.dim != dim) throw CorruptFile(path.string() + ": dim differs from meta.json");
        out.dense = DenseIndex::from_rows(ids, dim, std::move(decoded.values));
      }
    }
    if (out.meta.at("has_lexical").get<bool>()) {
      std::unordered_map<std::string, std::size_t> row_of;
      for (std::size_t i = 0; i < ids.size(); ++i) row_of.emplace(ids[i], i);
      std::map<std::string, std::vector<LexicalIndex::Posting>> postings;
      const auto path = dir / "postings.jsonl";
      const auto text = binio::read_file(path);
      std::size_t pos = 0;
      while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        const std::string_view line(text.data() + pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        const auto j = json::parse(line);
        auto& plist = postings[j.at("term").get<std::string>()];
        for (const auto& e : j.at("postings")) {
          const auto it = row_of.find(e.at(0).get<std::string>());
          if (it == row_of.end()) throw CorruptFile(path.string() + ": posting references unknown item");
          plist.push_back({it->second, e.at(1).get<std::uint32_t>()});
        }
        std::sort(plist.begin(), plist.end(), [](const auto& a, const auto& b) { return a.row < b.row; });
      }
      Bm25Params params{out.meta.at("bm25").at("k1").get<double>(), out.meta.at("bm25").at("b").get<double>()};
      out.lexical = LexicalIndex::from_parts(ids, out.meta.at("doc_len").get<std::vector<std::uint32_t>>(),
                                             std::move(postings), params);
    }
  } catch (const json::exception& e) {
    throw CorruptFile(dir.string() + ": " + e.what());
  }
  return out;
}

}  // namespace riskrank
