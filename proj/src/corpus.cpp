#include "riskrank/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "json.hpp"
#include "riskrank/binio.hpp"
#include "riskrank/errors.hpp"
#include "riskrank/prng.hpp"

namespace riskrank {
namespace {

using nlohmann::json;

std::string auto_pair_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return buf;
}

std::string required_string(const json& obj, const char* field, std::size_t line) {
  const auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    throw ParseError("line " + std::to_string(line) + ": missing field '" + field + "'", line);
  }
  if (!it->is_string()) {
    throw ParseError("line " + std::to_string(line) + ": field '" + field + "' must be a string", line);
  }
  auto s = it->get<std::string>();
  if (s.empty()) {
    throw ParseError("line " + std::to_string(line) + ": field '" + field + "' is empty", line);
  }
  return s;
}

std::optional<std::string> optional_string(const json& obj, const char* field, std::size_t line) {
  const auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw ParseError("line " + std::to_string(line) + ": field '" + field + "' must be a string", line);
  }
  return it->get<std::string>();
}

void check_unique(const std::vector<QAPair>& pairs, const std::vector<std::size_t>& lines) {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!seen.insert(pairs[i].pair_id).second) {
      throw ParseError("line " + std::to_string(lines[i]) + ": duplicate pair_id '" + pairs[i].pair_id + "'",
                       lines[i]);
    }
  }
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// RFC 4180 records; each record remembers the physical line it starts on.
struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

std::vector<CsvRecord> parse_csv_records(std::string_view text) {
  std::vector<CsvRecord> records;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    CsvRecord rec;
    rec.line = line;
    std::string field;
    bool in_quotes = false;
    bool done = false;
    while (!done) {
      if (i >= text.size()) {
        if (in_quotes) throw ParseError("line " + std::to_string(rec.line) + ": unterminated quoted field", rec.line);
        rec.fields.push_back(std::move(field));
        break;
      }
      const char c = text[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            in_quotes = false;
            ++i;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
          ++i;
        }
        continue;
      }
      switch (c) {
        case '"':
          in_quotes = true;
          ++i;
          break;
        case ',':
          rec.fields.push_back(std::move(field));
          field.clear();
          ++i;
          break;
        case '\r':
          ++i;
          break;
        case '\n':
          rec.fields.push_back(std::move(field));
          ++line;
          ++i;
          done = true;
          break;
        default:
          field.push_back(c);
          ++i;
      }
    }
    const bool empty_line = rec.fields.size() == 1 && rec.fields[0].empty();
    if (!empty_line) records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

QaFormat parse_qa_format(std::string_view name) {
  if (name == "jsonl") return QaFormat::jsonl;
  if (name == "csv") return QaFormat::csv;
  throw InvalidArgument("unknown QA format '" + std::string(name) + "' (expected jsonl or csv)");
}

QaFormat qa_format_for(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? QaFormat::csv : QaFormat::jsonl;
}

std::vector<QAPair> parse_qa_jsonl(std::string_view text) {
  std::vector<QAPair> pairs;
  std::vector<std::size_t> lines;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what(), line_no);
    }
    if (!obj.is_object()) throw ParseError("line " + std::to_string(line_no) + ": record is not an object", line_no);
    QAPair p;
    p.question = required_string(obj, "question", line_no);
    p.context = required_string(obj, "context", line_no);
    auto id = optional_string(obj, "pair_id", line_no);
    p.pair_id = id && !id->empty() ? *id : auto_pair_id(pairs.size());
    p.doc_id = optional_string(obj, "doc_id", line_no);
    pairs.push_back(std::move(p));
    lines.push_back(line_no);
  }
  check_unique(pairs, lines);
  return pairs;
}

std::vector<QAPair> parse_qa_csv(std::string_view text) {
  const auto records = parse_csv_records(text);
  if (records.empty()) return {};
  const auto& header = records.front().fields;
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      std::string h = header[i];
      if (i == 0 && h.rfind("\xEF\xBB\xBF", 0) == 0) h.erase(0, 3);
      if (h == name) return i;
    }
    return std::nullopt;
  };
  const auto q_col = column("question");
  const auto c_col = column("context");
  if (!q_col) throw ParseError("line 1: header lacks field 'question'", 1);
  if (!c_col) throw ParseError("line 1: header lacks field 'context'", 1);
  const auto id_col = column("pair_id");
  const auto doc_col = column("doc_id");

  std::vector<QAPair> pairs;
  std::vector<std::size_t> lines;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    auto cell = [&](std::optional<std::size_t> col, const char* name, bool required) -> std::optional<std::string> {
      if (!col || *col >= rec.fields.size() || rec.fields[*col].empty()) {
        if (required) {
          throw ParseError("line " + std::to_string(rec.line) + ": missing field '" + name + "'", rec.line);
        }
        return std::nullopt;
      }
      return rec.fields[*col];
    };
    QAPair p;
    p.question = *cell(q_col, "question", true);
    p.context = *cell(c_col, "context", true);
    auto id = cell(id_col, "pair_id", false);
    p.pair_id = id ? *id : auto_pair_id(pairs.size());
    p.doc_id = cell(doc_col, "doc_id", false);
    pairs.push_back(std::move(p));
    lines.push_back(rec.line);
  }
  check_unique(pairs, lines);
  return pairs;
}

std::vector<QAPair> load_qa_pairs(const std::filesystem::path& path, QaFormat format) {
  const auto text = binio::read_file(path);
  try {
    return format == QaFormat::jsonl ? parse_qa_jsonl(text) : parse_qa_csv(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

std::string qa_pairs_to_jsonl(const std::vector<QAPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    json j{{"pair_id", p.pair_id}, {"question", p.question}, {"context", p.context}};
    if (p.doc_id) j["doc_id"] = *p.doc_id;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_qa_pairs_jsonl(const std::filesystem::path& path, const std::vector<QAPair>& pairs) {
  binio::write_file_atomic(path, qa_pairs_to_jsonl(pairs));
}

std::vector<Document> load_documents(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::vector<Document> docs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    Document d;
    d.doc_id = entry.path().stem().string();
    d.title = d.doc_id;
    d.body = binio::read_file(entry.path());
    if (is_blank(d.body)) throw InvalidArgument("document " + entry.path().string() + " has an empty body");
    docs.push_back(std::move(d));
  }
  std::sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
  return docs;
}

std::string documents_to_jsonl(const std::vector<Document>& docs) {
  std::string out;
  for (const auto& d : docs) {
    json j{{"doc_id", d.doc_id}, {"title", d.title}, {"body", d.body}, {"source_meta", d.source_meta}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Document> read_documents_jsonl(const std::filesystem::path& path) {
  const auto text = binio::read_file(path);
  std::vector<Document> docs;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (is_blank(line)) continue;
    try {
      const auto j = json::parse(line);
      Document d;
      d.doc_id = required_string(j, "doc_id", line_no);
      d.body = required_string(j, "body", line_no);
      d.title = j.value("title", std::string());
      if (j.contains("source_meta")) d.source_meta = j["source_meta"].get<std::map<std::string, std::string>>();
      if (!ids.insert(d.doc_id).second) {
        throw ParseError("line " + std::to_string(line_no) + ": duplicate doc_id '" + d.doc_id + "'", line_no);
      }
      docs.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return docs;
}

std::vector<Chunk> chunk_document(const Document& doc, std::size_t window, std::size_t stride) {
  if (window < 1) throw InvalidArgument("chunk_document: window must be >= 1");
  if (stride < 1 || stride > window) throw InvalidArgument("chunk_document: stride must be in [1, window]");
  std::vector<CharSpan> tokens;
  const std::string& body = doc.body;
  for (std::size_t i = 0; i < body.size();) {
    while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i;
    if (i >= body.size()) break;
    const std::size_t start = i;
    while (i < body.size() && !std::isspace(static_cast<unsigned char>(body[i]))) ++i;
    tokens.push_back({start, i});
  }
  if (tokens.empty()) throw InvalidArgument("chunk_document: document '" + doc.doc_id + "' has an empty body");

  std::vector<Chunk> chunks;
  for (std::size_t first = 0; first < tokens.size(); first += stride) {
    const std::size_t last = std::min(tokens.size(), first + window);  // exclusive
    Chunk c;
    c.doc_id = doc.doc_id;
    c.ordinal = chunks.size();
    c.chunk_id = doc.doc_id + "#" + std::to_string(c.ordinal);
    c.span.start = first == 0 ? 0 : tokens[first].start;
    c.span.end = last < tokens.size() ? tokens[last].start : body.size();
    c.text = body.substr(c.span.start, c.span.end - c.span.start);
    chunks.push_back(std::move(c));
  }
  return chunks;
}

std::string chunks_to_jsonl(const std::vector<Chunk>& chunks) {
  std::string out;
  for (const auto& c : chunks) {
    json j{{"chunk_id", c.chunk_id}, {"doc_id", c.doc_id}, {"ordinal", c.ordinal},
           {"span", {c.span.start, c.span.end}}, {"text", c.text}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::size_t train_size_for(std::size_t n, double ratio) {
  // The epsilon keeps products such as 0.95 * 7500 from landing one below
  // the intended integer.
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

DatasetSplit split_pairs(const std::vector<QAPair>& pairs, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("split_pairs: ratio must be in (0, 1)");
  if (pairs.size() < 2) throw InvalidArgument("split_pairs: need at least 2 pairs");
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Prng rng(seed);
  rng.shuffle(order);
  DatasetSplit split;
  split.ratio = ratio;
  split.seed = seed;
  const std::size_t n_train = train_size_for(pairs.size(), ratio);
  split.train.reserve(n_train);
  split.test.reserve(pairs.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? split.train : split.test).push_back(pairs[order[i]]);
  }
  return split;
}

Qrels build_qrels(const std::vector<QAPair>& test) {
  Qrels q;
  for (const auto& p : test) {
    if (!q.emplace(p.pair_id, std::set<std::string>{p.pair_id}).second) {
      throw InvalidArgument("build_qrels: duplicate query id '" + p.pair_id + "'");
    }
  }
  return q;
}

std::string qrels_to_jsonl(const Qrels& qrels) {
  std::string out;
  for (const auto& [qid, rel] : qrels) {
    out += json{{"query_id", qid}, {"relevant", rel}}.dump();
    out += '\n';
  }
  return out;
}

Qrels parse_qrels_jsonl(std::string_view text) {
  Qrels q;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (is_blank(line)) continue;
    try {
      const auto j = json::parse(line);
      const auto qid = required_string(j, "query_id", line_no);
      auto rel = j.at("relevant").get<std::set<std::string>>();
      if (rel.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty relevant set", line_no);
      if (!q.emplace(qid, std::move(rel)).second) {
        throw ParseError("line " + std::to_string(line_no) + ": duplicate query_id '" + qid + "'", line_no);
      }
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return q;
}

SynthDataset synth_dataset(std::size_t n_clusters, std::size_t pairs_per_cluster, std::size_t vocab_per_cluster,
                           std::uint64_t seed) {
  if (n_clusters < 1 || pairs_per_cluster < 1 || vocab_per_cluster < 1) {
    throw InvalidArgument("synth_dataset: all counts must be >= 1");
  }
  constexpr std::size_t kAnchors = 3;
  constexpr std::size_t kQuestionBackground = 6;
  constexpr std::size_t kContextTopic = 4;
  constexpr std::size_t kContextBackground = 12;
  constexpr double kNoise = 0.05;

  const std::size_t n_background =
      vocab_per_cluster >= 10 ? vocab_per_cluster / 10 : (vocab_per_cluster >= 2 ? 1 : 0);
  auto word = [](std::size_t cluster, std::size_t j) {
    return "c" + std::to_string(cluster) + "w" + std::to_string(j);
  };

  Prng rng(seed);
  SynthDataset out;
  for (std::size_t c = 0; c < n_clusters; ++c) {
    const std::string cluster_id = "cluster" + std::to_string(c);
    std::string body;
    auto maybe_noise = [&](std::string w) {
      if (n_clusters > 1 && rng.unit() < kNoise) {
        std::size_t other = rng.below(n_clusters - 1);
        if (other >= c) ++other;
        return word(other, rng.below(vocab_per_cluster));
      }
      return w;
    };
    auto background = [&] { return word(c, rng.below(n_background)); };
    auto topic = [&] { return word(c, n_background + rng.below(vocab_per_cluster - n_background)); };
    auto join = [](std::vector<std::string>& toks, Prng& r, const char* tail) {
      r.shuffle(toks);
      std::string s;
      for (const auto& t : toks) {
        if (!s.empty()) s += ' ';
        s += t;
      }
      return s + tail;
    };

    for (std::size_t p = 0; p < pairs_per_cluster; ++p) {
      std::vector<std::size_t> topic_ids(vocab_per_cluster - n_background);
      for (std::size_t i = 0; i < topic_ids.size(); ++i) topic_ids[i] = n_background + i;
      rng.shuffle(topic_ids);
      const std::size_t n_anchor = std::min(kAnchors, topic_ids.size());

      std::vector<std::string> q, ctx;
      for (std::size_t a = 0; a < n_anchor; ++a) {
        q.push_back(maybe_noise(word(c, topic_ids[a])));
        ctx.push_back(maybe_noise(word(c, topic_ids[a])));
      }
      if (n_background > 0) {
        for (std::size_t i = 0; i < kQuestionBackground; ++i) q.push_back(maybe_noise(background()));
      }
      for (std::size_t i = 0; i < kContextTopic; ++i) ctx.push_back(maybe_noise(topic()));
      if (n_background > 0) {
        for (std::size_t i = 0; i < kContextBackground; ++i) ctx.push_back(maybe_noise(background()));
      }

      QAPair pair;
      pair.pair_id = "s" + std::to_string(c) + "-" + std::to_string(p);
      pair.question = join(q, rng, "?");
      pair.context = join(ctx, rng, ".");
      pair.doc_id = cluster_id;
      if (!body.empty()) body += '\n';
      body += pair.context;
      out.pairs.push_back(std::move(pair));
      out.cluster_of.push_back(c);
    }
    Document d;
    d.doc_id = cluster_id;
    d.title = "synthetic cluster " + std::to_string(c);
    d.body = std::move(body);
    d.source_meta = {{"publisher", "synthetic"}, {"seed", std::to_string(seed)}};
    out.documents.push_back(std::move(d));
  }
  return out;
}

}  // namespace riskrank
