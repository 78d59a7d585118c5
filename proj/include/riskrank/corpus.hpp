#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace riskrank {

struct Document {
  std::string doc_id;
  std::string title;
  std::string body;
  std::map<std::string, std::string> source_meta;

  friend bool operator==(const Document&, const Document&) = default;
};

/// Half-open character range into a document body.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  std::string text;
  CharSpan span;
  std::size_t ordinal = 0;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

/// One question bound to its relevant context passage.
struct QAPair {
  std::string pair_id;
  std::string question;
  std::string context;
  std::optional<std::string> doc_id;

  friend bool operator==(const QAPair&, const QAPair&) = default;
};

struct DatasetSplit {
  std::vector<QAPair> train;
  std::vector<QAPair> test;
  double ratio = 0.95;
  std::uint64_t seed = 0;
};

/// query_id -> ids of relevant items (binary relevance).
using Qrels = std::map<std::string, std::set<std::string>>;

enum class QaFormat { jsonl, csv };
QaFormat parse_qa_format(std::string_view name);
/// Guesses from the extension: ".csv" is csv, everything else jsonl.
QaFormat qa_format_for(const std::filesystem::path& path);

/// Loads QA records in file order. A record without `pair_id` gets its
/// 0-based record index zero-padded to six digits. Errors name the 1-based
/// line and the offending field.
std::vector<QAPair> load_qa_pairs(const std::filesystem::path& path, QaFormat format);
std::vector<QAPair> parse_qa_jsonl(std::string_view text);
std::vector<QAPair> parse_qa_csv(std::string_view text);

std::string qa_pairs_to_jsonl(const std::vector<QAPair>& pairs);
void write_qa_pairs_jsonl(const std::filesystem::path& path, const std::vector<QAPair>& pairs);

/// One Document per regular file with a `.txt` extension; doc_id is the file
/// stem. Sorted by doc_id.
std::vector<Document> load_documents(const std::filesystem::path& dir);
std::string documents_to_jsonl(const std::vector<Document>& docs);
std::vector<Document> read_documents_jsonl(const std::filesystem::path& path);

inline constexpr std::size_t kDefaultChunkWindow = 256;
inline constexpr std::size_t kDefaultChunkStride = 192;

/// Sliding windows of `window` whitespace-delimited tokens, advancing by
/// `stride` tokens; every start position before the last token yields a
/// chunk, so the tail may be shorter than `window`. The first chunk's span
/// starts at offset 0 and each span runs up to the start of the token that
/// follows the window (or the end of the body), so spans cover the whole body.
std::vector<Chunk> chunk_document(const Document& doc, std::size_t window = kDefaultChunkWindow,
                                  std::size_t stride = kDefaultChunkStride);
std::string chunks_to_jsonl(const std::vector<Chunk>& chunks);

/// Seeded Fisher-Yates shuffle (see Prng) followed by a cut at
/// floor(ratio * N): the head goes to train, the tail to test.
DatasetSplit split_pairs(const std::vector<QAPair>& pairs, double ratio, std::uint64_t seed);
std::size_t train_size_for(std::size_t n, double ratio);

/// Each test question's pair_id maps to its own context's item id (also the
/// pair_id).
Qrels build_qrels(const std::vector<QAPair>& test);
std::string qrels_to_jsonl(const Qrels& qrels);
Qrels parse_qrels_jsonl(std::string_view text);

struct SynthDataset {
  std::vector<Document> documents;  // one per cluster
  std::vector<QAPair> pairs;        // doc_id tags the cluster
  std::vector<std::size_t> cluster_of;
};

/// Clustered toy QA corpus. Each cluster owns `vocab_per_cluster` words,
/// split into a few high-frequency "background" words (about a tenth of the
/// vocabulary) and the remaining topic words. A pair's question and context
/// share up to three anchor topic words; both are padded with the cluster's
/// background words and a 5% chance per token of a word from another
/// cluster. Raw bag-of-words similarity is dominated by the background, so
/// a learned linear map that discounts it separates pairs much better.
SynthDataset synth_dataset(std::size_t n_clusters, std::size_t pairs_per_cluster,
                           std::size_t vocab_per_cluster, std::uint64_t seed);

}  // namespace riskrank
