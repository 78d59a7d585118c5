#include "riskrank/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iostream>
#include <optional>
#include <typeinfo>

#include "CLI11.hpp"
#include "riskrank/benchmark.hpp"
#include "riskrank/binio.hpp"
#include "riskrank/config.hpp"
#include "riskrank/corpus.hpp"
#include "riskrank/errors.hpp"
#include "riskrank/finetune.hpp"
#include "riskrank/index.hpp"
#include "riskrank/remote_embedder.hpp"
#include "riskrank/report.hpp"

namespace riskrank {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string mode;
  std::vector<std::size_t> k_list;
  bool verbose = false;
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error("usage", what) {}
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("-c,--config", f.config, "JSON config file");
  cmd->add_option("-o,--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "seed override (split, shuffle, generator)");
  cmd->add_option("--jobs", f.jobs, "parallel remote embedding requests")->check(CLI::PositiveNumber);
  cmd->add_option("--mode", f.mode, "retrieval mode")->check(CLI::IsMember({"dense", "lexical", "hybrid"}));
  cmd->add_option("--k", f.k_list, "metric cutoffs, e.g. 5,10,100")->delimiter(',');
  cmd->add_flag("--verbose", f.verbose, "detailed progress and error output");
}

ConfigOverrides overrides_from(const CommonFlags& f) {
  ConfigOverrides o;
  if (!f.out.empty()) o.out = fs::path(f.out);
  o.seed = f.seed;
  if (!f.mode.empty()) o.mode = f.mode;
  if (!f.k_list.empty()) o.k_list = f.k_list;
  return o;
}

ProjectConfig require_config(const CommonFlags& f, const std::string& cmd) {
  if (f.config.empty()) throw UsageError(cmd + " needs a config file (-c/--config <path>)");
  return load_project_config(f.config, overrides_from(f));
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

fs::path make_run_dir(const ProjectConfig& cfg) {
  fs::path dir = cfg.out_dir / (timestamp_utc() + "-" + cfg.digest());
  for (int i = 1; fs::exists(dir); ++i) {
    dir = cfg.out_dir / (timestamp_utc() + "-" + cfg.digest() + "-" + std::to_string(i));
  }
  fs::create_directories(dir);
  return dir;
}

DatasetSplit load_split(const ProjectConfig& cfg) {
  const auto pairs = load_qa_pairs(cfg.pairs_path, cfg.format);
  return split_pairs(pairs, cfg.split_ratio, cfg.seed);
}

std::shared_ptr<Embedder> adapted(std::shared_ptr<Embedder> base, const fs::path& adapter_dir,
                                  const std::string& label) {
  auto loaded = load_adapter(adapter_dir);
  if (!loaded.base.empty() && loaded.base != base->describe()) {
    throw InvalidArgument("adapter " + adapter_dir.string() + " was trained on base " + loaded.base.dump() +
                          ", config uses " + base->describe().dump());
  }
  return std::make_shared<AdaptedEmbedder>(std::move(base), std::move(loaded.params),
                                           std::move(loaded.train_pair_ids), label);
}

// ------------------------------------------------------------------ commands

int cmd_synth(const CommonFlags& f, std::size_t clusters, std::size_t pairs, std::size_t vocab, std::size_t dim,
              std::ostream& out) {
  const std::uint64_t seed = f.seed.value_or(7);
  const fs::path dir = f.out.empty() ? fs::path("data") : fs::path(f.out);
  const json params{{"clusters", clusters}, {"pairs", pairs}, {"vocab", vocab}, {"seed", seed}, {"dim", dim}};
  out << "config-digest: " << json_digest(params) << "\n";
  const auto ds = synth_dataset(clusters, pairs, vocab, seed);
  fs::create_directories(dir);
  write_qa_pairs_jsonl(dir / "pairs.jsonl", ds.pairs);
  binio::write_file_atomic(dir / "documents.jsonl", documents_to_jsonl(ds.documents));
  const json cfg{
      {"data", {{"pairs", "pairs.jsonl"}, {"format", "jsonl"}, {"split_ratio", 0.95}, {"documents", "documents.jsonl"}}},
      {"seed", seed},
      {"out", "runs"},
      {"cache_dir", ".riskrank-cache"},
      {"embedder", {{"kind", "hash"}, {"dim", dim}, {"seed", 0}}},
      {"train", {{"batch_size", 12}, {"epochs", 2}, {"learning_rate", 0.05}, {"scale", 20.0}, {"adapter_dir", "adapter"}}},
      {"eval",
       {{"retrieval_mode", "dense"},
        {"candidate_pool", "all_contexts"},
        {"k_list", {5, 10, 100}},
        {"rerank", "none"},
        {"adapter", "adapter"}}},
      {"chunk", {{"window", kDefaultChunkWindow}, {"stride", kDefaultChunkStride}}},
      {"bench",
       {{"reference", "finetuned"},
        {"systems",
         {{{"name", "base"}},
          {{"name", "finetuned"}, {"adapter", "adapter"}},
          {{"name", "hash-" + std::to_string(dim / 4)}, {"embedder", {{"kind", "hash"}, {"dim", dim / 4}, {"seed", 0}}}}}}}}};
  binio::write_file_atomic(dir / "config.json", cfg.dump(2) + "\n");
  out << "wrote " << ds.pairs.size() << " pairs in " << ds.documents.size() << " clusters to " << dir.string() << "\n";
  return 0;
}

int cmd_ingest(const CommonFlags& f, const std::string& input, const std::string& format, const std::string& docs,
               std::ostream& out) {
  fs::path pairs_path;
  QaFormat fmt;
  double ratio = 0.95;
  std::uint64_t seed = f.seed.value_or(0);
  fs::path out_dir = f.out.empty() ? fs::path("ingested") : fs::path(f.out);
  json digest_src;
  if (!f.config.empty()) {
    const auto cfg = load_project_config(f.config, overrides_from(f));
    pairs_path = input.empty() ? cfg.pairs_path : fs::path(input);
    fmt = format.empty() ? (input.empty() ? cfg.format : qa_format_for(pairs_path)) : parse_qa_format(format);
    ratio = cfg.split_ratio;
    seed = cfg.seed;
    if (f.out.empty()) out_dir = cfg.out_dir / "ingested";
    digest_src = cfg.resolved;
  } else {
    if (input.empty()) throw UsageError("ingest needs --input <file> or -c/--config <path>");
    pairs_path = input;
    fmt = format.empty() ? qa_format_for(pairs_path) : parse_qa_format(format);
  }
  digest_src["ingest"] = {{"input", pairs_path.filename().string()}, {"seed", seed}, {"ratio", ratio}};
  out << "config-digest: " << json_digest(digest_src) << "\n";

  const auto pairs = load_qa_pairs(pairs_path, fmt);
  fs::create_directories(out_dir);
  write_qa_pairs_jsonl(out_dir / "pairs.jsonl", pairs);
  out << "loaded " << pairs.size() << " pairs\n";
  if (pairs.size() >= 2) {
    const auto split = split_pairs(pairs, ratio, seed);
    json s{{"ratio", ratio}, {"seed", seed}, {"train", json::array()}, {"test", json::array()}};
    for (const auto& p : split.train) s["train"].push_back(p.pair_id);
    for (const auto& p : split.test) s["test"].push_back(p.pair_id);
    binio::write_file_atomic(out_dir / "split.json", s.dump(2) + "\n");
    binio::write_file_atomic(out_dir / "qrels.jsonl", qrels_to_jsonl(build_qrels(split.test)));
    out << "split " << split.train.size() << " train / " << split.test.size() << " test\n";
  }
  if (!docs.empty()) {
    const auto documents = load_documents(docs);
    binio::write_file_atomic(out_dir / "documents.jsonl", documents_to_jsonl(documents));
    out << "loaded " << documents.size() << " documents\n";
  }
  return 0;
}

int cmd_chunk(const CommonFlags& f, const std::string& docs, std::optional<std::size_t> window,
              std::optional<std::size_t> stride, std::ostream& out) {
  std::vector<Document> documents;
  std::size_t w = kDefaultChunkWindow, s = kDefaultChunkStride;
  fs::path out_dir = f.out.empty() ? fs::path(".") : fs::path(f.out);
  json digest_src;
  if (!f.config.empty()) {
    const auto cfg = load_project_config(f.config, overrides_from(f));
    w = cfg.chunk_window;
    s = cfg.chunk_stride;
    if (f.out.empty()) out_dir = cfg.out_dir;
    if (docs.empty()) {
      if (!cfg.documents_path) throw UsageError("chunk: config has no data.documents and --docs was not given");
      documents = read_documents_jsonl(*cfg.documents_path);
    }
    digest_src = cfg.resolved;
  } else if (docs.empty()) {
    throw UsageError("chunk needs --docs <dir> or -c/--config <path>");
  }
  if (!docs.empty()) documents = load_documents(docs);
  if (window) w = *window;
  if (stride) s = *stride;
  digest_src["chunk"] = {{"window", w}, {"stride", s}};
  out << "config-digest: " << json_digest(digest_src) << "\n";

  std::vector<Chunk> chunks;
  for (const auto& d : documents) {
    auto c = chunk_document(d, w, s);
    chunks.insert(chunks.end(), std::make_move_iterator(c.begin()), std::make_move_iterator(c.end()));
  }
  fs::create_directories(out_dir);
  binio::write_file_atomic(out_dir / "chunks.jsonl", chunks_to_jsonl(chunks));
  out << "wrote " << chunks.size() << " chunks from " << documents.size() << " documents\n";
  return 0;
}

int cmd_embed(const CommonFlags& f, std::ostream& out) {
  const auto cfg = require_config(f, "embed");
  out << "config-digest: " << cfg.digest() << "\n";
  const auto pairs = load_qa_pairs(cfg.pairs_path, cfg.format);
  auto embedder = make_embedder(cfg.embedder, cfg.cache_dir, f.jobs);
  std::vector<std::string> questions, contexts;
  json ids = json::array();
  for (const auto& p : pairs) {
    questions.push_back(p.question);
    contexts.push_back(p.context);
    ids.push_back(p.pair_id);
  }
  const fs::path dir = cfg.out_dir / "embeddings";
  fs::create_directories(dir);
  auto write = [&](const std::vector<std::string>& texts, const char* name) {
    const auto vecs = embedder->embed(texts);
    std::vector<float> flat;
    for (const auto& v : vecs) flat.insert(flat.end(), v.values.begin(), v.values.end());
    if (!vecs.empty()) {
      binio::write_file_atomic(dir / name,
                               binio::encode_vectors(static_cast<std::uint32_t>(embedder->dim()), flat));
    }
  };
  write(questions, "questions.vec");
  write(contexts, "contexts.vec");
  binio::write_file_atomic(dir / "embeddings.json",
                           json{{"pair_ids", ids}, {"embedder", embedder->describe()}}.dump(2) + "\n");
  out << "embedded " << pairs.size() << " pairs with dim " << embedder->dim() << "\n";
  if (auto* remote = dynamic_cast<RemoteEmbedder*>(embedder.get())) {
    out << "cache hits " << remote->stats().cache_hits << ", requests " << remote->stats().requests << "\n";
  }
  return 0;
}

int cmd_index(const CommonFlags& f, const std::string& chunks_path, std::ostream& out) {
  const auto cfg = require_config(f, "index");
  out << "config-digest: " << cfg.digest() << "\n";
  std::vector<std::string> ids, texts;
  if (!chunks_path.empty()) {
    const auto text = binio::read_file(chunks_path);
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      const std::string line = text.substr(pos, nl - pos);
      pos = nl + 1;
      if (line.empty()) continue;
      const auto j = json::parse(line);
      ids.push_back(j.at("chunk_id").get<std::string>());
      texts.push_back(j.at("text").get<std::string>());
    }
  } else {
    for (const auto& p : load_qa_pairs(cfg.pairs_path, cfg.format)) {
      ids.push_back(p.pair_id);
      texts.push_back(p.context);
    }
  }
  std::optional<DenseIndex> dense;
  std::optional<LexicalIndex> lexical;
  json extra{{"retrieval_mode", to_string(cfg.eval.mode)}};
  if (cfg.eval.mode != RetrievalMode::lexical) {
    auto embedder = make_embedder(cfg.embedder, cfg.cache_dir, f.jobs);
    dense = DenseIndex::build(ids, embedder->embed(texts));
    extra["embedder"] = embedder->describe();
  }
  if (cfg.eval.mode != RetrievalMode::dense) lexical = LexicalIndex::build(ids, texts, cfg.eval.bm25);
  const fs::path dir = cfg.out_dir / "index";
  save_index(dir, dense ? &*dense : nullptr, lexical ? &*lexical : nullptr, extra);
  out << "indexed " << ids.size() << " items (" << to_string(cfg.eval.mode) << ") into " << dir.string() << "\n";
  return 0;
}

int cmd_train(const CommonFlags& f, std::ostream& out) {
  const auto cfg = require_config(f, "train");
  out << "config-digest: " << cfg.digest() << "\n";
  const auto split = load_split(cfg);
  auto base = make_embedder(cfg.embedder, cfg.cache_dir, f.jobs);

  EvalConfig probe = cfg.eval;
  probe.mode = RetrievalMode::dense;
  probe.rerank = "none";
  probe.k_list = {10};
  std::set<std::string> train_ids;
  for (const auto& p : split.train) train_ids.insert(p.pair_id);
  const EpochCallback on_epoch = [&](std::size_t epoch, const AdapterParams& params, LossReport& report) {
    AdaptedEmbedder current(base, params, train_ids, "epoch-" + std::to_string(epoch));
    const double mrr = run_eval(split, &current, probe).report.at("MRR@10");
    report.epoch_eval.push_back(mrr);
    out << "epoch " << epoch << ": mean batch loss " << format_double(report.epoch_mean_loss.back())
        << ", in-batch accuracy " << format_double(report.epoch_accuracy.back()) << ", test MRR@10 "
        << format_double(mrr) << "\n";
  };
  const auto trained = train_adapter(split.train, *base, cfg.train, on_epoch);
  save_adapter(cfg.adapter_dir, trained, base->describe());
  binio::write_file_atomic(cfg.adapter_dir / "train_log.jsonl", trained.report.log_jsonl());
  out << "adapter written to " << cfg.adapter_dir.string() << "\n";
  return 0;
}

int cmd_eval(const CommonFlags& f, std::ostream& out) {
  const auto cfg = require_config(f, "eval");
  out << "config-digest: " << cfg.digest() << "\n";
  const auto split = load_split(cfg);
  auto base = make_embedder(cfg.embedder, cfg.cache_dir, f.jobs);
  const auto base_result = run_eval(split, base.get(), cfg.eval);
  const fs::path dir = make_run_dir(cfg);
  binio::write_file_atomic(dir / "qrels.jsonl", qrels_to_jsonl(build_qrels(split.test)));
  binio::write_file_atomic(dir / "base_run.jsonl", runs_to_jsonl(base_result.run));

  if (cfg.eval_adapter) {
    auto tuned = adapted(base, *cfg.eval_adapter, "finetuned");
    const auto tuned_result = run_eval(split, tuned.get(), cfg.eval);
    ModelComparison cmp;
    cmp.base = base_result.report;
    cmp.finetuned = tuned_result.report;
    cmp.fingerprint = {{"config_digest", cfg.digest()},
                       {"base", base_result.fingerprint},
                       {"finetuned", tuned_result.fingerprint}};
    emit_report(cmp, ReportFormat::json, dir / "report.json");
    emit_report(cmp, ReportFormat::markdown, dir / "report.md");
    emit_report(cmp, ReportFormat::csv, dir / "plotdata.csv");
    binio::write_file_atomic(dir / "run.jsonl", runs_to_jsonl(tuned_result.run));
    binio::write_file_atomic(dir / "metrics.csv", tuned_result.report.to_csv());
    out << render_markdown(cmp);
  } else {
    const json report{{"kind", "single_report"},
                      {"label", "Base"},
                      {"report", base_result.report.to_json()},
                      {"config", {{"config_digest", cfg.digest()}, {"base", base_result.fingerprint}}}};
    binio::write_file_atomic(dir / "report.json", report.dump(2) + "\n");
    binio::write_file_atomic(dir / "report.md", render_markdown(base_result.report, "Base"));
    binio::write_file_atomic(dir / "plotdata.csv", base_result.report.to_csv());
    binio::write_file_atomic(dir / "run.jsonl", runs_to_jsonl(base_result.run));
    binio::write_file_atomic(dir / "metrics.csv", base_result.report.to_csv());
    out << render_markdown(base_result.report, "Base");
  }
  out << "report written to " << dir.string() << "\n";
  return 0;
}

int cmd_bench(const CommonFlags& f, std::ostream& out) {
  const auto cfg = require_config(f, "bench");
  out << "config-digest: " << cfg.digest() << "\n";
  if (!cfg.bench.contains("systems") || !cfg.bench["systems"].is_array() || cfg.bench["systems"].empty()) {
    throw InvalidArgument("bench: config lists no systems");
  }
  const auto split = load_split(cfg);
  const std::string reference = cfg.bench.value("reference", std::string());
  std::vector<std::pair<std::string, MetricReport>> reports;
  std::map<std::string, std::size_t> dims;
  json fingerprints = json::object();
  for (const auto& sys : cfg.bench["systems"]) {
    const auto name = sys.at("name").get<std::string>();
    const json spec = sys.value("embedder", cfg.embedder);
    std::shared_ptr<Embedder> embedder = make_embedder(spec, cfg.cache_dir, f.jobs);
    if (sys.contains("adapter") && !sys["adapter"].is_null()) {
      embedder = adapted(embedder, cfg.resolve(sys["adapter"].get<std::string>()), name);
    }
    EvalConfig ec = cfg.eval;
    if (sys.contains("retrieval_mode")) ec.mode = parse_retrieval_mode(sys["retrieval_mode"].get<std::string>());
    auto result = run_eval(split, embedder.get(), ec);
    out << name << ": HR@5 " << format_double(result.report.at("HR@5")) << "\n";
    dims[name] = embedder->dim();
    fingerprints[name] = result.fingerprint;
    reports.emplace_back(name, std::move(result.report));
  }
  const auto table = compare_systems(reports, reference, dims);
  const json fp{{"config_digest", cfg.digest()}, {"systems", fingerprints}};
  const fs::path dir = make_run_dir(cfg);
  emit_report(table, ReportFormat::json, dir / "report.json", fp);
  emit_report(table, ReportFormat::markdown, dir / "report.md", fp);
  emit_report(table, ReportFormat::csv, dir / "plotdata.csv", fp);
  out << render_markdown(table);
  out << "report written to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) { return run_cli(args, std::cout, std::cerr); }

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"riskrank: retrieval evaluation and embedding-adapter finetuning", "riskrank"};
  app.require_subcommand(1);
  CommonFlags flags;

  std::size_t clusters = 5, pairs = 100, vocab = 50, dim = 256;
  auto* synth = app.add_subcommand("synth", "generate a clustered synthetic QA corpus and a starter config");
  add_common(synth, flags);
  synth->add_option("--clusters", clusters, "number of clusters")->check(CLI::PositiveNumber);
  synth->add_option("--pairs", pairs, "pairs per cluster")->check(CLI::PositiveNumber);
  synth->add_option("--vocab", vocab, "vocabulary size per cluster")->check(CLI::PositiveNumber);
  synth->add_option("--dim", dim, "hash embedder dimension written to the config")->check(CLI::PositiveNumber);

  std::string input, format, docs;
  auto* ingest = app.add_subcommand("ingest", "load and validate QA pairs, write split and qrels");
  add_common(ingest, flags);
  ingest->add_option("--input", input, "QA file (jsonl or csv)");
  ingest->add_option("--format", format, "jsonl|csv (default: from extension)");
  ingest->add_option("--docs", docs, "directory of .txt documents");

  std::optional<std::size_t> window, stride;
  auto* chunk = app.add_subcommand("chunk", "split documents into overlapping token windows");
  add_common(chunk, flags);
  chunk->add_option("--docs", docs, "directory of .txt documents");
  chunk->add_option("--window", window, "tokens per chunk");
  chunk->add_option("--stride", stride, "tokens between chunk starts");

  auto* embed = app.add_subcommand("embed", "embed all questions and contexts (warms the cache)");
  add_common(embed, flags);

  std::string chunks_path;
  auto* index = app.add_subcommand("index", "build and persist a retrieval index");
  add_common(index, flags);
  index->add_option("--chunks", chunks_path, "index chunks.jsonl instead of QA contexts");

  auto* train = app.add_subcommand("train", "finetune a linear adapter with in-batch negatives");
  add_common(train, flags);
  auto* eval = app.add_subcommand("eval", "evaluate base (and finetuned) retrieval");
  add_common(eval, flags);
  auto* bench = app.add_subcommand("bench", "compare systems on HR@5");
  add_common(bench, flags);

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << "run 'riskrank --help' for usage\n";
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(flags, clusters, pairs, vocab, dim, out);
    if (ingest->parsed()) return cmd_ingest(flags, input, format, docs, out);
    if (chunk->parsed()) return cmd_chunk(flags, docs, window, stride, out);
    if (embed->parsed()) return cmd_embed(flags, out);
    if (index->parsed()) return cmd_index(flags, chunks_path, out);
    if (train->parsed()) return cmd_train(flags, out);
    if (eval->parsed()) return cmd_eval(flags, out);
    if (bench->parsed()) return cmd_bench(flags, out);
  } catch (const UsageError& e) {
    err << "riskrank: " << e.what() << "\n";
    err << "run 'riskrank --help' for usage\n";
    return 1;
  } catch (const Error& e) {
    err << "riskrank: error[" << e.kind() << "]: " << e.what() << "\n";
    if (flags.verbose) err << "  (exception type " << typeid(e).name() << ")\n";
    return 2;
  } catch (const std::exception& e) {
    err << "riskrank: error[internal]: " << e.what() << "\n";
    if (flags.verbose) err << "  (exception type " << typeid(e).name() << ")\n";
    return 2;
  }
  return 1;
}

}  // namespace riskrank
