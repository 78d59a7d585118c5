#include "riskrank/config.hpp"

#include "riskrank/binio.hpp"
#include "riskrank/embedding_cache.hpp"
#include "riskrank/errors.hpp"
#include "riskrank/remote_embedder.hpp"

namespace riskrank {

using nlohmann::json;

std::string ProjectConfig::digest() const { return sha256_hex(resolved.dump()).substr(0, 16); }

std::filesystem::path ProjectConfig::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

ProjectConfig load_project_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  json file;
  try {
    file = json::parse(binio::read_file(path));
  } catch (const json::exception& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  if (!file.is_object()) throw ParseError("config " + path.string() + ": top level must be an object");
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return make_project_config(file, base, overrides);
}

ProjectConfig make_project_config(const json& file, const std::filesystem::path& base_dir,
                                  const ConfigOverrides& overrides) {
  ProjectConfig c;
  c.base_dir = base_dir;
  try {
    const json data = file.value("data", json::object());
    const std::string pairs = data.value("pairs", std::string("pairs.jsonl"));
    const std::string format = data.value("format", qa_format_for(pairs) == QaFormat::csv ? "csv" : "jsonl");
    c.format = parse_qa_format(format);
    c.split_ratio = data.value("split_ratio", 0.95);
    c.seed = overrides.seed.value_or(file.value("seed", std::uint64_t{0}));
    const std::string out = overrides.out ? overrides.out->string() : file.value("out", std::string("runs"));
    const std::string cache = file.value("cache_dir", std::string(".riskrank-cache"));

    c.embedder = file.value("embedder", json{{"kind", "hash"}, {"dim", 256}, {"seed", 0}});

    json train = file.value("train", json::object());
    const std::string adapter_dir = train.value("adapter_dir", std::string("adapter"));
    train.erase("adapter_dir");
    train["seed"] = c.seed;
    c.train = TrainingConfig::from_json(train);

    json eval = file.value("eval", json::object());
    std::optional<std::string> eval_adapter;
    if (eval.contains("adapter") && !eval["adapter"].is_null()) eval_adapter = eval["adapter"].get<std::string>();
    eval.erase("adapter");
    eval["seed"] = c.seed;
    if (overrides.mode) {
      eval.erase("mode");
      eval["retrieval_mode"] = *overrides.mode;
    }
    if (overrides.k_list) eval["k_list"] = *overrides.k_list;
    c.eval = EvalConfig::from_json(eval);

    const json chunk = file.value("chunk", json::object());
    c.chunk_window = chunk.value("window", c.chunk_window);
    c.chunk_stride = chunk.value("stride", c.chunk_stride);
    c.bench = file.value("bench", json::object());

    c.pairs_path = c.resolve(pairs);
    if (data.contains("documents")) c.documents_path = c.resolve(data["documents"].get<std::string>());
    c.out_dir = overrides.out ? *overrides.out : c.resolve(out);
    c.cache_dir = EmbeddingCache::default_root(c.resolve(cache));
    c.adapter_dir = c.resolve(adapter_dir);
    if (eval_adapter) c.eval_adapter = c.resolve(*eval_adapter);

    c.resolved = {{"data", {{"pairs", pairs}, {"format", format}, {"split_ratio", c.split_ratio}}},
                  {"seed", c.seed},
                  {"embedder", c.embedder},
                  {"train", c.train.to_json()},
                  {"eval", c.eval.to_json()},
                  {"chunk", {{"window", c.chunk_window}, {"stride", c.chunk_stride}}},
                  {"bench", c.bench}};
    if (data.contains("documents")) c.resolved["data"]["documents"] = data["documents"];
    c.resolved["train"]["adapter_dir"] = adapter_dir;
    c.resolved["eval"]["adapter"] = eval_adapter ? json(*eval_adapter) : json(nullptr);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return c;
}

std::shared_ptr<Embedder> make_embedder(const json& spec, const std::filesystem::path& cache_dir, std::size_t jobs) {
  try {
    const std::string kind = spec.value("kind", std::string("hash"));
    if (kind == "hash") {
      return std::make_shared<HashEmbedder>(spec.value("dim", std::size_t{256}), spec.value("seed", std::uint64_t{0}));
    }
    if (kind == "remote") {
      return std::make_shared<RemoteEmbedder>(ProviderConfig::from_json(spec), EmbeddingCache(cache_dir), nullptr,
                                              jobs);
    }
    throw InvalidArgument("unknown embedder kind '" + kind + "' (hash|remote)");
  } catch (const json::exception& e) {
    throw ParseError(std::string("embedder spec: ") + e.what());
  }
}

}  // namespace riskrank
