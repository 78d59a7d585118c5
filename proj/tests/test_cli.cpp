#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "riskrank/cli.hpp"
#include "riskrank/config.hpp"
#include "riskrank/errors.hpp"
#include "support.hpp"

using namespace riskrank;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "riskrank");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<fs::path> run_dirs(const fs::path& root) {
  std::vector<fs::path> dirs;
  if (!fs::exists(root)) return dirs;
  for (const auto& e : fs::directory_iterator(root)) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

std::string digest_line(const std::string& out) {
  const auto pos = out.find("config-digest: ");
  REQUIRE(pos != std::string::npos);
  return out.substr(pos, out.find('\n', pos) - pos);
}

}  // namespace

TEST_CASE("help and usage errors") {
  const auto help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("synth") != std::string::npos);
  CHECK(run({}).code == 1);
  const auto missing = run({"eval"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("--config") != std::string::npos);
  CHECK(run({"eval", "--bogus-flag"}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"eval", "--mode", "sparse", "-c", "x.json"}).code == 1);
}

TEST_CASE("runtime errors are one prefixed line") {
  TempDir dir("cli-err");
  const auto r = run({"eval", "-c", (dir / "nope.json").string()});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("riskrank: error[io]: ", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

TEST_CASE("synth, train, eval, bench end to end") {
  TempDir dir("cli-e2e");
  const auto data = dir / "data";
  REQUIRE(run({"synth", "--clusters", "5", "--pairs", "100", "--seed", "7", "-o", data.string()}).code == 0);
  CHECK(fs::exists(data / "pairs.jsonl"));
  CHECK(fs::exists(data / "documents.jsonl"));
  const auto cfg = (data / "config.json").string();

  const auto train = run({"train", "-c", cfg});
  REQUIRE_MESSAGE(train.code == 0, train.err);
  CHECK(train.out.find("config-digest: ") != std::string::npos);
  CHECK(fs::exists(data / "adapter" / "adapter.bin"));
  CHECK(fs::exists(data / "adapter" / "train_log.jsonl"));

  const auto eval = run({"eval", "-c", cfg});
  REQUIRE_MESSAGE(eval.code == 0, eval.err);
  auto dirs = run_dirs(data / "runs");
  REQUIRE(dirs.size() == 1);
  for (const char* f : {"report.json", "report.md", "plotdata.csv", "run.jsonl", "qrels.jsonl"}) {
    CHECK_MESSAGE(fs::exists(dirs[0] / f), f);
  }
  const auto report = nlohmann::json::parse(testsupport::read_text(dirs[0] / "report.json"));
  CHECK(report.at("finetuned").at("aggregate").at("MRR@10").get<double>() >
        report.at("base").at("aggregate").at("MRR@10").get<double>());

  const auto bench = run({"bench", "-c", cfg});
  REQUIRE_MESSAGE(bench.code == 0, bench.err);
  CHECK(bench.out.find("| System | HR@5 [%] |") != std::string::npos);
  CHECK(run_dirs(data / "runs").size() == 2);

  // seed override changes the digest
  const auto other = run({"eval", "-c", cfg, "--seed", "8", "-o", (dir / "other").string()});
  CHECK(other.code == 2);  // adapter was trained on a different split: leakage
  CHECK(other.err.find("error[leakage]") != std::string::npos);
  CHECK(digest_line(other.out) != digest_line(eval.out));

  const auto lexical = run({"eval", "-c", cfg, "--mode", "lexical", "--k", "1,5,10", "-o", (dir / "lex").string()});
  CHECK_MESSAGE(lexical.code == 0, lexical.err);
  CHECK(digest_line(lexical.out) != digest_line(eval.out));
}

TEST_CASE("ingest, chunk, embed and index") {
  TempDir dir("cli-tools");
  const auto data = dir / "data";
  REQUIRE(run({"synth", "--clusters", "2", "--pairs", "10", "--seed", "1", "-o", data.string()}).code == 0);
  const auto cfg = (data / "config.json").string();

  const auto ingest = run({"ingest", "--input", (data / "pairs.jsonl").string(), "-o", (dir / "ing").string()});
  REQUIRE_MESSAGE(ingest.code == 0, ingest.err);
  CHECK(fs::exists(dir / "ing" / "split.json"));
  CHECK(fs::exists(dir / "ing" / "qrels.jsonl"));

  testsupport::write_text(dir / "bad.jsonl", "{\"question\":\"q\",\"context\":\"c\"}\n{\"context\":\"c\"}\n");
  const auto bad = run({"ingest", "--input", (dir / "bad.jsonl").string(), "-o", (dir / "ing2").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("line 2") != std::string::npos);

  fs::create_directories(dir / "docs");
  testsupport::write_text(dir / "docs" / "a.txt", "one two three four five six seven");
  const auto chunk = run({"chunk", "--docs", (dir / "docs").string(), "--window", "4", "--stride", "2", "-o",
                          (dir / "chunks").string()});
  REQUIRE_MESSAGE(chunk.code == 0, chunk.err);
  const auto chunks = testsupport::read_text(dir / "chunks" / "chunks.jsonl");
  CHECK(std::count(chunks.begin(), chunks.end(), '\n') == 4);  // starts at tokens 0, 2, 4, 6

  const auto embed = run({"embed", "-c", cfg});
  REQUIRE_MESSAGE(embed.code == 0, embed.err);
  CHECK(fs::exists(data / "runs" / "embeddings" / "contexts.vec"));

  const auto index = run({"index", "-c", cfg, "--mode", "hybrid"});
  REQUIRE_MESSAGE(index.code == 0, index.err);
  CHECK(fs::exists(data / "runs" / "index" / "meta.json"));
  const auto chunk_index =
      run({"index", "-c", cfg, "--chunks", (dir / "chunks" / "chunks.jsonl").string(), "-o", (dir / "ci").string()});
  REQUIRE_MESSAGE(chunk_index.code == 0, chunk_index.err);
}

TEST_CASE("config precedence") {
  const nlohmann::json file{{"seed", 3}, {"eval", {{"retrieval_mode", "lexical"}, {"k_list", {1, 2}}}}};
  const auto plain = make_project_config(file, "/base", {});
  CHECK(plain.seed == 3);
  CHECK(plain.eval.mode == RetrievalMode::lexical);
  CHECK(plain.pairs_path == fs::path("/base/pairs.jsonl"));
  ConfigOverrides o;
  o.seed = 5;
  o.mode = "hybrid";
  o.k_list = std::vector<std::size_t>{10};
  const auto over = make_project_config(file, "/base", o);
  CHECK(over.seed == 5);
  CHECK(over.train.seed == 5);
  CHECK(over.eval.mode == RetrievalMode::hybrid);
  CHECK(over.eval.k_list == std::vector<std::size_t>{10});
  CHECK(over.digest() != plain.digest());
  CHECK(make_project_config(file, "/elsewhere", {}).digest() == plain.digest());
  const auto defaults = make_project_config(nlohmann::json::object(), "/b", {});
  CHECK(defaults.eval.mode == RetrievalMode::dense);
  CHECK(defaults.embedder.at("dim") == 256);
}
