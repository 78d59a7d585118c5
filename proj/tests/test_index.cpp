#include <cmath>

#include "doctest.h"
#include "riskrank/errors.hpp"
#include "riskrank/index.hpp"
#include "support.hpp"

using namespace riskrank;
using testsupport::TempDir;

namespace {

DenseVector random_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<float> dist;
  std::vector<float> v(dim);
  for (auto& x : v) x = dist(rng);
  return DenseVector(v);
}

/// Brute-force ranking: cosine against every item, full sort with the
/// (score desc, id asc) order.
std::vector<std::pair<std::string, double>> brute_force(const std::vector<std::string>& ids,
                                                        const std::vector<DenseVector>& vecs,
                                                        const DenseVector& q, std::size_t k) {
  std::vector<std::pair<std::string, double>> all;
  for (std::size_t i = 0; i < ids.size(); ++i) all.emplace_back(ids[i], cosine(q, l2_normalize(vecs[i])));
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

}  // namespace

TEST_CASE("dense index shape and edge cases") {
  const auto idx = DenseIndex::build({"a", "b", "c"}, {DenseVector({1, 0, 0, 0}), DenseVector({0, 2, 0, 0}),
                                                      DenseVector({0, 0, 0, 0})});
  CHECK(idx.size() == 3);
  CHECK(idx.dim() == 4);
  CHECK(idx.matrix().size() == 12);

  const auto hit = dense_search(idx, DenseVector({0, 1, 0, 0}), 3, "q");
  CHECK(hit.hits[0].item_id == "b");
  CHECK(hit.hits[0].score == 1.0);
  CHECK(hit.hits[0].rank == 1);
  for (const auto& h : hit.hits) {
    if (h.item_id == "c") CHECK(h.score == 0.0);
  }
  CHECK(is_well_formed(hit));

  const DenseIndex empty = DenseIndex::build({}, {});
  CHECK(dense_search(empty, DenseVector({1, 0}), 5).hits.empty());

  CHECK_THROWS_AS(DenseIndex::build({"a", "a"}, {DenseVector({1}), DenseVector({1})}), InvalidArgument);
  CHECK_THROWS_AS(DenseIndex::build({"a", "b"}, {DenseVector({1}), DenseVector({1, 0})}), DimensionMismatch);
  CHECK_THROWS_AS(dense_search(idx, DenseVector({1, 0}), 3), DimensionMismatch);
}

TEST_CASE("identical vectors tie by item id") {
  const auto idx = DenseIndex::build({"zeta", "alpha"}, {DenseVector({1, 1}), DenseVector({1, 1})});
  const auto r = dense_search(idx, DenseVector({1, 0}), 2);
  REQUIRE(r.hits.size() == 2);
  CHECK(r.hits[0].item_id == "alpha");
  CHECK(r.hits[1].item_id == "zeta");
}

TEST_CASE("dense search equals brute force") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 50, dim = 8;
    std::vector<std::string> ids;
    std::vector<DenseVector> vecs;
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back("item" + std::to_string(rng() % 1000000));
      vecs.push_back(random_vector(rng, dim));
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    vecs.resize(ids.size());
    const auto idx = DenseIndex::build(ids, vecs);
    const auto q = random_vector(rng, dim);
    const auto got = dense_search(idx, q, 10);
    const auto want = brute_force(ids, vecs, q, 10);
    REQUIRE(got.hits.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(got.hits[i].item_id == want[i].first);
      CHECK(got.hits[i].score == want[i].second);
    }
  }
}

namespace {

LexicalIndex small_corpus() { return LexicalIndex::build({"d1", "d2"}, {"risk capital risk", "capital"}); }

}  // namespace

TEST_CASE("bm25 hand example") {
  const auto idx = small_corpus();
  const std::vector<std::string> risk{"risk"};
  const double expected = std::log(2.0) * (2.0 * 2.2) / (2.0 + 1.2 * (0.25 + 0.75 * 3.0 / 2.0));
  CHECK(bm25_score(idx, risk, "d1") == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::fabs(bm25_score(idx, risk, "d1") - 0.8355) < 1e-4);
  CHECK(bm25_score(idx, risk, "d2") == 0.0);
  CHECK(bm25_score(idx, {}, "d1") == 0.0);
  CHECK_THROWS_AS(bm25_score(idx, risk, "d9"), InvalidArgument);
}

TEST_CASE("lexical search") {
  const auto idx = small_corpus();
  CHECK(lexical_search(idx, "liquidity", 10).hits.empty());
  CHECK(lexical_search(idx, "", 10).hits.empty());
  const auto r = lexical_search(idx, "capital", 10);
  REQUIRE(r.hits.size() == 2);
  CHECK(r.hits[0].item_id == "d2");

  std::mt19937_64 rng(4);
  std::vector<std::string> ids, texts;
  for (int i = 0; i < 40; ++i) {
    std::string t;
    for (int w = 0; w < 3 + static_cast<int>(rng() % 12); ++w) t += "w" + std::to_string(rng() % 15) + " ";
    ids.push_back("doc" + std::to_string(i));
    texts.push_back(t);
  }
  const auto big = LexicalIndex::build(ids, texts);
  for (int trial = 0; trial < 50; ++trial) {
    std::string q = "w" + std::to_string(rng() % 17) + " w" + std::to_string(rng() % 17);
    if (trial % 3 == 0) q += " w3 w3";
    const auto terms = tokenize(q);
    std::vector<std::pair<std::string, double>> oracle;
    for (const auto& id : ids) {
      const double s = bm25_score(big, terms, id);
      if (s != 0.0) oracle.emplace_back(id, s);
    }
    const auto want = rank_scored("q", oracle, 10);
    const auto got = lexical_search(big, q, 10, "q");
    CHECK(got == want);
  }

  // a repeated term counts twice
  const std::vector<std::string> once{"risk"}, twice{"risk", "risk"};
  CHECK(bm25_score(idx, twice, "d1") == 2.0 * bm25_score(idx, once, "d1"));
}

TEST_CASE("rrf") {
  const RankedList a{"q", {{"x", 0.9, 1}, {"y", 0.5, 2}, {"z", 0.1, 3}}};
  const RankedList b{"q", {{"x", 7.0, 1}, {"w", 3.0, 2}}};
  const std::vector<RankedList> both{a, b};
  const auto fused = rrf_fuse(both, 60);
  CHECK(fused.hits[0].item_id == "x");
  CHECK(fused.hits[0].score == doctest::Approx(2.0 / 61.0).epsilon(1e-15));
  for (const auto& h : fused.hits) {
    if (h.item_id == "z") CHECK(h.score == doctest::Approx(1.0 / 63.0).epsilon(1e-15));
  }
  CHECK(fused.hits.size() == 4);
  CHECK(is_well_formed(fused));

  const std::vector<RankedList> mismatch{a, RankedList{"other", {}}};
  CHECK_THROWS_AS(rrf_fuse(mismatch), InvalidArgument);
}

TEST_CASE("rrf matches brute-force fusion") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<RankedList> lists(2, RankedList{"q", {}});
    std::map<std::string, double> oracle;
    for (auto& l : lists) {
      std::vector<std::string> items;
      for (int i = 0; i < 30; ++i) items.push_back("i" + std::to_string(i));
      std::shuffle(items.begin(), items.end(), rng);
      const std::size_t len = rng() % 30;
      for (std::size_t r = 0; r < len; ++r) {
        l.hits.push_back({items[r], static_cast<double>(len - r), r + 1});
        oracle[items[r]] += 1.0 / (60.0 + static_cast<double>(r + 1));
      }
    }
    std::vector<std::pair<std::string, double>> scored(oracle.begin(), oracle.end());
    const auto want = rank_scored("q", scored, 0);
    const auto got = rrf_fuse(lists, 60);
    REQUIRE(got.hits.size() == want.hits.size());
    for (std::size_t i = 0; i < want.hits.size(); ++i) {
      CHECK(got.hits[i].item_id == want.hits[i].item_id);
      CHECK(got.hits[i].score == doctest::Approx(want.hits[i].score).epsilon(1e-14));
    }
  }
}

TEST_CASE("rerank hooks") {
  const RankedList in{"q", {{"a", 3.0, 1}, {"b", 2.0, 2}, {"c", 1.0, 3}}};
  CHECK(rerank(RerankRegistry::global().get("identity"), "text", in) == in);
  CHECK(rerank(RerankRegistry::global().get("none"), "text", in) == in);

  const RerankHook reverse = [](const std::string&, const RankedList& c) {
    RankedList out{c.query_id, {}};
    double score = static_cast<double>(c.hits.size());
    for (auto it = c.hits.rbegin(); it != c.hits.rend(); ++it) out.hits.push_back({it->item_id, score--, 0});
    return out;
  };
  const auto rev = rerank(reverse, "text", in);
  CHECK(rev.hits[0].item_id == "c");
  CHECK(rev.hits[0].rank == 1);
  CHECK(rev.hits[2].item_id == "a");
  CHECK(rev.hits[2].rank == 3);

  const RerankHook dropper = [](const std::string&, const RankedList& c) {
    RankedList out = c;
    out.hits.pop_back();
    return out;
  };
  CHECK_THROWS_AS(rerank(dropper, "text", in), ContractError);
  const RerankHook unsorted = [](const std::string&, const RankedList& c) {
    RankedList out = c;
    std::swap(out.hits[0], out.hits[1]);
    return out;
  };
  CHECK_THROWS_AS(rerank(unsorted, "text", in), ContractError);
  CHECK_THROWS_AS(RerankRegistry::global().get("no-such-hook"), InvalidArgument);
}

TEST_CASE("run files round trip") {
  const std::vector<RankedList> runs{{"q1", {{"a", 0.5, 1}, {"b", 0.25, 2}}}, {"q2", {}}};
  CHECK(parse_runs_jsonl(runs_to_jsonl(runs)) == runs);
}

TEST_CASE("index persistence") {
  TempDir dir("index");
  std::mt19937_64 rng(2);
  std::vector<std::string> ids{"a", "b", "c"};
  std::vector<DenseVector> vecs{random_vector(rng, 5), random_vector(rng, 5), random_vector(rng, 5)};
  const auto dense = DenseIndex::build(ids, vecs);
  const auto lexical = LexicalIndex::build(ids, {"risk capital", "capital buffer buffer", "liquidity"});
  save_index(dir.path(), &dense, &lexical, {{"note", "x"}});
  const auto loaded = load_index(dir.path());
  REQUIRE(loaded.dense.has_value());
  REQUIRE(loaded.lexical.has_value());
  CHECK(loaded.dense->matrix() == dense.matrix());
  CHECK(loaded.dense->item_ids() == ids);
  const auto q = random_vector(rng, 5);
  CHECK(dense_search(*loaded.dense, q, 3) == dense_search(dense, q, 3));
  CHECK(lexical_search(*loaded.lexical, "capital buffer", 3) == lexical_search(lexical, "capital buffer", 3));
  CHECK(loaded.meta.at("extra").at("note") == "x");

  auto bytes = testsupport::read_text(dir / "vectors.bin");
  testsupport::write_text(dir / "vectors.bin", bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_index(dir.path()), CorruptFile);
}
