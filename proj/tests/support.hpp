#pragma once

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "riskrank/corpus.hpp"
#include "riskrank/index.hpp"

namespace testsupport {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("riskrank-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Reference metric implementations, written per-definition and kept
// separate from the library code.
namespace naive {

inline double rr(const std::vector<std::string>& ranking, const std::set<std::string>& rel, std::size_t k) {
  for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
    if (rel.count(ranking[i])) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

inline double ap(const std::vector<std::string>& ranking, const std::set<std::string>& rel, std::size_t k) {
  if (rel.empty()) return 0.0;
  std::vector<double> precisions;
  std::size_t found = 0;
  for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
    if (rel.count(ranking[i])) {
      ++found;
      precisions.push_back(static_cast<double>(found) / static_cast<double>(i + 1));
    }
  }
  double sum = 0.0;
  for (double p : precisions) sum += p;
  return sum / static_cast<double>(std::min(rel.size(), k));
}

inline double ndcg(const std::vector<std::string>& ranking, const std::set<std::string>& rel, std::size_t k) {
  double dcg = 0.0, ideal = 0.0;
  for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
    if (rel.count(ranking[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  for (std::size_t i = 0; i < std::min(rel.size(), k); ++i) ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return ideal == 0.0 ? 0.0 : dcg / ideal;
}

inline double hit(const std::vector<std::string>& ranking, const std::set<std::string>& rel, std::size_t k) {
  for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
    if (rel.count(ranking[i])) return 1.0;
  }
  return 0.0;
}

}  // namespace naive

/// Random run over a 300-item universe with up to `max_len` hits and up to
/// `max_rel` relevant items per query.
struct RandomInstance {
  std::vector<riskrank::RankedList> run;
  riskrank::Qrels qrels;
};

inline RandomInstance random_instance(std::mt19937_64& rng, std::size_t max_len, std::size_t max_rel) {
  RandomInstance inst;
  const std::size_t queries = 1 + rng() % 5;
  for (std::size_t q = 0; q < queries; ++q) {
    const std::string qid = "q" + std::to_string(q);
    std::vector<std::string> universe;
    for (int i = 0; i < 300; ++i) universe.push_back("d" + std::to_string(i));
    std::shuffle(universe.begin(), universe.end(), rng);
    const std::size_t len = rng() % (max_len + 1);
    riskrank::RankedList list{qid, {}};
    for (std::size_t i = 0; i < len; ++i) {
      list.hits.push_back({universe[i], static_cast<double>(len - i), i + 1});
    }
    std::shuffle(universe.begin(), universe.end(), rng);
    const std::size_t nrel = 1 + rng() % max_rel;
    std::set<std::string> rel(universe.begin(), universe.begin() + static_cast<long>(nrel));
    inst.qrels[qid] = rel;
    inst.run.push_back(std::move(list));
  }
  return inst;
}

}  // namespace testsupport
