#include "riskrank/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "riskrank/errors.hpp"

namespace riskrank {

bool DenseVector::all_finite() const noexcept {
  for (float v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

bool DenseVector::is_zero() const noexcept {
  for (float v : values)
    if (v != 0.0f) return false;
  return true;
}

double DenseVector::norm() const noexcept { return std::sqrt(dot(values, values)); }

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    const bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (alnum) {
      current.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::uint64_t token_hash(std::string_view token, std::uint64_t seed) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull ^ seed;
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  // splitmix64 finalizer
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

DenseVector hash_embed(std::span<const std::string> tokens, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw InvalidArgument("hash_embed: dim must be >= 1");
  std::vector<double> acc(dim, 0.0);
  for (const auto& t : tokens) {
    const std::uint64_t h = token_hash(t, seed);
    acc[h % dim] += (h >> 63) ? -1.0 : 1.0;
  }
  double sq = 0.0;
  for (double a : acc) sq += a * a;
  DenseVector out = DenseVector::zeros(dim);
  if (sq == 0.0) return out;
  const double n = std::sqrt(sq);
  for (std::size_t i = 0; i < dim; ++i) out.values[i] = static_cast<float>(acc[i] / n);
  return out;
}

double dot(std::span<const float> u, std::span<const float> v) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return s;
}

DenseVector l2_normalize(const DenseVector& v) {
  if (!v.all_finite()) throw InvalidArgument("l2_normalize: non-finite component");
  const double n = v.norm();
  if (n == 0.0) return v;
  DenseVector out = DenseVector::zeros(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) out.values[i] = static_cast<float>(v.values[i] / n);
  return out;
}

double cosine(std::span<const float> u, std::span<const float> v) noexcept {
  const double nu = dot(u, u);
  const double nv = dot(v, v);
  if (nu == 0.0 || nv == 0.0) return 0.0;
  const double c = dot(u, v) / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

double cosine(const DenseVector& u, const DenseVector& v) {
  if (u.dim() != v.dim()) {
    throw DimensionMismatch("cosine: dims " + std::to_string(u.dim()) + " vs " + std::to_string(v.dim()));
  }
  return cosine(std::span<const float>(u.values), std::span<const float>(v.values));
}

DenseVector Embedder::embed_one(const std::string& text) {
  auto out = embed(std::span<const std::string>(&text, 1));
  return std::move(out.at(0));
}

HashEmbedder::HashEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw InvalidArgument("HashEmbedder: dim must be >= 1");
}

std::vector<DenseVector> HashEmbedder::embed(std::span<const std::string> texts) {
  std::vector<DenseVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(hash_embed(tokenize(t), dim_, seed_));
  return out;
}

nlohmann::json HashEmbedder::describe() const {
  return {{"kind", "hash"}, {"dim", dim_}, {"seed", seed_}};
}

}  // namespace riskrank
