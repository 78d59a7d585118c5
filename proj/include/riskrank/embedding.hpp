#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace riskrank {

/// Fixed-dimension float32 embedding. dim() is the value count.
struct DenseVector {
  std::vector<float> values;

  DenseVector() = default;
  explicit DenseVector(std::vector<float> v) : values(std::move(v)) {}
  static DenseVector zeros(std::size_t dim) { return DenseVector(std::vector<float>(dim, 0.0f)); }

  std::size_t dim() const noexcept { return values.size(); }
  bool all_finite() const noexcept;
  bool is_zero() const noexcept;
  double norm() const noexcept;

  friend bool operator==(const DenseVector&, const DenseVector&) = default;
};

/// Lowercases ASCII letters and splits on every non-alphanumeric byte.
/// Bytes >= 0x80 are treated as separators, so only ASCII words survive.
std::vector<std::string> tokenize(std::string_view text);

/// Signed feature hashing of a token list into `dim` buckets, L2-normalized
/// unless every bucket cancels to zero.
DenseVector hash_embed(std::span<const std::string> tokens, std::size_t dim, std::uint64_t seed);

/// Seeded 64-bit token hash used by hash_embed (FNV-1a with a splitmix64
/// finalizer). Exposed for tests.
std::uint64_t token_hash(std::string_view token, std::uint64_t seed) noexcept;

/// Unit-norm copy of `v`; an all-zero vector comes back unchanged.
/// Throws InvalidArgument on a non-finite component.
DenseVector l2_normalize(const DenseVector& v);

/// Cosine similarity accumulated in double, 0 when either side is all-zero.
/// Throws DimensionMismatch when dims differ.
double cosine(const DenseVector& u, const DenseVector& v);

double dot(std::span<const float> u, std::span<const float> v) noexcept;

/// Same arithmetic as cosine() on raw spans of equal length.
double cosine(std::span<const float> u, std::span<const float> v) noexcept;

/// Text-to-vector model. Implementations are deterministic for a fixed
/// configuration; `describe()` is recorded in evaluation fingerprints.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<DenseVector> embed(std::span<const std::string> texts) = 0;
  virtual nlohmann::json describe() const = 0;

  /// Pair ids an embedder was trained on, or nullptr for untrained models.
  virtual const std::set<std::string>* training_pair_ids() const { return nullptr; }

  DenseVector embed_one(const std::string& text);
};

/// Deterministic local stand-in for a frozen base encoder.
class HashEmbedder final : public Embedder {
 public:
  HashEmbedder(std::size_t dim, std::uint64_t seed);
  std::size_t dim() const override { return dim_; }
  std::vector<DenseVector> embed(std::span<const std::string> texts) override;
  nlohmann::json describe() const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

}  // namespace riskrank
