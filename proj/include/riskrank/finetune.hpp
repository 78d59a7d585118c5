#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskrank/corpus.hpp"
#include "riskrank/embedding.hpp"

namespace riskrank {

/// Trainable linear map over frozen base embeddings: y = W x (+ b).
/// Held in double; persisted as float32.
struct AdapterParams {
  Eigen::MatrixXd weight;               // d_out x d_in
  std::optional<Eigen::VectorXd> bias;  // d_out, present iff use_bias

  static AdapterParams identity(std::size_t dim, bool use_bias = false);

  std::size_t d_in() const noexcept { return static_cast<std::size_t>(weight.cols()); }
  std::size_t d_out() const noexcept { return static_cast<std::size_t>(weight.rows()); }
  bool use_bias() const noexcept { return bias.has_value(); }
  /// Throws InvalidArgument on empty dims, a wrong-sized bias or non-finite entries.
  void validate() const;
};

struct TrainingConfig {
  std::size_t batch_size = 12;
  std::size_t epochs = 2;
  double learning_rate = 0.05;
  double scale = 20.0;  // similarity multiplier used inside the loss only
  std::uint64_t seed = 0;
  bool shuffle_each_epoch = true;
  bool use_bias = false;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults.
  static TrainingConfig from_json(const nlohmann::json& j);
};

/// Row i of `queries` pairs with row i of `positives`.
struct TrainingBatch {
  Eigen::MatrixXd queries;
  Eigen::MatrixXd positives;

  std::size_t size() const noexcept { return static_cast<std::size_t>(queries.rows()); }
  void validate(std::size_t d_in) const;
};

struct BatchLog {
  std::size_t epoch = 0;  // 1-based
  std::size_t batch = 0;  // 1-based within the epoch
  std::size_t rows = 0;
  double loss = 0.0;      // summed over rows
  double in_batch_accuracy = 0.0;
};

struct LossReport {
  std::vector<BatchLog> batches;
  std::vector<double> epoch_mean_loss;      // mean of summed batch losses
  std::vector<double> epoch_mean_row_loss;  // loss per pair, comparable across batch sizes
  std::vector<double> epoch_accuracy;
  /// Filled by an epoch callback, e.g. held-out MRR@10 after each epoch.
  std::vector<double> epoch_eval;

  std::string log_jsonl() const;
};

DenseVector apply_adapter(const AdapterParams& adapter, const DenseVector& v);

/// S[i][j] = scale * cos(W q_i, W p_j). Throws InvalidArgument when an
/// adapted vector has zero norm.
Eigen::MatrixXd batch_similarity(const AdapterParams& adapter, const TrainingBatch& batch, double scale);

/// Multiple negatives ranking loss, summed over rows:
///   L = sum_i [ logsumexp_j S[i][j] - S[i][i] ]
/// i.e. each row's softmax cross-entropy against its diagonal, where the
/// off-diagonal entries act as the in-batch negatives.
double mnr_loss(const Eigen::MatrixXd& similarity);

/// dL/dS = softmax_row(S) - I.
Eigen::MatrixXd mnr_loss_grad(const Eigen::MatrixXd& similarity);

struct AdapterGradient {
  double loss = 0.0;
  double in_batch_accuracy = 0.0;
  Eigen::MatrixXd similarity;
  Eigen::MatrixXd d_weight;
  Eigen::VectorXd d_bias;  // empty when the adapter has no bias
};

/// Loss and its gradient with respect to the adapter, backpropagated through
/// the scale, the row normalization and the linear map.
AdapterGradient mnr_adapter_gradient(const AdapterParams& adapter, const TrainingBatch& batch, double scale);

using EpochCallback = std::function<void(std::size_t epoch, const AdapterParams& adapter, LossReport& report)>;

struct TrainedAdapter {
  AdapterParams params;
  LossReport report;
  TrainingConfig config;
  std::set<std::string> train_pair_ids;
};

/// Gradient-descent training of an identity-initialized adapter on in-batch
/// negatives. Batches follow a seeded shuffle each epoch; a trailing batch of
/// one pair is dropped since it has no negatives. Final weights are rounded
/// to float32, the precision save_adapter() writes.
TrainedAdapter train_adapter(const std::vector<QAPair>& pairs,
                             const std::function<DenseVector(const std::string&)>& base_embed,
                             const TrainingConfig& config, const EpochCallback& on_epoch = {});
/// Same, embedding all questions and contexts in one call to `base`.
TrainedAdapter train_adapter(const std::vector<QAPair>& pairs, Embedder& base, const TrainingConfig& config,
                             const EpochCallback& on_epoch = {});

/// Max relative error between `analytic_grad` and central differences of
/// `loss` over `max_coords` sampled coordinates (0 = all). Relative error is
/// |a - n| / max(|a|, |n|, 1e-8).
double finite_diff_check(const std::function<double(std::span<const double>)>& loss,
                         std::span<const double> params, std::span<const double> analytic_grad, double eps,
                         std::size_t max_coords = 0, std::uint64_t seed = 0);

/// adapter.json (dims, config, training pair ids, base model) + adapter.bin
/// (row-major float32 LE weight, then bias).
void save_adapter(const std::filesystem::path& dir, const TrainedAdapter& trained,
                  const nlohmann::json& base_description);

struct LoadedAdapter {
  AdapterParams params;
  TrainingConfig config;
  std::set<std::string> train_pair_ids;
  nlohmann::json base;
};
LoadedAdapter load_adapter(const std::filesystem::path& dir);

/// Base embedder followed by the adapter and L2 normalization.
class AdaptedEmbedder final : public Embedder {
 public:
  AdaptedEmbedder(std::shared_ptr<Embedder> base, AdapterParams params, std::set<std::string> train_pair_ids,
                  std::string label = "adapter");

  std::size_t dim() const override { return params_.d_out(); }
  std::vector<DenseVector> embed(std::span<const std::string> texts) override;
  nlohmann::json describe() const override;
  const std::set<std::string>* training_pair_ids() const override { return &train_ids_; }

 private:
  std::shared_ptr<Embedder> base_;
  AdapterParams params_;
  std::set<std::string> train_ids_;
  std::string label_;
};

}  // namespace riskrank
