#pragma once

#include <random>
#include <span>
#include <vector>

#include "riskrank/finetune.hpp"

namespace testsupport {

inline riskrank::TrainingBatch random_batch(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> dist;
  riskrank::TrainingBatch b{Eigen::MatrixXd(n, d), Eigen::MatrixXd(n, d)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      b.queries(i, j) = dist(rng);
      b.positives(i, j) = b.queries(i, j) + 0.5 * dist(rng);
    }
  }
  return b;
}

inline riskrank::AdapterParams random_adapter(std::mt19937_64& rng, std::size_t d, bool bias) {
  std::normal_distribution<double> dist;
  auto p = riskrank::AdapterParams::identity(d, bias);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) p.weight(r, c) += 0.3 * dist(rng);
  }
  if (bias) {
    for (std::size_t r = 0; r < d; ++r) (*p.bias)(r) = 0.1 * dist(rng);
  }
  return p;
}

/// Row-major weight entries followed by the bias.
inline std::vector<double> flatten(const Eigen::MatrixXd& w, const Eigen::VectorXd* b) {
  std::vector<double> out;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) out.push_back(w(r, c));
  }
  if (b) {
    for (Eigen::Index r = 0; r < b->size(); ++r) out.push_back((*b)(r));
  }
  return out;
}

inline riskrank::AdapterParams unflatten(std::span<const double> theta, std::size_t d, bool bias) {
  auto p = riskrank::AdapterParams::identity(d, bias);
  std::size_t i = 0;
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) p.weight(r, c) = theta[i++];
  }
  if (bias) {
    for (std::size_t r = 0; r < d; ++r) (*p.bias)(r) = theta[i++];
  }
  return p;
}

/// Max relative error of the analytic adapter gradient against central
/// differences of the loss.
inline double gradient_error(const riskrank::AdapterParams& p, const riskrank::TrainingBatch& batch, double scale,
                             double eps) {
  const std::size_t d = p.d_in();
  const bool bias = p.use_bias();
  const auto g = riskrank::mnr_adapter_gradient(p, batch, scale);
  const auto theta = flatten(p.weight, bias ? &*p.bias : nullptr);
  const auto grad = flatten(g.d_weight, bias ? &g.d_bias : nullptr);
  const auto loss = [&](std::span<const double> t) {
    return riskrank::mnr_loss(riskrank::batch_similarity(unflatten(t, d, bias), batch, scale));
  };
  return riskrank::finite_diff_check(loss, theta, grad, eps);
}

}  // namespace testsupport
