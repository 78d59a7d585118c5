#include "riskrank/finetune.hpp"

#include <algorithm>
#include <cmath>

#include "riskrank/binio.hpp"
#include "riskrank/embedding_cache.hpp"
#include "riskrank/errors.hpp"
#include "riskrank/prng.hpp"

namespace riskrank {

using nlohmann::json;

AdapterParams AdapterParams::identity(std::size_t dim, bool use_bias) {
  if (dim < 1) throw InvalidArgument("adapter: dim must be >= 1");
  const auto d = static_cast<Eigen::Index>(dim);
  AdapterParams p;
  p.weight = Eigen::MatrixXd::Identity(d, d);
  if (use_bias) p.bias = Eigen::VectorXd::Zero(d);
  return p;
}

void AdapterParams::validate() const {
  if (weight.rows() < 1 || weight.cols() < 1) throw InvalidArgument("adapter: empty weight matrix");
  if (!weight.allFinite()) throw InvalidArgument("adapter: non-finite weight");
  if (bias) {
    if (bias->size() != weight.rows()) throw InvalidArgument("adapter: bias length differs from d_out");
    if (!bias->allFinite()) throw InvalidArgument("adapter: non-finite bias");
  }
}

void TrainingConfig::validate() const {
  if (batch_size < 2) throw InvalidArgument("training: batch_size must be >= 2 (in-batch negatives)");
  if (epochs < 1) throw InvalidArgument("training: epochs must be >= 1");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("training: scale must be > 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("training: learning_rate must be finite and >= 0");
  }
}

json TrainingConfig::to_json() const {
  return {{"batch_size", batch_size}, {"epochs", epochs},   {"learning_rate", learning_rate},
          {"scale", scale},           {"seed", seed},       {"shuffle_each_epoch", shuffle_each_epoch},
          {"use_bias", use_bias}};
}

TrainingConfig TrainingConfig::from_json(const json& j) {
  TrainingConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.scale = j.value("scale", c.scale);
  c.seed = j.value("seed", c.seed);
  c.shuffle_each_epoch = j.value("shuffle_each_epoch", c.shuffle_each_epoch);
  c.use_bias = j.value("use_bias", c.use_bias);
  c.validate();
  return c;
}

void TrainingBatch::validate(std::size_t d_in) const {
  if (queries.rows() != positives.rows()) throw InvalidArgument("batch: query and positive row counts differ");
  if (queries.rows() < 1) throw InvalidArgument("batch: empty");
  if (static_cast<std::size_t>(queries.cols()) != d_in || static_cast<std::size_t>(positives.cols()) != d_in) {
    throw DimensionMismatch("batch: vector dim does not match adapter d_in " + std::to_string(d_in));
  }
}

std::string LossReport::log_jsonl() const {
  std::string out;
  for (const auto& b : batches) {
    out += json{{"epoch", b.epoch}, {"batch", b.batch}, {"loss", b.loss}, {"in_batch_accuracy", b.in_batch_accuracy}}
               .dump();
    out += '\n';
  }
  return out;
}

DenseVector apply_adapter(const AdapterParams& adapter, const DenseVector& v) {
  if (v.dim() != adapter.d_in()) {
    throw DimensionMismatch("apply_adapter: input dim " + std::to_string(v.dim()) + ", adapter d_in " +
                            std::to_string(adapter.d_in()));
  }
  DenseVector out = DenseVector::zeros(adapter.d_out());
  for (std::size_t r = 0; r < adapter.d_out(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < adapter.d_in(); ++c) {
      acc += adapter.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * v.values[c];
    }
    if (adapter.bias) acc += (*adapter.bias)(static_cast<Eigen::Index>(r));
    out.values[r] = static_cast<float>(acc);
  }
  return out;
}

namespace {

struct Forward {
  Eigen::MatrixXd adapted_q, adapted_p;  // rows W x (+ b)
  Eigen::VectorXd norm_q, norm_p;
  Eigen::MatrixXd unit_q, unit_p;
  Eigen::MatrixXd similarity;
};

Forward forward(const AdapterParams& adapter, const TrainingBatch& batch, double scale) {
  batch.validate(adapter.d_in());
  Forward f;
  f.adapted_q = batch.queries * adapter.weight.transpose();
  f.adapted_p = batch.positives * adapter.weight.transpose();
  if (adapter.bias) {
    f.adapted_q.rowwise() += adapter.bias->transpose();
    f.adapted_p.rowwise() += adapter.bias->transpose();
  }
  f.norm_q = f.adapted_q.rowwise().norm();
  f.norm_p = f.adapted_p.rowwise().norm();
  for (Eigen::Index i = 0; i < f.norm_q.size(); ++i) {
    if (f.norm_q(i) == 0.0) throw InvalidArgument("batch_similarity: adapted query " + std::to_string(i) + " has zero norm");
    if (f.norm_p(i) == 0.0) throw InvalidArgument("batch_similarity: adapted positive " + std::to_string(i) + " has zero norm");
  }
  f.unit_q = f.norm_q.cwiseInverse().asDiagonal() * f.adapted_q;
  f.unit_p = f.norm_p.cwiseInverse().asDiagonal() * f.adapted_p;
  f.similarity = scale * (f.unit_q * f.unit_p.transpose());
  return f;
}

void check_square(const Eigen::MatrixXd& s, const char* who) {
  if (s.rows() != s.cols() || s.rows() < 1) throw InvalidArgument(std::string(who) + ": similarity matrix must be square");
  if (!s.allFinite()) throw InvalidArgument(std::string(who) + ": similarity matrix has non-finite entries");
}

// Gradient of u = a / |a| pulled back to a: (g - u (u . g)) / |a|, per row.
Eigen::MatrixXd normalize_backward(const Eigen::MatrixXd& unit, const Eigen::VectorXd& norms,
                                   const Eigen::MatrixXd& grad_unit) {
  const Eigen::VectorXd radial = (unit.array() * grad_unit.array()).rowwise().sum();
  Eigen::MatrixXd g = grad_unit - radial.asDiagonal() * unit;
  return norms.cwiseInverse().asDiagonal() * g;
}

double diagonal_accuracy(const Eigen::MatrixXd& s) {
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    if (s(i, i) >= s.row(i).maxCoeff()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(s.rows());
}

}  // namespace

Eigen::MatrixXd batch_similarity(const AdapterParams& adapter, const TrainingBatch& batch, double scale) {
  return forward(adapter, batch, scale).similarity;
}

double mnr_loss(const Eigen::MatrixXd& s) {
  check_square(s, "mnr_loss");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) sum += std::exp(s(i, j) - m);
    loss += m + std::log(sum) - s(i, i);
  }
  return loss;
}

Eigen::MatrixXd mnr_loss_grad(const Eigen::MatrixXd& s) {
  check_square(s, "mnr_loss_grad");
  Eigen::MatrixXd g(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      g(i, j) = std::exp(s(i, j) - m);
      sum += g(i, j);
    }
    g.row(i) /= sum;
    g(i, i) -= 1.0;
  }
  return g;
}

AdapterGradient mnr_adapter_gradient(const AdapterParams& adapter, const TrainingBatch& batch, double scale) {
  const Forward f = forward(adapter, batch, scale);
  AdapterGradient out;
  out.similarity = f.similarity;
  out.loss = mnr_loss(f.similarity);
  out.in_batch_accuracy = diagonal_accuracy(f.similarity);

  const Eigen::MatrixXd g = mnr_loss_grad(f.similarity);
  const Eigen::MatrixXd grad_unit_q = scale * (g * f.unit_p);
  const Eigen::MatrixXd grad_unit_p = scale * (g.transpose() * f.unit_q);
  const Eigen::MatrixXd grad_q = normalize_backward(f.unit_q, f.norm_q, grad_unit_q);
  const Eigen::MatrixXd grad_p = normalize_backward(f.unit_p, f.norm_p, grad_unit_p);
  out.d_weight = grad_q.transpose() * batch.queries + grad_p.transpose() * batch.positives;
  if (adapter.bias) out.d_bias = grad_q.colwise().sum().transpose() + grad_p.colwise().sum().transpose();
  return out;
}

namespace {

Eigen::RowVectorXd to_row(const DenseVector& v) {
  Eigen::RowVectorXd r(static_cast<Eigen::Index>(v.dim()));
  for (std::size_t i = 0; i < v.dim(); ++i) r(static_cast<Eigen::Index>(i)) = v.values[i];
  return r;
}

TrainedAdapter train_on_vectors(const std::vector<QAPair>& pairs, const std::vector<DenseVector>& questions,
                                const std::vector<DenseVector>& contexts, const TrainingConfig& config,
                                const EpochCallback& on_epoch) {
  config.validate();
  if (pairs.size() < config.batch_size) {
    throw InvalidArgument("train_adapter: " + std::to_string(pairs.size()) + " pairs is fewer than batch_size " +
                          std::to_string(config.batch_size));
  }
  const std::size_t dim = questions.front().dim();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (questions[i].dim() != dim || contexts[i].dim() != dim) {
      throw DimensionMismatch("train_adapter: pair '" + pairs[i].pair_id + "' has inconsistent embedding dims");
    }
  }

  TrainedAdapter out;
  out.config = config;
  out.params = AdapterParams::identity(dim, config.use_bias);
  for (const auto& p : pairs) out.train_pair_ids.insert(p.pair_id);

  Prng rng(config.seed);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (config.shuffle_each_epoch) rng.shuffle(order);

    double loss_sum = 0.0, acc_sum = 0.0;
    std::size_t n_batches = 0, n_rows = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      if (n < 2) break;
      TrainingBatch batch{Eigen::MatrixXd(n, dim), Eigen::MatrixXd(n, dim)};
      for (std::size_t r = 0; r < n; ++r) {
        const std::size_t k = order[start + r];
        if (questions[k].is_zero() || contexts[k].is_zero()) {
          throw InvalidArgument("train_adapter: pair '" + pairs[k].pair_id + "' has an all-zero base embedding");
        }
        batch.queries.row(static_cast<Eigen::Index>(r)) = to_row(questions[k]);
        batch.positives.row(static_cast<Eigen::Index>(r)) = to_row(contexts[k]);
      }
      const auto grad = mnr_adapter_gradient(out.params, batch, config.scale);
      out.params.weight -= config.learning_rate * grad.d_weight;
      if (out.params.bias) *out.params.bias -= config.learning_rate * grad.d_bias;

      ++n_batches;
      n_rows += n;
      loss_sum += grad.loss;
      acc_sum += grad.in_batch_accuracy;
      out.report.batches.push_back({epoch, n_batches, n, grad.loss, grad.in_batch_accuracy});
    }
    out.report.epoch_mean_loss.push_back(loss_sum / static_cast<double>(n_batches));
    out.report.epoch_mean_row_loss.push_back(loss_sum / static_cast<double>(n_rows));
    out.report.epoch_accuracy.push_back(acc_sum / static_cast<double>(n_batches));
    if (on_epoch) on_epoch(epoch, out.params, out.report);
  }
  // Round to the persisted precision so an in-memory adapter and its reload
  // embed identically.
  out.params.weight = out.params.weight.cast<float>().cast<double>();
  if (out.params.bias) *out.params.bias = out.params.bias->cast<float>().cast<double>();
  out.params.validate();
  return out;
}

}  // namespace

TrainedAdapter train_adapter(const std::vector<QAPair>& pairs,
                             const std::function<DenseVector(const std::string&)>& base_embed,
                             const TrainingConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (pairs.empty()) throw InvalidArgument("train_adapter: no pairs");
  std::vector<DenseVector> q, c;
  q.reserve(pairs.size());
  c.reserve(pairs.size());
  for (const auto& p : pairs) {
    q.push_back(base_embed(p.question));
    c.push_back(base_embed(p.context));
  }
  return train_on_vectors(pairs, q, c, config, on_epoch);
}

TrainedAdapter train_adapter(const std::vector<QAPair>& pairs, Embedder& base, const TrainingConfig& config,
                             const EpochCallback& on_epoch) {
  config.validate();
  if (pairs.empty()) throw InvalidArgument("train_adapter: no pairs");
  std::vector<std::string> texts;
  texts.reserve(2 * pairs.size());
  for (const auto& p : pairs) texts.push_back(p.question);
  for (const auto& p : pairs) texts.push_back(p.context);
  auto vecs = base.embed(texts);
  if (vecs.size() != texts.size()) throw InvalidArgument("train_adapter: embedder returned the wrong count");
  std::vector<DenseVector> q(std::make_move_iterator(vecs.begin()),
                             std::make_move_iterator(vecs.begin() + static_cast<std::ptrdiff_t>(pairs.size())));
  std::vector<DenseVector> c(std::make_move_iterator(vecs.begin() + static_cast<std::ptrdiff_t>(pairs.size())),
                             std::make_move_iterator(vecs.end()));
  return train_on_vectors(pairs, q, c, config, on_epoch);
}

double finite_diff_check(const std::function<double(std::span<const double>)>& loss,
                         std::span<const double> params, std::span<const double> analytic_grad, double eps,
                         std::size_t max_coords, std::uint64_t seed) {
  if (!(eps > 0.0)) throw InvalidArgument("finite_diff_check: eps must be > 0");
  if (params.size() != analytic_grad.size()) throw InvalidArgument("finite_diff_check: gradient size mismatch");
  std::vector<std::size_t> coords(params.size());
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  if (max_coords != 0 && max_coords < coords.size()) {
    Prng rng(seed);
    rng.shuffle(coords);
    coords.resize(max_coords);
  }
  std::vector<double> theta(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double orig = theta[i];
    theta[i] = orig + eps;
    const double up = loss(theta);
    theta[i] = orig - eps;
    const double down = loss(theta);
    theta[i] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic_grad[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

namespace {

std::string adapter_bytes(const AdapterParams& p) {
  std::string out;
  out.reserve(4 * (p.d_out() * p.d_in() + (p.bias ? p.d_out() : 0)));
  for (Eigen::Index r = 0; r < p.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.weight.cols(); ++c) binio::append_f32_le(out, static_cast<float>(p.weight(r, c)));
  }
  if (p.bias) {
    for (Eigen::Index r = 0; r < p.bias->size(); ++r) binio::append_f32_le(out, static_cast<float>((*p.bias)(r)));
  }
  return out;
}

}  // namespace

void save_adapter(const std::filesystem::path& dir, const TrainedAdapter& trained, const json& base_description) {
  trained.params.validate();
  const std::string bytes = adapter_bytes(trained.params);
  json meta;
  meta["format"] = "riskrank-adapter/1";
  meta["d_in"] = trained.params.d_in();
  meta["d_out"] = trained.params.d_out();
  meta["use_bias"] = trained.params.use_bias();
  meta["scale"] = trained.config.scale;
  meta["seed"] = trained.config.seed;
  meta["config"] = trained.config.to_json();
  meta["base"] = base_description;
  meta["weights_sha256"] = sha256_hex(bytes);
  meta["epoch_mean_loss"] = trained.report.epoch_mean_loss;
  meta["epoch_eval"] = trained.report.epoch_eval;
  meta["train_pair_ids"] = trained.train_pair_ids;
  std::filesystem::create_directories(dir);
  binio::write_file_atomic(dir / "adapter.bin", bytes);
  binio::write_file_atomic(dir / "adapter.json", meta.dump(2) + "\n");
}

LoadedAdapter load_adapter(const std::filesystem::path& dir) {
  const auto json_path = dir / "adapter.json";
  const auto bin_path = dir / "adapter.bin";
  LoadedAdapter out;
  json meta;
  try {
    meta = json::parse(binio::read_file(json_path));
    const auto d_in = meta.at("d_in").get<std::size_t>();
    const auto d_out = meta.at("d_out").get<std::size_t>();
    const bool use_bias = meta.at("use_bias").get<bool>();
    out.config = TrainingConfig::from_json(meta.at("config"));
    out.train_pair_ids = meta.at("train_pair_ids").get<std::set<std::string>>();
    out.base = meta.value("base", json::object());

    const auto bytes = binio::read_file(bin_path);
    const std::size_t expected = 4 * (d_out * d_in + (use_bias ? d_out : 0));
    if (d_in == 0 || d_out == 0 || bytes.size() != expected) {
      throw CorruptFile(bin_path.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                        std::to_string(bytes.size()));
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    out.params.weight.resize(static_cast<Eigen::Index>(d_out), static_cast<Eigen::Index>(d_in));
    std::size_t k = 0;
    for (std::size_t r = 0; r < d_out; ++r) {
      for (std::size_t c = 0; c < d_in; ++c, ++k) {
        out.params.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = binio::read_f32_le(p + 4 * k);
      }
    }
    if (use_bias) {
      out.params.bias = Eigen::VectorXd(static_cast<Eigen::Index>(d_out));
      for (std::size_t r = 0; r < d_out; ++r, ++k) (*out.params.bias)(static_cast<Eigen::Index>(r)) = binio::read_f32_le(p + 4 * k);
    }
  } catch (const json::exception& e) {
    throw CorruptFile(json_path.string() + ": " + e.what());
  }
  out.params.validate();
  return out;
}

AdaptedEmbedder::AdaptedEmbedder(std::shared_ptr<Embedder> base, AdapterParams params,
                                 std::set<std::string> train_pair_ids, std::string label)
    : base_(std::move(base)), params_(std::move(params)), train_ids_(std::move(train_pair_ids)), label_(std::move(label)) {
  if (!base_) throw InvalidArgument("AdaptedEmbedder: base embedder is required");
  params_.validate();
  if (base_->dim() != params_.d_in()) {
    throw DimensionMismatch("AdaptedEmbedder: base dim " + std::to_string(base_->dim()) + ", adapter d_in " +
                            std::to_string(params_.d_in()));
  }
}

std::vector<DenseVector> AdaptedEmbedder::embed(std::span<const std::string> texts) {
  auto base = base_->embed(texts);
  // Renormalizing an already unit-length float vector can move its last
  // bits, so an identity adapter hands the base vectors through untouched.
  const bool identity = params_.d_in() == params_.d_out() &&
                        params_.weight == Eigen::MatrixXd::Identity(params_.weight.rows(), params_.weight.cols()) &&
                        (!params_.bias || (params_.bias->array() == 0.0).all());
  if (identity) return base;
  for (auto& v : base) v = l2_normalize(apply_adapter(params_, v));
  return base;
}

json AdaptedEmbedder::describe() const {
  return {{"kind", "adapter"},
          {"label", label_},
          {"base", base_->describe()},
          {"d_out", params_.d_out()},
          {"weights_sha256", sha256_hex(adapter_bytes(params_))}};
}

}  // namespace riskrank
