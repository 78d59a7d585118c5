#include <cmath>

#include "doctest.h"
#include "finetune_support.hpp"
#include "riskrank/errors.hpp"
#include "riskrank/finetune.hpp"
#include "support.hpp"

using namespace riskrank;
using testsupport::TempDir;

TEST_CASE("apply_adapter") {
  const DenseVector v({0.5f, -1.0f, 2.0f});
  CHECK(apply_adapter(AdapterParams::identity(3), v) == v);
  auto two = AdapterParams::identity(3);
  two.weight *= 2.0;
  CHECK(apply_adapter(two, v) == DenseVector({1.0f, -2.0f, 4.0f}));
  std::mt19937_64 rng(1);
  const auto w = testsupport::random_adapter(rng, 3, false);
  const auto col = apply_adapter(w, DenseVector({1.0f, 0.0f, 0.0f}));
  for (int r = 0; r < 3; ++r) CHECK(col.values[r] == static_cast<float>(w.weight(r, 0)));
  CHECK_THROWS_AS(apply_adapter(w, DenseVector({1.0f})), DimensionMismatch);
}

TEST_CASE("batch_similarity") {
  std::mt19937_64 rng(2);
  const auto one = testsupport::random_batch(rng, 1, 4);
  const auto s1 = batch_similarity(AdapterParams::identity(4), one, 3.0);
  REQUIRE(s1.rows() == 1);
  const Eigen::VectorXd q = one.queries.row(0), p0 = one.positives.row(0);
  CHECK(s1(0, 0) == doctest::Approx(3.0 * q.dot(p0) / (q.norm() * p0.norm())).epsilon(1e-12));

  auto same = testsupport::random_batch(rng, 5, 6);
  same.positives = same.queries;
  const auto diag = batch_similarity(AdapterParams::identity(6), same, 1.0);
  for (int i = 0; i < 5; ++i) CHECK(diag(i, i) == doctest::Approx(1.0).epsilon(1e-12));

  const auto batch = testsupport::random_batch(rng, 6, 5);
  const auto p = testsupport::random_adapter(rng, 5, true);
  const auto s = batch_similarity(p, batch, 20.0);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      std::vector<float> a(5), b(5);
      const Eigen::VectorXd ya = p.weight * batch.queries.row(i).transpose() + *p.bias;
      const Eigen::VectorXd yb = p.weight * batch.positives.row(j).transpose() + *p.bias;
      for (int k = 0; k < 5; ++k) {
        a[k] = static_cast<float>(ya(k));
        b[k] = static_cast<float>(yb(k));
      }
      CHECK(s(i, j) == doctest::Approx(20.0 * cosine(DenseVector(a), DenseVector(b))).epsilon(1e-5));
    }
  }
}

TEST_CASE("mnr loss values") {
  CHECK(mnr_loss(Eigen::MatrixXd::Constant(1, 1, 4.2)) == 0.0);
  CHECK(mnr_loss(Eigen::MatrixXd::Constant(2, 2, 0.7)) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  Eigen::MatrixXd s(2, 2);
  s << 2, 0, 0, 2;
  CHECK(std::fabs(mnr_loss(s) - 2.0 * std::log1p(std::exp(-2.0))) < 1e-9);
  CHECK(std::fabs(mnr_loss(s) - 0.253856) < 1e-6);
  Eigen::MatrixXd big(2, 2);
  big << 1000, 0, 0, 1000;
  CHECK(std::isfinite(mnr_loss(big)));
  CHECK_THROWS_AS(mnr_loss(Eigen::MatrixXd(2, 3)), InvalidArgument);
}

TEST_CASE("mnr loss gradient with respect to similarities") {
  const auto g = mnr_loss_grad(Eigen::MatrixXd::Constant(2, 2, 1.0));
  CHECK(g(0, 0) == doctest::Approx(-0.5));
  CHECK(g(0, 1) == doctest::Approx(0.5));
  CHECK(g(1, 0) == doctest::Approx(0.5));
  CHECK(g(1, 1) == doctest::Approx(-0.5));

  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist;
  for (int t = 0; t < 10; ++t) {
    Eigen::MatrixXd s(4, 4);
    for (int i = 0; i < 16; ++i) s.data()[i] = 2.0 * dist(rng);
    const auto grad = mnr_loss_grad(s);
    for (int i = 0; i < 4; ++i) CHECK(std::fabs(grad.row(i).sum()) < 1e-12);
    std::vector<double> theta(s.data(), s.data() + 16), an(grad.data(), grad.data() + 16);
    const auto loss = [](std::span<const double> v) {
      return mnr_loss(Eigen::Map<const Eigen::MatrixXd>(v.data(), 4, 4));
    };
    CHECK(finite_diff_check(loss, theta, an, 1e-5) < 1e-6);
  }
}

TEST_CASE("adapter gradient matches finite differences") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 5; ++t) {
    const auto batch = testsupport::random_batch(rng, 8, 16);
    for (bool bias : {false, true}) {
      const auto p = testsupport::random_adapter(rng, 16, bias);
      CHECK(testsupport::gradient_error(p, batch, 20.0, 1e-4) < 1e-4);
      CHECK(testsupport::gradient_error(p, batch, 1.0, 1e-4) < 1e-4);
    }
  }
}

TEST_CASE("too-small step on a float32 loss is dominated by rounding") {
  std::mt19937_64 rng(12);
  const auto batch = testsupport::random_batch(rng, 8, 16);
  const auto p = testsupport::random_adapter(rng, 16, false);
  const auto g = mnr_adapter_gradient(p, batch, 20.0);
  const auto theta = testsupport::flatten(p.weight, nullptr);
  const auto grad = testsupport::flatten(g.d_weight, nullptr);
  const auto loss32 = [&](std::span<const double> t) {
    return static_cast<double>(static_cast<float>(mnr_loss(batch_similarity(testsupport::unflatten(t, 16, false), batch, 20.0))));
  };
  CHECK(finite_diff_check(loss32, theta, grad, 1e-12) > 0.5);
}

namespace {

std::vector<QAPair> synth_pairs() { return synth_dataset(5, 100, 50, 7).pairs; }

}  // namespace

TEST_CASE("training") {
  const auto pairs = synth_pairs();
  HashEmbedder base(256, 0);

  TrainingConfig frozen;
  frozen.learning_rate = 0.0;
  const auto still = train_adapter(pairs, base, frozen);
  CHECK(still.params.weight == Eigen::MatrixXd::Identity(256, 256));

  TrainingConfig cfg;
  cfg.seed = 3;
  const auto a = train_adapter(pairs, base, cfg);
  const auto b = train_adapter(pairs, base, cfg);
  CHECK(a.params.weight == b.params.weight);
  REQUIRE(a.report.epoch_mean_loss.size() == 2);
  CHECK(a.report.epoch_mean_loss[1] < a.report.epoch_mean_loss[0]);
  CHECK(a.train_pair_ids.size() == pairs.size());
  // 500 pairs in batches of 12: 41 full batches and a trailing 8
  CHECK(a.report.batches.size() == 2 * 42);

  std::size_t epochs_seen = 0;
  train_adapter(pairs, base, cfg, [&](std::size_t epoch, const AdapterParams&, LossReport& r) {
    epochs_seen = epoch;
    r.epoch_eval.push_back(0.5);
  });
  CHECK(epochs_seen == 2);

  TrainingConfig bad;
  bad.batch_size = 1;
  CHECK_THROWS_AS(train_adapter(pairs, base, bad), InvalidArgument);
}

TEST_CASE("adapter persistence and adapted embedder") {
  TempDir dir("adapter");
  const auto pairs = synth_pairs();
  auto base = std::make_shared<HashEmbedder>(64, 0);
  TrainingConfig cfg;
  cfg.epochs = 1;
  const auto trained = train_adapter(pairs, *base, cfg);
  save_adapter(dir.path(), trained, base->describe());
  const auto loaded = load_adapter(dir.path());
  CHECK(loaded.params.weight == trained.params.weight);
  CHECK(loaded.train_pair_ids == trained.train_pair_ids);
  CHECK(loaded.base == base->describe());

  AdaptedEmbedder adapted(base, loaded.params, loaded.train_pair_ids, "ft");
  const std::vector<std::string> texts{pairs[0].question};
  const auto v = adapted.embed(texts)[0];
  CHECK(v == l2_normalize(apply_adapter(loaded.params, base->embed(texts)[0])));
  CHECK(adapted.training_pair_ids()->count(pairs[0].pair_id) == 1);

  AdaptedEmbedder identity(base, AdapterParams::identity(64), {}, "id");
  CHECK(identity.embed(texts)[0] == base->embed(texts)[0]);

  auto bytes = testsupport::read_text(dir / "adapter.bin");
  testsupport::write_text(dir / "adapter.bin", bytes.substr(0, 100));
  CHECK_THROWS_AS(load_adapter(dir.path()), CorruptFile);
}

TEST_CASE("finite_diff_check on a quadratic") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> dist;
  std::vector<double> w(30), grad(30);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = dist(rng);
    grad[i] = 2.0 * w[i];
  }
  const auto sq = [](std::span<const double> t) {
    double s = 0;
    for (double x : t) s += x * x;
    return s;
  };
  CHECK(finite_diff_check(sq, w, grad, 1e-3) < 1e-8);
  CHECK(finite_diff_check(sq, w, grad, 1e-3, 5, 1) < 1e-8);
  CHECK_THROWS_AS(finite_diff_check(sq, w, grad, 0.0), InvalidArgument);
}

TEST_CASE("mnr loss is shift invariant") {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> dist;
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd s(6, 6);
    for (int i = 0; i < 36; ++i) s.data()[i] = 5.0 * dist(rng);
    const double c = 10.0 * dist(rng);
    CHECK(std::fabs(mnr_loss(s) - mnr_loss((s.array() + c).matrix())) < 1e-9);
  }
}
