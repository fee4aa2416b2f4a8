#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "angap/trainer.hpp"

using namespace angap;

namespace {

EmbeddingDataset separable_two_class(int per_class, double margin,
                                     std::uint64_t seed) {
  EmbeddingDataset ds;
  ds.class_count = 2;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 0.3);
  for (int k = 0; k < 2; ++k) {
    const double cx = k == 0 ? -1.0 - margin / 2 : 1.0 + margin / 2;
    for (int i = 0; i < per_class; ++i) {
      Example ex;
      ex.id = "e" + std::to_string(k) + "_" + std::to_string(i);
      ex.label = k;
      ex.features = Eigen::Vector2d(cx + gauss(rng) * 0.0, 1.0 + gauss(rng));
      ds.examples.push_back(std::move(ex));
    }
  }
  return ds;
}

HypersphereModel random_model(int d, int c, int hidden, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.hidden_width = hidden;
  return init_model(d, c, cfg);
}

// Central finite differences over every trainable parameter.
void check_gradients(HypersphereModel model, const Eigen::MatrixXd& features,
                     const std::vector<int>& labels) {
  auto [loss, grads] = nsl_loss_and_grad(model, features, labels);
  (void)loss;
  const double h = 1e-5;
  auto fd_check = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = nsl_loss_and_grad(model, features, labels).first;
    param = saved - h;
    const double down = nsl_loss_and_grad(model, features, labels).first;
    param = saved;
    const double fd = (up - down) / (2 * h);
    // floor keeps saturated (near-zero-gradient) coordinates out of the
    // relative comparison, where central differences are pure noise
    const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
    CHECK(std::abs(fd - analytic) / denom <= 1e-4);
  };
  for (int i = 0; i < model.weights.dim(); ++i)
    for (int k = 0; k < model.class_count(); ++k)
      fd_check(model.weights.columns(i, k), grads.d_weights(i, k));
  if (model.has_hidden()) {
    for (int i = 0; i < model.hidden.rows(); ++i)
      for (int j = 0; j < model.hidden.cols(); ++j)
        fd_check(model.hidden(i, j), grads.d_hidden(i, j));
  }
}

}  // namespace

TEST_CASE("nsl loss: symmetric cosines give ln 2") {
  // Two orthogonal-to-x weight columns with equal angles to every sample.
  Eigen::MatrixXd w(3, 2);
  w << 1, 1, 1, -1, 0, 0;
  HypersphereModel model{ClassWeights::validated(w)};
  model.scale = 30.0;
  Eigen::MatrixXd batch(3, 4);
  batch << 0, 0, 0, 0, 0, 0, 0, 0, 1, 2, -1, 0.5;  // x along z: cos = 0 to both
  std::vector<int> labels{0, 1, 0, 1};
  for (double s : {1.0, 7.0, 30.0}) {
    model.scale = s;
    auto [loss, grads] = nsl_loss_and_grad(model, batch, labels);
    (void)grads;
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("nsl loss: single saturated sample matches high-precision oracle") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Identity(4, 4);
  HypersphereModel model{ClassWeights::validated(w)};
  model.scale = 30.0;
  Eigen::MatrixXd batch(4, 1);
  batch << 1, 0, 0, 0;  // cosines [1, 0, 0, 0]
  auto [loss, grads] = nsl_loss_and_grad(model, batch, {0});
  (void)grads;
  const long double expected =
      -logl(expl(30.0L) / (expl(30.0L) + 3.0L));
  CHECK(std::abs(loss - static_cast<double>(expected)) <= 1e-12);
}

TEST_CASE("nsl gradients match central finite differences") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 5; ++trial) {
    const int d = 4, c = 3, n = 6;
    Eigen::MatrixXd batch(d, n);
    std::vector<int> labels(n);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < d; ++i) batch(i, j) = gauss(rng);
      labels[j] = static_cast<int>(rng() % c);
    }
    check_gradients(random_model(d, c, 0, trial), batch, labels);
    check_gradients(random_model(d, c, 5, 100 + trial), batch, labels);
  }
}

TEST_CASE("nsl loss ignores feature rescaling without a hidden layer") {
  auto model = random_model(5, 4, 0, 2);
  std::mt19937_64 rng(29);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd batch(5, 8);
  std::vector<int> labels(8);
  for (int j = 0; j < 8; ++j) {
    for (int i = 0; i < 5; ++i) batch(i, j) = gauss(rng);
    labels[j] = static_cast<int>(rng() % 4);
  }
  const double base = nsl_loss_and_grad(model, batch, labels).first;
  const double scaled = nsl_loss_and_grad(model, 3.7 * batch, labels).first;
  CHECK(base == doctest::Approx(scaled).epsilon(1e-12));
}

TEST_CASE("one small full-batch step decreases the loss") {
  auto model = random_model(6, 3, 0, 3);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd batch(6, 20);
  std::vector<int> labels(20);
  for (int j = 0; j < 20; ++j) {
    for (int i = 0; i < 6; ++i) batch(i, j) = gauss(rng);
    labels[j] = static_cast<int>(rng() % 3);
  }
  auto [before, grads] = nsl_loss_and_grad(model, batch, labels);
  model.weights.columns -= 1e-4 * grads.d_weights;
  const double after = nsl_loss_and_grad(model, batch, labels).first;
  CHECK(after < before);
}

TEST_CASE("training a separable problem reaches perfect accuracy") {
  auto ds = separable_two_class(100, 1.0, 1);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 32;
  cfg.seed = 5;
  auto result = train(ds, cfg);
  CHECK(result.history.back().accuracy == doctest::Approx(1.0));
}

TEST_CASE("degenerate pacing equals baseline training") {
  auto ds = separable_two_class(40, 0.5, 2);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 16;
  cfg.seed = 9;

  auto baseline = train(ds, cfg);

  PacedLoading schedule;
  schedule.pacing = {1.0, 1.0, ds.size(), cfg.epochs};  // full set every epoch
  for (const auto& ex : ds.examples)
    schedule.easy_to_hard_ids.push_back(ex.id);
  auto paced = train(ds, cfg, &schedule);

  REQUIRE(baseline.history.size() == paced.history.size());
  for (size_t i = 0; i < baseline.history.size(); ++i) {
    CHECK(baseline.history[i].loss == paced.history[i].loss);
    CHECK(baseline.history[i].accuracy == paced.history[i].accuracy);
  }
}

TEST_CASE("identical seeds give bit-identical histories") {
  auto ds = separable_two_class(50, 0.2, 3);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 8;
  cfg.seed = 1234;
  auto r1 = train(ds, cfg);
  auto r2 = train(ds, cfg);
  REQUIRE(r1.history.size() == r2.history.size());
  for (size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].loss == r2.history[i].loss);
    CHECK(r1.history[i].accuracy == r2.history[i].accuracy);
  }
  CHECK(r1.model.weights.columns == r2.model.weights.columns);
}

TEST_CASE("forgetting counts: never-forgotten examples stay at zero") {
  auto ds = separable_two_class(30, 2.0, 4);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 16;
  cfg.seed = 7;
  auto result = train(ds, cfg);
  // easily separable: once learned, examples stay correct
  bool found_zero = false;
  for (size_t i = 0; i < result.dynamics.forgetting.size(); ++i) {
    CHECK(result.dynamics.forgetting[i] >= 0);
    if (result.dynamics.forgetting[i] == 0 && result.dynamics.last_correct[i])
      found_zero = true;
  }
  CHECK(found_zero);
}

TEST_CASE("score_dataset: bijection and recomputation oracle") {
  auto ds = separable_two_class(25, 0.5, 5);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 16;
  cfg.seed = 11;
  auto result = train(ds, cfg);
  auto report = score_dataset(result.model, ds, &result.dynamics);

  REQUIRE(report.size() == ds.size());
  std::set<std::string> seen;
  for (const auto& r : report.rows) CHECK(seen.insert(r.id).second);

  for (const auto& ex : ds.examples) {
    const auto it = std::find_if(
        report.rows.begin(), report.rows.end(),
        [&](const DifficultyRecord& r) { return r.id == ex.id; });
    REQUIRE(it != report.rows.end());
    const AngleProfile p = result.model.profile(ex.features);
    CHECK(it->raw_gap == doctest::Approx(angular_gap(p, ex.label)).epsilon(1e-14));
    CHECK(it->avh == doctest::Approx(avh(p, ex.label)).epsilon(1e-14));
    auto cm = confidence_and_margin(result.model.scale * p.cosines, ex.label);
    CHECK(it->confidence == doctest::Approx(cm.confidence).epsilon(1e-14));
    CHECK(it->margin == doctest::Approx(cm.margin).epsilon(1e-14));
  }
}

TEST_CASE("train rejects invalid configs") {
  auto ds = separable_two_class(5, 1.0, 6);
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(train(ds, cfg), Error);
  cfg.epochs = 1;
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(train(ds, cfg), Error);
}
