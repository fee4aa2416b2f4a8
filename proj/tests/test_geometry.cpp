#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "angap/geometry.hpp"

using namespace angap;

namespace {

// Definitional oracle: per-class dot product / arccos loop, no Eigen reductions.
std::pair<std::vector<double>, std::vector<double>> profile_oracle(
    const Eigen::VectorXd& x, const Eigen::MatrixXd& w) {
  std::vector<double> cosines, angles;
  double xn = 0.0;
  for (int i = 0; i < x.size(); ++i) xn += x[i] * x[i];
  xn = std::sqrt(xn);
  for (int k = 0; k < w.cols(); ++k) {
    double dot = 0.0, wn = 0.0;
    for (int i = 0; i < w.rows(); ++i) {
      dot += x[i] * w(i, k);
      wn += w(i, k) * w(i, k);
    }
    double c = dot / (xn * std::sqrt(wn));
    c = std::min(1.0, std::max(-1.0, c));
    cosines.push_back(c);
    angles.push_back(std::acos(c));
  }
  return {cosines, angles};
}

// Softmax in long double for the confidence/margin oracle.
std::vector<long double> softmax_hp(const Eigen::VectorXd& logits) {
  long double shift = logits[0];
  for (int i = 1; i < logits.size(); ++i)
    shift = std::max<long double>(shift, logits[i]);
  std::vector<long double> e(logits.size());
  long double sum = 0.0L;
  for (int i = 0; i < logits.size(); ++i) {
    e[i] = expl(static_cast<long double>(logits[i]) - shift);
    sum += e[i];
  }
  for (auto& v : e) v /= sum;
  return e;
}

}  // namespace

TEST_CASE("angle profile: self-similarity and orthogonality") {
  Eigen::MatrixXd w(3, 3);
  w << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  auto cw = ClassWeights::validated(w);

  auto p = angle_profile(Eigen::Vector3d(1, 0, 0), cw);
  CHECK(p.cosines[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.angles[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(p.cosines[1] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(p.angles[1] == doctest::Approx(M_PI / 2).epsilon(1e-15));
}

TEST_CASE("angle profile matches brute-force oracle on random instances") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd x(4);
    Eigen::MatrixXd w(4, 5);
    for (int i = 0; i < 4; ++i) x[i] = gauss(rng);
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 5; ++k) w(i, k) = gauss(rng);
    if (x.norm() == 0.0) continue;
    auto p = angle_profile(x, ClassWeights::validated(w));
    auto [oc, oa] = profile_oracle(x, w);
    for (int k = 0; k < 5; ++k) {
      CHECK(p.cosines[k] == doctest::Approx(oc[k]).epsilon(1e-12));
      CHECK(p.angles[k] == doctest::Approx(oa[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("angle profile is scale invariant") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd x(6);
  Eigen::MatrixXd w(6, 4);
  for (int i = 0; i < 6; ++i) x[i] = gauss(rng);
  for (int i = 0; i < 6; ++i)
    for (int k = 0; k < 4; ++k) w(i, k) = gauss(rng);
  auto cw = ClassWeights::validated(w);
  auto p1 = angle_profile(x, cw);
  auto p2 = angle_profile(1e3 * x, cw);
  auto p3 = angle_profile(1e-3 * x, cw);
  for (int k = 0; k < 4; ++k) {
    CHECK(std::abs(p1.cosines[k] - p2.cosines[k]) <= 1e-12);
    CHECK(std::abs(p1.cosines[k] - p3.cosines[k]) <= 1e-12);
  }
}

TEST_CASE("angle profile errors") {
  Eigen::MatrixXd w(3, 2);
  w << 1, 0, 0, 1, 0, 0;
  auto cw = ClassWeights::validated(w);
  CHECK_THROWS_AS(angle_profile(Eigen::Vector2d(1, 0), cw), Error);
  CHECK_THROWS_AS(angle_profile(Eigen::Vector3d(0, 0, 0), cw), Error);
  Eigen::MatrixXd bad(3, 2);
  bad << 1, 0, 0, 0, 0, 0;
  CHECK_THROWS_AS(ClassWeights::validated(bad), Error);
}

TEST_CASE("angular gap basics") {
  auto p = profile_from_cosines(Eigen::Vector3d(1, 0, 0));
  CHECK(angular_gap(p, 0) == doctest::Approx(1.0));
  auto q = profile_from_cosines(Eigen::Vector2d(0.5, 0.5));
  CHECK(angular_gap(q, 0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(angular_gap(p, 3), Error);
  CHECK_THROWS_AS(angular_gap(p, -1), Error);
}

TEST_CASE("angular gap matches exhaustive-max oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd c(8);
    for (int i = 0; i < 8; ++i) c[i] = unif(rng);
    auto p = profile_from_cosines(c);
    for (int label = 0; label < 8; ++label) {
      double best = -2.0;
      for (int k = 0; k < 8; ++k)
        if (k != label && c[k] > best) best = c[k];
      CHECK(angular_gap(p, label) == doctest::Approx(c[label] - best).epsilon(1e-14));
    }
  }
}

TEST_CASE("gap sign equals prediction correctness") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd c(5);
    for (int i = 0; i < 5; ++i) c[i] = unif(rng);
    auto p = profile_from_cosines(c);
    int argmax = 0;
    c.maxCoeff(&argmax);
    for (int label = 0; label < 5; ++label) {
      const bool positive = angular_gap(p, label) > 0.0;
      CHECK(positive == (argmax == label));
    }
  }
}

TEST_CASE("avh: trivial cases and direct-formula oracle") {
  auto p = profile_from_cosines(Eigen::Vector2d(1.0, -1.0));  // angles 0, pi
  CHECK(avh(p, 0) == doctest::Approx(0.0));

  // all angles equal -> 1/C
  auto q = profile_from_cosines(Eigen::VectorXd::Constant(7, 0.3));
  for (int label = 0; label < 7; ++label)
    CHECK(avh(q, label) == doctest::Approx(1.0 / 7).epsilon(1e-14));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-0.99, 0.99);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd c(10);
    for (int i = 0; i < 10; ++i) c[i] = unif(rng);
    auto prof = profile_from_cosines(c);
    double sum = 0.0;
    for (int k = 0; k < 10; ++k) sum += std::acos(c[k]);
    double avh_sum = 0.0;
    for (int label = 0; label < 10; ++label) {
      const double v = avh(prof, label);
      CHECK(v == doctest::Approx(std::acos(c[label]) / sum).epsilon(1e-13));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      avh_sum += v;
    }
    CHECK(avh_sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("avh rejects collapsed geometry") {
  auto p = profile_from_cosines(Eigen::Vector2d(1.0, 1.0));
  CHECK_THROWS_AS(avh(p, 0), Error);
}

TEST_CASE("confidence and margin: trivial cases") {
  auto r = confidence_and_margin(Eigen::Vector2d(0, 0), 0);
  CHECK(r.confidence == doctest::Approx(0.5));
  CHECK(r.margin == doctest::Approx(0.0));

  auto s = confidence_and_margin(Eigen::Vector2d(1000, -1000), 0);
  CHECK(s.confidence == doctest::Approx(1.0));
  CHECK(s.margin == doctest::Approx(1.0));
}

TEST_CASE("confidence and margin match high-precision oracle") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> gauss(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd logits(6);
    for (int i = 0; i < 6; ++i) logits[i] = gauss(rng);
    const int label = static_cast<int>(trial % 6);
    auto r = confidence_and_margin(logits, label);

    auto p = softmax_hp(logits);
    long double maxp = 0.0L, other = 0.0L, sum = 0.0L;
    for (int k = 0; k < 6; ++k) {
      maxp = std::max(maxp, p[k]);
      if (k != label) other = std::max(other, p[k]);
      sum += p[k];
    }
    CHECK(std::abs(r.confidence - static_cast<double>(maxp)) <= 1e-12);
    CHECK(std::abs(r.margin - static_cast<double>(p[label] - other)) <= 1e-12);
    CHECK(std::abs(static_cast<double>(sum) - 1.0) <= 1e-12);
    CHECK(r.margin >= -1.0);
    CHECK(r.margin <= 1.0);
  }
}
