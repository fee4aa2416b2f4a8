#include "angap/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace angap {

void EmbeddingDataset::validate() const {
  require(class_count >= 2, ErrorKind::InvalidArgument,
          "dataset needs class_count >= 2");
  require(!examples.empty(), ErrorKind::InvalidArgument, "empty dataset");
  std::set<std::string> ids;
  const int d = dim();
  for (const auto& ex : examples) {
    require(ids.insert(ex.id).second, ErrorKind::InvalidArgument,
            "duplicate example id: " + ex.id);
    require(ex.label >= 0 && ex.label < class_count, ErrorKind::InvalidArgument,
            "label out of range for id " + ex.id);
    require(static_cast<int>(ex.features.size()) == d,
            ErrorKind::DimensionMismatch,
            "inconsistent feature dimension between ids " + examples[0].id +
                " and " + ex.id);
    require(ex.features.allFinite(), ErrorKind::InvalidArgument,
            "non-finite feature in id " + ex.id);
  }
  for (const auto& [id, v] : hsf) {
    require(ids.count(id) == 1, ErrorKind::InvalidArgument,
            "hsf id not in dataset: " + id);
    require(v >= 0.0 && v <= 1.0, ErrorKind::InvalidArgument,
            "hsf outside [0, 1] for id " + id);
  }
}

Eigen::MatrixXd equiangular_centers(int class_count, int dimension,
                                    double separation_rad, std::uint64_t seed) {
  require(class_count >= 2, ErrorKind::InvalidArgument, "need >= 2 classes");
  require(dimension >= 2, ErrorKind::InvalidArgument, "need dimension >= 2");
  require(separation_rad > 0.0 && separation_rad < M_PI,
          ErrorKind::InvalidArgument, "separation must lie in (0, pi)");

  const double rho = std::cos(separation_rad);
  // Gram matrix (1-rho) I + rho J is PSD iff rho >= -1/(C-1); the Cholesky
  // factor needs at most C coordinates.
  require(rho >= -1.0 / (class_count - 1) - 1e-12, ErrorKind::InvalidArgument,
          "separation infeasible: cos(sep) < -1/(C-1)");
  require(dimension >= class_count, ErrorKind::InvalidArgument,
          "separation infeasible: dimension < class count");

  Eigen::MatrixXd gram =
      Eigen::MatrixXd::Constant(class_count, class_count, rho);
  gram.diagonal().setOnes();
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  require(llt.info() == Eigen::Success, ErrorKind::Numeric,
          "center Gram matrix not positive definite");
  Eigen::MatrixXd l = llt.matrixL();  // C x C, rows are centers

  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(dimension, class_count);
  centers.topRows(class_count) = l.transpose();

  // Random orthogonal rotation so centers are not axis-aligned.
  auto rng = make_rng(seed, "centers");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(dimension, dimension);
  for (int i = 0; i < dimension; ++i)
    for (int j = 0; j < dimension; ++j) g(i, j) = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  centers = q * centers;
  for (int k = 0; k < class_count; ++k) centers.col(k).normalize();
  return centers;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  require(spec.points_per_class >= 1, ErrorKind::InvalidArgument,
          "points_per_class must be >= 1");
  require(spec.spread >= 0.0, ErrorKind::InvalidArgument,
          "spread must be nonnegative");
  require(spec.label_noise >= 0.0 && spec.label_noise < 0.5,
          ErrorKind::InvalidArgument, "label noise must lie in [0, 0.5)");

  SyntheticData out;
  out.centers = equiangular_centers(spec.class_count, spec.dimension,
                                    spec.center_separation_rad, spec.seed);

  auto rng = make_rng(spec.seed, "points");
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = spec.class_count * spec.points_per_class;
  out.dataset.class_count = spec.class_count;
  out.dataset.examples.reserve(n);

  for (int k = 0; k < spec.class_count; ++k) {
    for (int j = 0; j < spec.points_per_class; ++j) {
      Eigen::VectorXd noise(spec.dimension);
      for (int i = 0; i < spec.dimension; ++i) noise[i] = gauss(rng);
      Eigen::VectorXd x = out.centers.col(k) + spec.spread * noise;
      if (x.norm() == 0.0) x = out.centers.col(k);
      x.normalize();
      Example ex;
      ex.id = "s" + std::to_string(k) + "_" + std::to_string(j);
      ex.label = k;
      ex.features = x;
      out.dataset.examples.push_back(std::move(ex));
    }
  }

  // Bayes cosine margin against the true centers.
  for (const auto& ex : out.dataset.examples) {
    double own = ex.features.dot(out.centers.col(ex.label));
    double best_other = -2.0;
    for (int k = 0; k < spec.class_count; ++k) {
      if (k == ex.label)
        continue;
      best_other = std::max(best_other, ex.features.dot(out.centers.col(k)));
    }
    out.ground_truth[ex.id] = own - best_other;
  }

  if (spec.label_noise > 0.0) {
    auto noise_rng = make_rng(spec.seed, "noise");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> cls(0, spec.class_count - 2);
    for (auto& ex : out.dataset.examples) {
      if (unif(noise_rng) < spec.label_noise) {
        int wrong = cls(noise_rng);
        if (wrong >= ex.label) ++wrong;  // uniform among wrong classes
        ex.label = wrong;
        out.ground_truth[ex.id] = -2.0;
      }
    }
  }

  out.dataset.validate();
  return out;
}

}  // namespace angap
