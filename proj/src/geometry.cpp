#include "angap/geometry.hpp"

#include <cmath>

namespace angap {

namespace {
constexpr double kCosineSlack = 1e-12;
}

ClassWeights ClassWeights::validated(Eigen::MatrixXd m) {
  require(m.cols() >= 2, ErrorKind::InvalidArgument,
          "class weights need at least 2 classes");
  require(m.rows() >= 2, ErrorKind::InvalidArgument,
          "class weights need dimension >= 2");
  require(m.allFinite(), ErrorKind::InvalidArgument,
          "class weights must be finite");
  for (int k = 0; k < m.cols(); ++k) {
    require(m.col(k).norm() > 0.0, ErrorKind::DegenerateGeometry,
            "zero-norm weight column at class " + std::to_string(k));
  }
  return ClassWeights{std::move(m)};
}

AngleProfile profile_from_cosines(const Eigen::VectorXd& cosines) {
  require(cosines.size() >= 2, ErrorKind::InvalidArgument,
          "profile needs at least 2 classes");
  AngleProfile p;
  p.cosines.resize(cosines.size());
  p.angles.resize(cosines.size());
  for (int k = 0; k < cosines.size(); ++k) {
    double c = cosines[k];
    require(std::isfinite(c), ErrorKind::Numeric, "non-finite cosine");
    require(c >= -1.0 - kCosineSlack && c <= 1.0 + kCosineSlack,
            ErrorKind::Numeric,
            "cosine outside [-1, 1] beyond rounding slack: " + std::to_string(c));
    c = std::clamp(c, -1.0, 1.0);
    p.cosines[k] = c;
    p.angles[k] = std::acos(c);
  }
  return p;
}

AngleProfile angle_profile(const Eigen::VectorXd& x, const ClassWeights& w) {
  require(x.size() == w.dim(), ErrorKind::DimensionMismatch,
          "feature dimension " + std::to_string(x.size()) +
              " != weight dimension " + std::to_string(w.dim()));
  require(x.allFinite(), ErrorKind::InvalidArgument, "non-finite feature");
  const double xn = x.norm();
  require(xn > 0.0, ErrorKind::DegenerateGeometry, "zero-norm feature vector");

  Eigen::VectorXd cos(w.class_count());
  for (int k = 0; k < w.class_count(); ++k) {
    const double wn = w.columns.col(k).norm();
    require(wn > 0.0, ErrorKind::DegenerateGeometry,
            "zero-norm weight column at class " + std::to_string(k));
    cos[k] = x.dot(w.columns.col(k)) / (xn * wn);
  }
  return profile_from_cosines(cos);
}

double angular_gap(const AngleProfile& profile, int label) {
  const int c = profile.class_count();
  require(label >= 0 && label < c, ErrorKind::InvalidArgument,
          "label out of range");
  double best_other = -2.0;
  for (int k = 0; k < c; ++k) {
    if (k != label) best_other = std::max(best_other, profile.cosines[k]);
  }
  return profile.cosines[label] - best_other;
}

double avh(const AngleProfile& profile, int label) {
  const int c = profile.class_count();
  require(label >= 0 && label < c, ErrorKind::InvalidArgument,
          "label out of range");
  const double total = profile.angles.sum();
  require(total > 0.0, ErrorKind::DegenerateGeometry,
          "all angles zero: collapsed weight matrix");
  return profile.angles[label] / total;
}

Eigen::VectorXd stable_softmax(const Eigen::VectorXd& logits) {
  const double shift = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - shift).exp();
  return e / e.sum();
}

ConfidenceMargin confidence_and_margin(const Eigen::VectorXd& logits, int label) {
  require(logits.size() >= 2, ErrorKind::InvalidArgument,
          "need at least 2 classes");
  require(label >= 0 && label < logits.size(), ErrorKind::InvalidArgument,
          "label out of range");
  require(logits.allFinite(), ErrorKind::Numeric, "non-finite logits");
  const Eigen::VectorXd p = stable_softmax(logits);
  double best_other = 0.0;
  for (int k = 0; k < p.size(); ++k) {
    if (k != label) best_other = std::max(best_other, p[k]);
  }
  return ConfidenceMargin{p.maxCoeff(), p[label] - best_other};
}

}  // namespace angap
