#pragma once

#include <Eigen/Dense>

#include "angap/common.hpp"

namespace angap {

// Class weights stored column-wise: weights.col(k) is the weight vector of
// class k. All columns share dimension d and have strictly positive norm.
struct ClassWeights {
  Eigen::MatrixXd columns;  // d x C

  int dim() const { return static_cast<int>(columns.rows()); }
  int class_count() const { return static_cast<int>(columns.cols()); }

  static ClassWeights validated(Eigen::MatrixXd m);
};

// Per-class cosine similarities and the corresponding angles in [0, pi].
struct AngleProfile {
  Eigen::VectorXd cosines;  // cos(theta_k), clamped into [-1, 1]
  Eigen::VectorXd angles;   // theta_k = arccos(cosines[k])

  int class_count() const { return static_cast<int>(cosines.size()); }
};

/// Cosine similarities and angles between a feature vector and every class
/// weight column. Rejects zero-norm inputs and dimension mismatches.
AngleProfile angle_profile(const Eigen::VectorXd& x, const ClassWeights& w);

/// Builds a profile directly from cosine values (clamp slack 1e-12).
AngleProfile profile_from_cosines(const Eigen::VectorXd& cosines);

/// cos(theta_label) - max_{k != label} cos(theta_k). Higher = easier;
/// positive exactly when the label class is the nearest class.
double angular_gap(const AngleProfile& profile, int label);

/// theta_label / sum_k theta_k, in [0, 1]. Higher = harder. Errors out when
/// every angle is zero (collapsed weight matrix).
double avh(const AngleProfile& profile, int label);

struct ConfidenceMargin {
  double confidence;  // max softmax probability
  double margin;      // p_label - max_{k != label} p_k
};

/// Softmax confidence and classification margin over raw logits, computed
/// with the max-shift so saturated logits do not overflow.
ConfidenceMargin confidence_and_margin(const Eigen::VectorXd& logits, int label);

/// Numerically stable softmax of a logit vector; probabilities sum to 1.
Eigen::VectorXd stable_softmax(const Eigen::VectorXd& logits);

}  // namespace angap
