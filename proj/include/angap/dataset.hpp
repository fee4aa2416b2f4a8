#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "angap/common.hpp"

namespace angap {

struct Example {
  std::string id;
  int label = 0;
  Eigen::VectorXd features;
};

// Labeled embedding-level dataset, optionally annotated with human selection
// frequency (fraction of annotators picking the target class, in [0, 1]).
struct EmbeddingDataset {
  std::vector<Example> examples;
  int class_count = 0;
  std::map<std::string, double> hsf;  // keys are a subset of example ids

  int size() const { return static_cast<int>(examples.size()); }
  int dim() const {
    return examples.empty() ? 0 : static_cast<int>(examples[0].features.size());
  }

  void validate() const;
};

struct SyntheticSpec {
  int class_count = 10;
  int dimension = 16;
  int points_per_class = 100;
  double center_separation_rad = 1.2;  // pairwise angle between class centers
  double spread = 0.4;                 // within-class angular spread
  double label_noise = 0.0;            // fraction of labels flipped, [0, 0.5)
  std::uint64_t seed = 0;
};

struct SyntheticData {
  EmbeddingDataset dataset;
  // Ground-truth difficulty: cosine margin to the Bayes decision boundary
  // (cos to own center minus max cos to any other center). Flipped-label
  // points carry the most negative achievable margin, -2.
  std::map<std::string, double> ground_truth;
  Eigen::MatrixXd centers;  // d x C unit columns
};

/// Class centers with the requested pairwise angular separation on the unit
/// sphere, Gaussian tangent noise with the given spread, optional uniform
/// label flips. Deterministic per seed.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Centers only; errors when the separation is infeasible for (C, d).
Eigen::MatrixXd equiangular_centers(int class_count, int dimension,
                                    double separation_rad, std::uint64_t seed);

}  // namespace angap
