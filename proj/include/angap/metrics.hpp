#pragma once

#include <Eigen/Dense>
#include <vector>

#include "angap/common.hpp"

namespace angap {

struct ReliabilityBin {
  double low = 0.0;
  double high = 0.0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  int count = 0;
};

// Equal-width bins over [0, 1]. Interior-edge samples land in the higher
// bin; confidence 0 lands in bin 0. Empty bins keep zero count and carry no
// ECE weight.
struct ReliabilityBins {
  std::vector<ReliabilityBin> bins;
  int scope_class = -1;  // -1 = overall, otherwise the class index

  int total_count() const;
};

struct EceResult {
  double ece = 0.0;  // fraction, multiply by 100 for percent
  ReliabilityBins bins;
};

EceResult ece(const std::vector<double>& confidences,
              const std::vector<bool>& correctness, int bin_count = 15);

/// Per-class reliability: for class k, bins p_k against the indicator
/// (label == k). Rows must be probability vectors summing to 1.
std::vector<ReliabilityBins> classwise_reliability(
    const Eigen::MatrixXd& probabilities, const std::vector<int>& labels,
    int bin_count = 15);

enum class CorrelationMethod { Spearman, KendallTauB };

struct CorrelationResult {
  double coefficient = 0.0;
  double p_value = 1.0;  // large-sample normal approximation
  int n = 0;
  CorrelationMethod method = CorrelationMethod::Spearman;
};

/// Spearman's rank correlation with average ranks for ties.
CorrelationResult spearman(const std::vector<double>& a,
                           const std::vector<double>& b);

/// Kendall's tau-b with tie corrections.
CorrelationResult kendall(const std::vector<double>& a,
                          const std::vector<double>& b);

/// Fraction of rows whose label scores among the k largest entries; ties
/// break toward the lower class index.
double top_k_accuracy(const Eigen::MatrixXd& scores,
                      const std::vector<int>& labels, int k);

/// Average ranks (1-based, ties averaged).
std::vector<double> average_ranks(const std::vector<double>& values);

}  // namespace angap
