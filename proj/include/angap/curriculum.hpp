#pragma once

#include <functional>
#include <string>
#include <vector>

#include "angap/common.hpp"
#include "angap/report.hpp"

namespace angap {

// Linear pacing function g(t) = min(N, ceil(N*b + N*(1-b)*t/(a*T))), floored
// at 1 visible example. a is the fraction of total iterations at which the
// full set becomes visible, b the initial visible fraction.
struct PacingFunction {
  double a = 1.0;  // (0, 1]
  double b = 0.0;  // [0, 1]
  int dataset_size = 0;
  int total_iterations = 0;

  int pace_size(double t) const;
};

// Sigmoid example weighting d = sigma(lambda(t) * difficulty), with lambda
// moving linearly from lambda_start to lambda_end over total_iterations.
struct SigmoidWeighting {
  double lambda_start = 0.0;
  double lambda_end = 0.0;
  int total_iterations = 1;

  double lambda_at(int t) const;
  double weight(int t, double difficulty) const;
};

enum class DifficultyMeasure {
  AngularGap,
  CalibratedGap,
  Avh,
  Confidence,
  Margin,
  Forgetting,
};

DifficultyMeasure parse_measure(const std::string& name);

/// Example ids ordered easy to hard under the chosen measure. Easiness
/// measures (gap, confidence, margin) sort descending, hardness measures
/// (AVH, forgetting) ascending; ties break stably by example id.
std::vector<std::string> sort_by_difficulty(const DifficultyReport& report,
                                            DifficultyMeasure measure);

struct SweepCell {
  double a = 0.0;
  double b = 0.0;
  std::vector<double> accuracies;  // one per seed, NaN for failed runs
  double median_accuracy = 0.0;
  bool complete = false;
};

struct SweepTable {
  std::vector<SweepCell> cells;

  const SweepCell* find(double a, double b) const;
};

/// Runs the training closure over the (a, b) grid for every seed and
/// aggregates the median final accuracy per cell. A runner failure marks the
/// run missing rather than aborting the sweep.
SweepTable sweep(
    const std::vector<double>& a_values, const std::vector<double>& b_values,
    const std::vector<std::uint64_t>& seeds,
    const std::function<double(double a, double b, std::uint64_t seed)>& runner);

double median(std::vector<double> values);

}  // namespace angap
