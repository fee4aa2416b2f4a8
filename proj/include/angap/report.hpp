#pragma once

#include <limits>
#include <string>
#include <vector>

namespace angap {

struct DifficultyRecord {
  std::string id;
  int label = 0;
  double raw_gap = 0.0;
  double calibrated_gap = std::numeric_limits<double>::quiet_NaN();
  double avh = 0.0;
  double confidence = 0.0;
  double margin = 0.0;
  int forgetting = -1;  // -1 when no learning dynamics were supplied

  bool has_calibrated() const { return calibrated_gap == calibrated_gap; }
  bool has_forgetting() const { return forgetting >= 0; }
};

// Per-example difficulty scores, ordered by example id.
struct DifficultyReport {
  std::vector<DifficultyRecord> rows;

  int size() const { return static_cast<int>(rows.size()); }
};

}  // namespace angap
