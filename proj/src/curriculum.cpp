#include "angap/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace angap {

int PacingFunction::pace_size(double t) const {
  require(a > 0.0, ErrorKind::InvalidArgument,
          "pacing parameter a must be positive");
  require(a <= 1.0 && b >= 0.0 && b <= 1.0, ErrorKind::InvalidArgument,
          "pacing parameters out of range");
  require(dataset_size >= 1 && total_iterations >= 1,
          ErrorKind::InvalidArgument, "pacing needs N >= 1 and T >= 1");
  require(t >= 0.0 && t <= total_iterations, ErrorKind::InvalidArgument,
          "iteration out of [0, T]");
  const double n = static_cast<double>(dataset_size);
  if (t >= a * total_iterations) return dataset_size;
  const double raw = n * b + n * (1.0 - b) * t / (a * total_iterations);
  // Relative slack so that products like N*b landing a few ulps above an
  // integer still round down to the intended ceiling.
  const double slack =
      16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, raw);
  int g = static_cast<int>(std::ceil(raw - slack));
  return std::clamp(g, 1, dataset_size);
}

double SigmoidWeighting::lambda_at(int t) const {
  require(total_iterations >= 1, ErrorKind::InvalidArgument, "T must be >= 1");
  require(t >= 0 && t <= total_iterations, ErrorKind::InvalidArgument,
          "iteration out of [0, T]");
  if (t == total_iterations) return lambda_end;  // exact endpoint
  const double frac = static_cast<double>(t) / total_iterations;
  return lambda_start + (lambda_end - lambda_start) * frac;
}

double SigmoidWeighting::weight(int t, double difficulty) const {
  const double z = lambda_at(t) * difficulty;
  return 1.0 / (1.0 + std::exp(-z));
}

DifficultyMeasure parse_measure(const std::string& name) {
  if (name == "gap" || name == "angular_gap") return DifficultyMeasure::AngularGap;
  if (name == "calibrated_gap") return DifficultyMeasure::CalibratedGap;
  if (name == "avh") return DifficultyMeasure::Avh;
  if (name == "confidence") return DifficultyMeasure::Confidence;
  if (name == "margin") return DifficultyMeasure::Margin;
  if (name == "forgetting") return DifficultyMeasure::Forgetting;
  throw Error(ErrorKind::InvalidArgument, "unknown difficulty measure: " + name);
}

namespace {

double measure_value(const DifficultyRecord& r, DifficultyMeasure m) {
  switch (m) {
    case DifficultyMeasure::AngularGap: return r.raw_gap;
    case DifficultyMeasure::CalibratedGap:
      require(r.has_calibrated(), ErrorKind::InvalidArgument,
              "calibrated gap missing for id " + r.id);
      return r.calibrated_gap;
    case DifficultyMeasure::Avh: return r.avh;
    case DifficultyMeasure::Confidence: return r.confidence;
    case DifficultyMeasure::Margin: return r.margin;
    case DifficultyMeasure::Forgetting:
      require(r.has_forgetting(), ErrorKind::InvalidArgument,
              "forgetting count missing for id " + r.id);
      return static_cast<double>(r.forgetting);
  }
  throw Error(ErrorKind::InvalidArgument, "bad measure");
}

bool easiness_oriented(DifficultyMeasure m) {
  switch (m) {
    case DifficultyMeasure::AngularGap:
    case DifficultyMeasure::CalibratedGap:
    case DifficultyMeasure::Confidence:
    case DifficultyMeasure::Margin:
      return true;  // higher = easier, sort descending
    case DifficultyMeasure::Avh:
    case DifficultyMeasure::Forgetting:
      return false;  // higher = harder, sort ascending
  }
  return true;
}

}  // namespace

std::vector<std::string> sort_by_difficulty(const DifficultyReport& report,
                                            DifficultyMeasure measure) {
  struct Entry {
    double key;
    const std::string* id;
  };
  std::vector<Entry> entries;
  entries.reserve(report.rows.size());
  const bool descending = easiness_oriented(measure);
  for (const auto& r : report.rows) {
    double v = measure_value(r, measure);
    entries.push_back({descending ? -v : v, &r.id});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
    if (x.key != y.key) return x.key < y.key;
    return *x.id < *y.id;
  });
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(*e.id);
  return out;
}

double median(std::vector<double> values) {
  require(!values.empty(), ErrorKind::InvalidArgument, "median of empty set");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

const SweepCell* SweepTable::find(double a, double b) const {
  for (const auto& c : cells) {
    if (c.a == a && c.b == b) return &c;
  }
  return nullptr;
}

SweepTable sweep(
    const std::vector<double>& a_values, const std::vector<double>& b_values,
    const std::vector<std::uint64_t>& seeds,
    const std::function<double(double, double, std::uint64_t)>& runner) {
  require(!a_values.empty() && !b_values.empty() && !seeds.empty(),
          ErrorKind::InvalidArgument, "sweep grid and seed list must be nonempty");
  SweepTable table;
  for (double a : a_values) {
    for (double b : b_values) {
      SweepCell cell;
      cell.a = a;
      cell.b = b;
      std::vector<double> ok;
      for (auto seed : seeds) {
        double acc = std::numeric_limits<double>::quiet_NaN();
        try {
          acc = runner(a, b, seed);
          ok.push_back(acc);
        } catch (const std::exception&) {
          // failed cell run recorded as missing
        }
        cell.accuracies.push_back(acc);
      }
      cell.complete = ok.size() == seeds.size();
      cell.median_accuracy =
          ok.empty() ? std::numeric_limits<double>::quiet_NaN() : median(ok);
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

}  // namespace angap
