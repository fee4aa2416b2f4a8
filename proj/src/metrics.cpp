#include "angap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace angap {

namespace {

double normal_sf(double z) {  // P(Z > z)
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

double two_sided_p(double z) {
  return std::clamp(2.0 * normal_sf(std::abs(z)), 0.0, 1.0);
}

void check_pair(const std::vector<double>& a, const std::vector<double>& b) {
  require(!a.empty(), ErrorKind::InvalidArgument, "empty input");
  require(a.size() == b.size(), ErrorKind::InvalidArgument,
          "length mismatch");
  for (double v : a)
    require(std::isfinite(v), ErrorKind::Numeric, "non-finite value");
  for (double v : b)
    require(std::isfinite(v), ErrorKind::Numeric, "non-finite value");
}

bool is_constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
}

}  // namespace

int ReliabilityBins::total_count() const {
  int total = 0;
  for (const auto& b : bins) total += b.count;
  return total;
}

EceResult ece(const std::vector<double>& confidences,
              const std::vector<bool>& correctness, int bin_count) {
  require(!confidences.empty(), ErrorKind::InvalidArgument, "empty input");
  require(confidences.size() == correctness.size(), ErrorKind::InvalidArgument,
          "confidence/correctness length mismatch");
  require(bin_count >= 1, ErrorKind::InvalidArgument, "bin count must be >= 1");

  const int n = static_cast<int>(confidences.size());
  std::vector<double> conf_sum(bin_count, 0.0);
  std::vector<int> correct(bin_count, 0), count(bin_count, 0);
  for (int i = 0; i < n; ++i) {
    const double c = confidences[i];
    require(c >= 0.0 && c <= 1.0, ErrorKind::InvalidArgument,
            "confidence outside [0, 1]");
    int idx = std::min(static_cast<int>(std::floor(c * bin_count)), bin_count - 1);
    conf_sum[idx] += c;
    count[idx] += 1;
    if (correctness[i]) correct[idx] += 1;
  }

  EceResult out;
  out.bins.bins.resize(bin_count);
  for (int b = 0; b < bin_count; ++b) {
    auto& bin = out.bins.bins[b];
    bin.low = static_cast<double>(b) / bin_count;
    bin.high = static_cast<double>(b + 1) / bin_count;
    bin.count = count[b];
    if (count[b] > 0) {
      bin.mean_confidence = conf_sum[b] / count[b];
      bin.accuracy = static_cast<double>(correct[b]) / count[b];
      out.ece += (static_cast<double>(count[b]) / n) *
                 std::abs(bin.accuracy - bin.mean_confidence);
    }
  }
  return out;
}

std::vector<ReliabilityBins> classwise_reliability(
    const Eigen::MatrixXd& probabilities, const std::vector<int>& labels,
    int bin_count) {
  const int n = static_cast<int>(probabilities.rows());
  const int c = static_cast<int>(probabilities.cols());
  require(n >= 1 && c >= 2, ErrorKind::InvalidArgument,
          "need a nonempty N x C probability matrix");
  require(static_cast<int>(labels.size()) == n, ErrorKind::InvalidArgument,
          "label length mismatch");
  for (int i = 0; i < n; ++i) {
    require(std::abs(probabilities.row(i).sum() - 1.0) <= 1e-9,
            ErrorKind::InvalidArgument,
            "row " + std::to_string(i) + " is not a probability vector");
    require(probabilities.row(i).minCoeff() >= -1e-12, ErrorKind::InvalidArgument,
            "negative probability in row " + std::to_string(i));
  }

  std::vector<ReliabilityBins> out;
  out.reserve(c);
  for (int k = 0; k < c; ++k) {
    std::vector<double> conf(n);
    std::vector<bool> hit(n);
    for (int i = 0; i < n; ++i) {
      conf[i] = std::clamp(probabilities(i, k), 0.0, 1.0);
      hit[i] = labels[i] == k;
    }
    ReliabilityBins bins = ece(conf, hit, bin_count).bins;
    bins.scope_class = k;
    out.push_back(std::move(bins));
  }
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  const int n = static_cast<int>(values.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](int i, int j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;  // 1-based average rank
    for (int t = i; t <= j; ++t) ranks[idx[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

CorrelationResult spearman(const std::vector<double>& a,
                           const std::vector<double>& b) {
  check_pair(a, b);
  require(!is_constant(a) && !is_constant(b), ErrorKind::InvalidArgument,
          "correlation undefined for a constant vector");

  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const int n = static_cast<int>(a.size());
  double ma = 0.0, mb = 0.0;
  for (int i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxy += (ra[i] - ma) * (rb[i] - mb);
    sxx += (ra[i] - ma) * (ra[i] - ma);
    syy += (rb[i] - mb) * (rb[i] - mb);
  }
  CorrelationResult r;
  r.method = CorrelationMethod::Spearman;
  r.n = n;
  r.coefficient = sxy / std::sqrt(sxx * syy);
  const double z = r.coefficient * std::sqrt(static_cast<double>(n - 1));
  r.p_value = two_sided_p(z);
  return r;
}

namespace {

// Inversion counting by merge sort; returns the number of exchanges.
long long merge_count(std::vector<double>& v, std::vector<double>& tmp,
                      int lo, int hi) {
  if (hi - lo <= 1) return 0;
  const int mid = (lo + hi) / 2;
  long long swaps = merge_count(v, tmp, lo, mid) + merge_count(v, tmp, mid, hi);
  int i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
  return swaps;
}

long long tie_pairs(const std::vector<double>& sorted_keys) {
  long long total = 0;
  int i = 0;
  const int n = static_cast<int>(sorted_keys.size());
  while (i < n) {
    int j = i;
    while (j + 1 < n && sorted_keys[j + 1] == sorted_keys[i]) ++j;
    const long long t = j - i + 1;
    total += t * (t - 1) / 2;
    i = j + 1;
  }
  return total;
}

}  // namespace

CorrelationResult kendall(const std::vector<double>& a,
                          const std::vector<double>& b) {
  check_pair(a, b);
  require(!is_constant(a) && !is_constant(b), ErrorKind::InvalidArgument,
          "correlation undefined for a constant vector");

  const int n = static_cast<int>(a.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int i, int j) {
    if (a[i] != a[j]) return a[i] < a[j];
    return b[i] < b[j];
  });

  std::vector<double> sa(n), sb(n);
  for (int i = 0; i < n; ++i) {
    sa[i] = a[idx[i]];
    sb[i] = b[idx[i]];
  }

  // Joint ties, then ties in a, then discordant pairs as merge-sort swaps
  // over b (Knight's algorithm).
  long long n3 = 0;
  {
    int i = 0;
    while (i < n) {
      int j = i;
      while (j + 1 < n && sa[j + 1] == sa[i] && sb[j + 1] == sb[i]) ++j;
      const long long t = j - i + 1;
      n3 += t * (t - 1) / 2;
      i = j + 1;
    }
  }
  const long long n1 = tie_pairs(sa);

  std::vector<double> bs = sb, tmp(n);
  const long long swaps = merge_count(bs, tmp, 0, n);
  const long long n2 = tie_pairs(bs);  // bs is sorted now

  const long long n0 = static_cast<long long>(n) * (n - 1) / 2;
  const long long num = n0 - n1 - n2 + n3 - 2 * swaps;  // nc - nd
  const double denom = std::sqrt(static_cast<double>(n0 - n1)) *
                       std::sqrt(static_cast<double>(n0 - n2));
  require(denom > 0.0, ErrorKind::InvalidArgument,
          "tau-b undefined: all values tied");

  CorrelationResult r;
  r.method = CorrelationMethod::KendallTauB;
  r.n = n;
  r.coefficient = static_cast<double>(num) / denom;
  const double var = static_cast<double>(n) * (n - 1) * (2.0 * n + 5.0) / 18.0;
  r.p_value = two_sided_p(static_cast<double>(num) / std::sqrt(var));
  return r;
}

double top_k_accuracy(const Eigen::MatrixXd& scores,
                      const std::vector<int>& labels, int k) {
  const int n = static_cast<int>(scores.rows());
  const int c = static_cast<int>(scores.cols());
  require(n >= 1, ErrorKind::InvalidArgument, "empty score matrix");
  require(static_cast<int>(labels.size()) == n, ErrorKind::InvalidArgument,
          "label length mismatch");
  require(k >= 1 && k <= c, ErrorKind::InvalidArgument, "k out of [1, C]");

  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    require(y >= 0 && y < c, ErrorKind::InvalidArgument, "label out of range");
    const double sy = scores(i, y);
    int ahead = 0;  // classes ranked strictly before the label
    for (int j = 0; j < c; ++j) {
      if (j == y) continue;
      if (scores(i, j) > sy || (scores(i, j) == sy && j < y)) ++ahead;
    }
    if (ahead < k) ++hits;
  }
  return static_cast<double>(hits) / n;
}

}  // namespace angap
