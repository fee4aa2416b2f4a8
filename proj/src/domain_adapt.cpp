#include "angap/domain_adapt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace angap {

double Kernel::operator()(const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y) const {
  if (kind == KernelKind::Linear) return x.dot(y);
  require(!bandwidths.empty(), ErrorKind::InvalidArgument,
          "rbf kernel needs at least one bandwidth");
  const double d2 = (x - y).squaredNorm();
  double k = 0.0;
  for (double sigma : bandwidths) {
    require(sigma > 0.0, ErrorKind::InvalidArgument,
            "bandwidth must be positive");
    k += std::exp(-d2 / (2.0 * sigma * sigma));
  }
  return k / bandwidths.size();
}

Eigen::MatrixXd Kernel::gram(const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& b) const {
  require(a.rows() == b.rows(), ErrorKind::DimensionMismatch,
          "kernel inputs have different dimension");
  Eigen::MatrixXd g(a.cols(), b.cols());
  for (int i = 0; i < a.cols(); ++i)
    for (int j = 0; j < b.cols(); ++j) g(i, j) = (*this)(a.col(i), b.col(j));
  return g;
}

std::vector<double> median_heuristic_bandwidths(const Eigen::MatrixXd& s,
                                                const Eigen::MatrixXd& t) {
  Eigen::MatrixXd pooled(s.rows(), s.cols() + t.cols());
  pooled << s, t;
  std::vector<double> dists;
  for (int i = 0; i < pooled.cols(); ++i)
    for (int j = i + 1; j < pooled.cols(); ++j)
      dists.push_back((pooled.col(i) - pooled.col(j)).norm());
  require(!dists.empty(), ErrorKind::InvalidArgument,
          "need at least two pooled samples");
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2,
                   dists.end());
  double base = dists[dists.size() / 2];
  if (base <= 0.0) base = 1.0;
  return {0.25 * base, 0.5 * base, base, 2.0 * base, 4.0 * base};
}

double mmd(const Kernel& kernel, const Eigen::MatrixXd& batch_s,
           const Eigen::MatrixXd& batch_t) {
  require(batch_s.cols() >= 1 && batch_t.cols() >= 1,
          ErrorKind::InvalidArgument, "empty batch");
  require(batch_s.rows() == batch_t.rows(), ErrorKind::DimensionMismatch,
          "batch dimension mismatch");
  const double kss = kernel.gram(batch_s, batch_s).mean();
  const double kst = kernel.gram(batch_s, batch_t).mean();
  const double ktt = kernel.gram(batch_t, batch_t).mean();
  return kss - 2.0 * kst + ktt;
}

namespace {

// |mu_S - mu_T|^2_H for fixed mean-embedding weights a, b (each summing to
// 1), with optional gradients with respect to the sample coordinates.
double weighted_mmd(const Kernel& kernel, const Eigen::MatrixXd& s,
                    const Eigen::VectorXd& a, const Eigen::MatrixXd& t,
                    const Eigen::VectorXd& b, Eigen::MatrixXd* grad_s,
                    Eigen::MatrixXd* grad_t) {
  const Eigen::MatrixXd kss = kernel.gram(s, s);
  const Eigen::MatrixXd kst = kernel.gram(s, t);
  const Eigen::MatrixXd ktt = kernel.gram(t, t);
  const double value = a.dot(kss * a) - 2.0 * a.dot(kst * b) + b.dot(ktt * b);
  if (!grad_s && !grad_t) return value;

  auto dk = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                double kxy) -> Eigen::VectorXd {
    // gradient of k(x, y) with respect to x
    if (kernel.kind == KernelKind::Linear) return y;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    const Eigen::VectorXd diff = x - y;
    const double d2 = diff.squaredNorm();
    for (double sigma : kernel.bandwidths)
      g += std::exp(-d2 / (2.0 * sigma * sigma)) * (-diff / (sigma * sigma));
    (void)kxy;
    return g / kernel.bandwidths.size();
  };

  if (grad_s) {
    for (int i = 0; i < s.cols(); ++i) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(s.rows());
      for (int j = 0; j < s.cols(); ++j) {
        if (j == i) continue;
        g += 2.0 * a[i] * a[j] * dk(s.col(i), s.col(j), kss(i, j));
      }
      for (int j = 0; j < t.cols(); ++j)
        g -= 2.0 * a[i] * b[j] * dk(s.col(i), t.col(j), kst(i, j));
      grad_s->col(i) += g;
    }
  }
  if (grad_t) {
    for (int j = 0; j < t.cols(); ++j) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(t.rows());
      for (int i = 0; i < t.cols(); ++i) {
        if (i == j) continue;
        g += 2.0 * b[j] * b[i] * dk(t.col(j), t.col(i), ktt(j, i));
      }
      for (int i = 0; i < s.cols(); ++i)
        g -= 2.0 * a[i] * b[j] * dk(t.col(j), s.col(i), kst(i, j));
      grad_t->col(j) += g;
    }
  }
  return value;
}

}  // namespace

double curricular_local_mmd(const Kernel& kernel, const Eigen::MatrixXd& batch_s,
                            const std::vector<int>& labels_s,
                            const std::vector<double>& example_weights,
                            const Eigen::MatrixXd& batch_t,
                            const Eigen::MatrixXd& pseudo_probs_t,
                            const Eigen::VectorXd& class_weights,
                            Eigen::MatrixXd* grad_s, Eigen::MatrixXd* grad_t) {
  const int ns = static_cast<int>(batch_s.cols());
  const int nt = static_cast<int>(batch_t.cols());
  const int c = static_cast<int>(pseudo_probs_t.cols());
  require(ns >= 1 && nt >= 1, ErrorKind::InvalidArgument, "empty batch");
  require(batch_s.rows() == batch_t.rows(), ErrorKind::DimensionMismatch,
          "batch dimension mismatch");
  require(static_cast<int>(labels_s.size()) == ns, ErrorKind::InvalidArgument,
          "source label length mismatch");
  require(static_cast<int>(example_weights.size()) == ns,
          ErrorKind::InvalidArgument, "example weight length mismatch");
  require(pseudo_probs_t.rows() == nt, ErrorKind::InvalidArgument,
          "pseudo-probability row count mismatch");
  for (int i = 0; i < nt; ++i)
    require(std::abs(pseudo_probs_t.row(i).sum() - 1.0) <= 1e-6,
            ErrorKind::InvalidArgument, "pseudo-probability row must sum to 1");

  Eigen::VectorXd u = class_weights;
  if (u.size() == 0) u = Eigen::VectorXd::Constant(c, 1.0 / c);
  require(u.size() == c, ErrorKind::DimensionMismatch,
          "class weight length mismatch");

  if (grad_s) *grad_s = Eigen::MatrixXd::Zero(batch_s.rows(), ns);
  if (grad_t) *grad_t = Eigen::MatrixXd::Zero(batch_t.rows(), nt);

  double total = 0.0;
  bool any_class = false;
  for (int k = 0; k < c; ++k) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(ns);
    for (int i = 0; i < ns; ++i)
      if (labels_s[i] == k) a[i] = example_weights[i];
    Eigen::VectorXd b = pseudo_probs_t.col(k);
    const double sa = a.sum(), sb = b.sum();
    if (sa <= 0.0 || sb <= 0.0) continue;  // zero-weight class contributes 0
    any_class = true;
    a /= sa;
    b /= sb;
    Eigen::MatrixXd gs, gt;
    if (grad_s) gs = Eigen::MatrixXd::Zero(batch_s.rows(), ns);
    if (grad_t) gt = Eigen::MatrixXd::Zero(batch_t.rows(), nt);
    total += u[k] * weighted_mmd(kernel, batch_s, a, batch_t, b,
                                 grad_s ? &gs : nullptr,
                                 grad_t ? &gt : nullptr);
    if (grad_s) *grad_s += u[k] * gs;
    if (grad_t) *grad_t += u[k] * gt;
  }
  require(any_class, ErrorKind::DegenerateGeometry,
          "every class has zero weight on one side");
  return total;
}

double local_mmd(const Kernel& kernel, const Eigen::MatrixXd& batch_s,
                 const std::vector<int>& labels_s,
                 const Eigen::MatrixXd& batch_t,
                 const Eigen::MatrixXd& pseudo_probs_t,
                 const Eigen::VectorXd& class_weights) {
  const std::vector<double> unit(batch_s.cols(), 1.0);
  return curricular_local_mmd(kernel, batch_s, labels_s, unit, batch_t,
                              pseudo_probs_t, class_weights);
}

double curricular_reverse_loss(const Eigen::MatrixXd& batch_s,
                               const std::vector<int>& labels_s,
                               const Eigen::MatrixXd& batch_t,
                               const std::vector<int>& pseudo_labels_t,
                               const std::vector<double>& example_weights,
                               int class_count, Eigen::MatrixXd* grad_s,
                               Eigen::MatrixXd* grad_t) {
  const int ns = static_cast<int>(batch_s.cols());
  const int nt = static_cast<int>(batch_t.cols());
  require(ns >= 1 && nt >= 1, ErrorKind::InvalidArgument, "empty batch");
  require(batch_s.rows() == batch_t.rows(), ErrorKind::DimensionMismatch,
          "batch dimension mismatch");
  require(static_cast<int>(labels_s.size()) == ns &&
              static_cast<int>(example_weights.size()) == ns,
          ErrorKind::InvalidArgument, "source side length mismatch");
  require(static_cast<int>(pseudo_labels_t.size()) == nt,
          ErrorKind::InvalidArgument, "pseudo-label length mismatch");
  for (int i = 0; i < ns; ++i)
    require(labels_s[i] >= 0 && labels_s[i] < class_count,
            ErrorKind::InvalidArgument, "source label out of range");
  for (int j = 0; j < nt; ++j)
    require(pseudo_labels_t[j] >= 0 && pseudo_labels_t[j] < class_count,
            ErrorKind::InvalidArgument, "pseudo-label out of range");
  for (double w : example_weights)
    require(w >= 0.0 && w <= 1.0, ErrorKind::InvalidArgument,
            "example weight outside [0, 1]");

  Eigen::VectorXd norm_s(ns), norm_t(nt);
  for (int i = 0; i < ns; ++i) {
    norm_s[i] = batch_s.col(i).norm();
    require(norm_s[i] > 0.0, ErrorKind::DegenerateGeometry,
            "zero-norm source feature");
  }
  for (int j = 0; j < nt; ++j) {
    norm_t[j] = batch_t.col(j).norm();
    require(norm_t[j] > 0.0, ErrorKind::DegenerateGeometry,
            "zero-norm target feature");
  }

  if (grad_s) grad_s->setZero(batch_s.rows(), ns);
  if (grad_t) grad_t->setZero(batch_t.rows(), nt);

  double loss = 0.0;
  for (int i = 0; i < ns; ++i) {
    for (int j = 0; j < nt; ++j) {
      const double c =
          batch_s.col(i).dot(batch_t.col(j)) / (norm_s[i] * norm_t[j]);
      const bool match = pseudo_labels_t[j] == labels_s[i];
      // |c * e_q - e_y|^2 = c^2 - 2 c [q == y] + 1
      loss += example_weights[i] * (c * c - 2.0 * c * (match ? 1.0 : 0.0) + 1.0);
      if (!grad_s && !grad_t) continue;
      const double dc = example_weights[i] * (2.0 * c - 2.0 * (match ? 1.0 : 0.0));
      if (grad_s)
        grad_s->col(i) += dc * (batch_t.col(j) / (norm_s[i] * norm_t[j]) -
                                c * batch_s.col(i) / (norm_s[i] * norm_s[i]));
      if (grad_t)
        grad_t->col(j) += dc * (batch_s.col(i) / (norm_s[i] * norm_t[j]) -
                                c * batch_t.col(j) / (norm_t[j] * norm_t[j]));
    }
  }
  return loss;
}

SelfTrainResult curricular_self_train(const DomainPair& pair,
                                      const SigmoidWeighting& schedule,
                                      const SelfTrainConfig& config) {
  pair.source.validate();
  require(pair.target_features.cols() >= 1, ErrorKind::InvalidArgument,
          "empty target domain");
  require(pair.target_features.rows() == pair.source.dim(),
          ErrorKind::DimensionMismatch, "domain dimension mismatch");
  require(config.epochs >= 1, ErrorKind::InvalidArgument, "epochs must be >= 1");

  const int d = pair.source.dim();
  const int c = pair.source.class_count;
  const int nt = static_cast<int>(pair.target_features.cols());

  // Source split: calibration holdout vs training part.
  std::vector<int> perm(pair.source.size());
  std::iota(perm.begin(), perm.end(), 0);
  auto split_rng = make_rng(config.seed, "uda-split");
  std::shuffle(perm.begin(), perm.end(), split_rng);
  const int n_hold = std::max(
      c, static_cast<int>(std::ceil(config.holdout_fraction * perm.size())));
  require(n_hold < static_cast<int>(perm.size()), ErrorKind::InvalidArgument,
          "holdout fraction leaves no training data");

  EmbeddingDataset hold, train_part;
  hold.class_count = train_part.class_count = c;
  for (size_t i = 0; i < perm.size(); ++i) {
    (i < static_cast<size_t>(n_hold) ? hold : train_part)
        .examples.push_back(pair.source.examples[perm[i]]);
  }
  const int ns = train_part.size();

  SelfTrainResult result;
  TrainConfig head_cfg;
  head_cfg.seed = config.seed;
  head_cfg.scale = config.scale;
  result.head = init_model(d, c, head_cfg);
  result.feature_map = Eigen::MatrixXd::Identity(d, d);

  Eigen::MatrixXd xs(d, ns);
  std::vector<int> ys(ns);
  for (int i = 0; i < ns; ++i) {
    xs.col(i) = train_part.examples[i].features;
    ys[i] = train_part.examples[i].label;
  }

  auto batch_rng = make_rng(config.seed, "uda-batch");
  Eigen::MatrixXd v_w = Eigen::MatrixXd::Zero(d, c);

  Kernel kernel;  // bandwidths fixed from the initial geometry
  {
    kernel.bandwidths =
        median_heuristic_bandwidths(xs, pair.target_features);
  }

  int collapse_streak = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const Eigen::MatrixXd fs = result.feature_map * xs;
    const Eigen::MatrixXd ft = result.feature_map * pair.target_features;

    // Calibration refit on the mapped holdout.
    EmbeddingDataset mapped_hold = hold;
    for (auto& ex : mapped_hold.examples)
      ex.features = result.feature_map * ex.features;
    CalibrationParams cal =
        CalibrationParams::identity(config.calibration, c);
    try {
      cal = fit_calibration(result.head, mapped_hold, config.calibration).first;
    } catch (const Error&) {
      // keep identity calibration if the fit degenerates this epoch
    }

    // Example weights from calibrated Angular Gap.
    std::vector<double> weights(ns);
    double weight_sum = 0.0;
    for (int i = 0; i < ns; ++i) {
      const AngleProfile p = result.head.profile(fs.col(i));
      const double gap = calibrated_angular_gap(cal, p, ys[i]);
      weights[i] = schedule.weight(epoch, gap);
      weight_sum += weights[i];
    }

    // (i) weighted NSL pass over the source.
    std::vector<int> order(ns);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), batch_rng);
    const int bs_size = 32;
    for (int start = 0; start < ns; start += bs_size) {
      const int bs = std::min(bs_size, ns - start);
      Eigen::MatrixXd batch(d, bs);
      std::vector<int> labels(bs);
      std::vector<double> w(bs);
      for (int j = 0; j < bs; ++j) {
        batch.col(j) = fs.col(order[start + j]);
        labels[j] = ys[order[start + j]];
        w[j] = weights[order[start + j]];
      }
      auto [loss, grads] = nsl_loss_and_grad(result.head, batch, labels, &w);
      (void)loss;
      v_w = config.momentum * v_w - config.head_learning_rate * grads.d_weights;
      result.head.weights.columns += v_w;
    }

    // (ii) pseudo-labels from calibrated similarities.
    std::vector<int> pseudo(nt);
    Eigen::MatrixXd pseudo_probs(nt, c);
    std::vector<int> class_hist(c, 0);
    for (int j = 0; j < nt; ++j) {
      const AngleProfile p = result.head.profile(ft.col(j));
      const Eigen::VectorXd xi = apply_calibration(cal, p.cosines);
      int arg = 0;
      xi.maxCoeff(&arg);
      pseudo[j] = arg;
      ++class_hist[arg];
      pseudo_probs.row(j) =
          stable_softmax(config.scale * xi).transpose();
    }
    const bool collapsed =
        *std::max_element(class_hist.begin(), class_hist.end()) == nt;
    collapse_streak = collapsed ? collapse_streak + 1 : 0;

    // (iii) transfer step on the shared feature map.
    Eigen::MatrixXd gs, gt;
    curricular_reverse_loss(fs, ys, ft, pseudo, weights, c, &gs, &gt);
    Eigen::MatrixXd d_map = (gs * xs.transpose() +
                             gt * pair.target_features.transpose()) /
                            (static_cast<double>(ns) * nt);
    if (config.use_local_mmd) {
      Eigen::MatrixXd ms, mt;
      curricular_local_mmd(kernel, fs, ys, weights, ft, pseudo_probs, {}, &ms,
                           &mt);
      d_map += ms * xs.transpose() + mt * pair.target_features.transpose();
    }
    result.feature_map -= config.transfer_learning_rate * d_map;

    // Trajectory bookkeeping.
    SelfTrainEpoch row;
    row.epoch = epoch;
    {
      const Eigen::MatrixXd fs2 = result.feature_map * xs;
      int ok = 0;
      for (int i = 0; i < ns; ++i)
        if (result.head.predict(fs2.col(i)) == ys[i]) ++ok;
      row.source_accuracy = static_cast<double>(ok) / ns;

      const Eigen::MatrixXd ft2 = result.feature_map * pair.target_features;
      if (!pair.target_eval_labels.empty()) {
        require(static_cast<int>(pair.target_eval_labels.size()) == nt,
                ErrorKind::InvalidArgument, "target eval label count mismatch");
        int tok = 0;
        for (int j = 0; j < nt; ++j)
          if (result.head.predict(ft2.col(j)) == pair.target_eval_labels[j])
            ++tok;
        row.target_accuracy = static_cast<double>(tok) / nt;
      } else {
        row.target_accuracy = std::numeric_limits<double>::quiet_NaN();
      }
      row.mmd_value = mmd(kernel, fs2, ft2);
    }
    row.mean_example_weight = weight_sum / ns;
    row.pseudo_label_collapse = collapse_streak >= 3;
    result.trajectory.push_back(row);
  }

  return result;
}

}  // namespace angap
