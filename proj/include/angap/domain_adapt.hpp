#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "angap/calibration.hpp"
#include "angap/curriculum.hpp"
#include "angap/dataset.hpp"
#include "angap/trainer.hpp"

namespace angap {

enum class KernelKind { Rbf, Linear };

// Multi-bandwidth RBF (averaged over bandwidths) or linear kernel. RBF uses
// k(x, y) = exp(-|x - y|^2 / (2 sigma^2)).
struct Kernel {
  KernelKind kind = KernelKind::Rbf;
  std::vector<double> bandwidths = {1.0};

  double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
  Eigen::MatrixXd gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const;
};

/// Median pairwise distance over the pooled batches, times {1/4, 1/2, 1, 2, 4}.
std::vector<double> median_heuristic_bandwidths(const Eigen::MatrixXd& s,
                                                const Eigen::MatrixXd& t);

/// Squared kernel mean discrepancy mean k(s,s') - 2 mean k(s,t) + mean k(t,t').
/// Columns are samples.
double mmd(const Kernel& kernel, const Eigen::MatrixXd& batch_s,
           const Eigen::MatrixXd& batch_t);

/// Class-conditional MMD: sum_k u_k * |mu_S,k - mu_T,k|^2_H, with source
/// class means from one-hot labels and target means from per-class
/// pseudo-probability columns (normalized within the batch). A class with
/// zero weight on either side contributes 0. Empty u = uniform 1/C.
double local_mmd(const Kernel& kernel, const Eigen::MatrixXd& batch_s,
                 const std::vector<int>& labels_s,
                 const Eigen::MatrixXd& batch_t,
                 const Eigen::MatrixXd& pseudo_probs_t,
                 const Eigen::VectorXd& class_weights = {});

/// local_mmd with each source sample's class-mean contribution additionally
/// multiplied by its example weight d_s before normalization.
double curricular_local_mmd(const Kernel& kernel, const Eigen::MatrixXd& batch_s,
                            const std::vector<int>& labels_s,
                            const std::vector<double>& example_weights,
                            const Eigen::MatrixXd& batch_t,
                            const Eigen::MatrixXd& pseudo_probs_t,
                            const Eigen::VectorXd& class_weights = {},
                            Eigen::MatrixXd* grad_s = nullptr,
                            Eigen::MatrixXd* grad_t = nullptr);

/// sum_s sum_t d_s * |cos(x_s, x_t) * yhat_t - y_s|^2 with one-hot labels
/// and pseudo-labels. Optional gradients with respect to both feature sets.
double curricular_reverse_loss(const Eigen::MatrixXd& batch_s,
                               const std::vector<int>& labels_s,
                               const Eigen::MatrixXd& batch_t,
                               const std::vector<int>& pseudo_labels_t,
                               const std::vector<double>& example_weights,
                               int class_count,
                               Eigen::MatrixXd* grad_s = nullptr,
                               Eigen::MatrixXd* grad_t = nullptr);

// Labeled source plus unlabeled target. Target labels travel in a separate
// evaluation-only field that the training path never reads.
struct DomainPair {
  EmbeddingDataset source;
  Eigen::MatrixXd target_features;            // d x Nt
  std::vector<int> target_eval_labels;        // evaluation only, may be empty
};

struct SelfTrainConfig {
  int epochs = 30;
  double head_learning_rate = 0.05;
  double transfer_learning_rate = 0.01;
  double momentum = 0.9;
  double scale = 30.0;
  std::uint64_t seed = 0;
  bool use_local_mmd = true;
  CalibrationKind calibration = CalibrationKind::Global;
  double holdout_fraction = 0.2;  // source fraction held out for calibration
};

struct SelfTrainEpoch {
  int epoch = 0;
  double source_accuracy = 0.0;
  double target_accuracy = 0.0;  // NaN when no evaluation labels
  double mmd_value = 0.0;
  double mean_example_weight = 0.0;
  bool pseudo_label_collapse = false;
};

struct SelfTrainResult {
  HypersphereModel head;
  Eigen::MatrixXd feature_map;  // shared linear map applied to both domains
  std::vector<SelfTrainEpoch> trajectory;
};

/// Toy curricular self-training loop: per epoch (i) weighted NSL training of
/// the head on mapped source features, (ii) pseudo-labels on the target via
/// argmax of calibrated similarities, (iii) a transfer gradient step on the
/// curricular reverse loss (plus optionally the curricular local MMD)
/// through the shared feature map, with weights from the sigmoid schedule on
/// calibrated Angular Gap. Deterministic per seed.
SelfTrainResult curricular_self_train(const DomainPair& pair,
                                      const SigmoidWeighting& schedule,
                                      const SelfTrainConfig& config);

}  // namespace angap
