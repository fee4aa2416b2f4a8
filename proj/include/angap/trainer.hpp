#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "angap/curriculum.hpp"
#include "angap/dataset.hpp"
#include "angap/geometry.hpp"
#include "angap/report.hpp"

namespace angap {

// Hyperspherical classifier head: an optional hidden layer feeding a
// bias-free class-weight matrix, with logits s * cos(theta).
struct HypersphereModel {
  ClassWeights weights;          // feature_dim x C
  double scale = 30.0;           // s > 0
  Eigen::MatrixXd hidden;        // hidden_width x input_dim; empty = linear head
  bool hidden_nonlinear = true;  // tanh when true, identity otherwise

  bool has_hidden() const { return hidden.size() > 0; }
  int input_dim() const {
    return has_hidden() ? static_cast<int>(hidden.cols()) : weights.dim();
  }
  int class_count() const { return weights.class_count(); }

  /// Feature embedding seen by the class weights.
  Eigen::VectorXd embed(const Eigen::VectorXd& x) const;
  AngleProfile profile(const Eigen::VectorXd& x) const;
  Eigen::VectorXd logits(const Eigen::VectorXd& x) const;
  int predict(const Eigen::VectorXd& x) const;
};

enum class Annealing { Cosine, Constant };

struct TrainConfig {
  int epochs = 100;
  int batch_size = 128;
  double initial_learning_rate = 0.1;
  Annealing annealing = Annealing::Cosine;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  double scale = 30.0;
  int hidden_width = 0;  // 0 = linear head

  void validate() const;
};

struct LearningDynamics {
  std::vector<int> forgetting;       // per example, dataset order
  std::vector<bool> last_correct;    // correctness at the latest evaluation
  std::vector<std::string> ids;      // aligned with the two vectors above
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
  int visible = 0;
};

struct TrainResult {
  HypersphereModel model;
  LearningDynamics dynamics;
  std::vector<EpochStats> history;
};

// Easy-to-hard order plus pacing for paced data loading; the order is a
// permutation of dataset ids precomputed from difficulty scores.
struct PacedLoading {
  PacingFunction pacing;
  std::vector<std::string> easy_to_hard_ids;
};

struct Gradients {
  Eigen::MatrixXd d_weights;
  Eigen::MatrixXd d_hidden;  // empty for a linear head
};

/// Mean normalized softmax loss over a batch plus gradients with respect to
/// all trainable parameters. Optional per-example weights multiply each
/// sample's loss contribution.
std::pair<double, Gradients> nsl_loss_and_grad(
    const HypersphereModel& model, const Eigen::MatrixXd& features,
    const std::vector<int>& labels,
    const std::vector<double>* example_weights = nullptr);

HypersphereModel init_model(int input_dim, int class_count,
                            const TrainConfig& config);

/// Mini-batch SGD with momentum, weight decay and optional cosine annealing.
/// With paced loading each epoch draws from the first g(epoch) examples of
/// the easy-to-hard order. Reproducible bit-for-bit under a fixed seed.
TrainResult train(const EmbeddingDataset& dataset, const TrainConfig& config,
                  const PacedLoading* schedule = nullptr);

double dataset_accuracy(const HypersphereModel& model,
                        const EmbeddingDataset& dataset);

/// Per-example difficulty scores (raw gap, AVH, confidence, margin and
/// forgetting counts when dynamics are supplied), ordered by id.
DifficultyReport score_dataset(const HypersphereModel& model,
                               const EmbeddingDataset& dataset,
                               const LearningDynamics* dynamics = nullptr);

}  // namespace angap
