#include "angap/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace angap {

Eigen::VectorXd HypersphereModel::embed(const Eigen::VectorXd& x) const {
  if (!has_hidden()) return x;
  Eigen::VectorXd z = hidden * x;
  if (hidden_nonlinear) z = z.array().tanh();
  return z;
}

AngleProfile HypersphereModel::profile(const Eigen::VectorXd& x) const {
  return angle_profile(embed(x), weights);
}

Eigen::VectorXd HypersphereModel::logits(const Eigen::VectorXd& x) const {
  return scale * profile(x).cosines;
}

int HypersphereModel::predict(const Eigen::VectorXd& x) const {
  int best = 0;
  Eigen::VectorXd c = profile(x).cosines;
  c.maxCoeff(&best);
  return best;
}

void TrainConfig::validate() const {
  require(epochs >= 1, ErrorKind::InvalidArgument, "epochs must be >= 1");
  require(batch_size >= 1, ErrorKind::InvalidArgument, "batch size must be >= 1");
  require(initial_learning_rate > 0.0, ErrorKind::InvalidArgument,
          "learning rate must be positive");
  require(momentum >= 0.0 && momentum < 1.0, ErrorKind::InvalidArgument,
          "momentum must lie in [0, 1)");
  require(weight_decay >= 0.0, ErrorKind::InvalidArgument,
          "weight decay must be nonnegative");
  require(scale > 0.0, ErrorKind::InvalidArgument, "scale must be positive");
  require(hidden_width >= 0, ErrorKind::InvalidArgument,
          "hidden width must be nonnegative");
}

std::pair<double, Gradients> nsl_loss_and_grad(
    const HypersphereModel& model, const Eigen::MatrixXd& features,
    const std::vector<int>& labels, const std::vector<double>* example_weights) {
  const int n = static_cast<int>(features.cols());
  const int c = model.class_count();
  require(n >= 1, ErrorKind::InvalidArgument, "empty batch");
  require(static_cast<int>(labels.size()) == n, ErrorKind::InvalidArgument,
          "labels/features length mismatch");
  require(features.rows() == model.input_dim(), ErrorKind::DimensionMismatch,
          "feature dimension does not match model input");
  if (example_weights) {
    require(static_cast<int>(example_weights->size()) == n,
            ErrorKind::InvalidArgument, "example weight length mismatch");
  }

  Gradients grads;
  grads.d_weights = Eigen::MatrixXd::Zero(model.weights.dim(), c);
  if (model.has_hidden())
    grads.d_hidden = Eigen::MatrixXd::Zero(model.hidden.rows(), model.hidden.cols());

  Eigen::VectorXd weight_norms(c);
  for (int k = 0; k < c; ++k) {
    weight_norms[k] = model.weights.columns.col(k).norm();
    require(weight_norms[k] > 0.0, ErrorKind::DegenerateGeometry,
            "zero-norm weight column");
  }

  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    require(y >= 0 && y < c, ErrorKind::InvalidArgument, "label out of range");
    const double wi = example_weights ? (*example_weights)[i] : 1.0;

    const Eigen::VectorXd x = features.col(i);
    Eigen::VectorXd pre;  // hidden pre-activation
    Eigen::VectorXd f;
    if (model.has_hidden()) {
      pre = model.hidden * x;
      f = model.hidden_nonlinear ? pre.array().tanh().matrix() : pre;
    } else {
      f = x;
    }
    const double fn = f.norm();
    require(fn > 0.0, ErrorKind::DegenerateGeometry,
            "zero-norm embedding at batch index " + std::to_string(i));

    Eigen::VectorXd cos(c);
    for (int k = 0; k < c; ++k)
      cos[k] = f.dot(model.weights.columns.col(k)) / (fn * weight_norms[k]);
    require(cos.allFinite(), ErrorKind::Numeric,
            "non-finite cosine at batch index " + std::to_string(i));

    const Eigen::VectorXd p = stable_softmax(model.scale * cos);
    const double li = -std::log(std::max(p[y], 1e-300));
    require(std::isfinite(li), ErrorKind::Numeric,
            "non-finite loss at batch index " + std::to_string(i));
    loss += wi * li;

    // dL/dcos_k = s * (p_k - [k == y]), scaled by the batch-mean factor.
    Eigen::VectorXd dcos = model.scale * p;
    dcos[y] -= model.scale;
    dcos *= wi / n;

    Eigen::VectorXd df = Eigen::VectorXd::Zero(f.size());
    for (int k = 0; k < c; ++k) {
      const Eigen::VectorXd& wk = model.weights.columns.col(k);
      grads.d_weights.col(k) +=
          dcos[k] * (f / (fn * weight_norms[k]) -
                     cos[k] * wk / (weight_norms[k] * weight_norms[k]));
      df += dcos[k] * (wk / (fn * weight_norms[k]) - cos[k] * f / (fn * fn));
    }

    if (model.has_hidden()) {
      Eigen::VectorXd dz = df;
      if (model.hidden_nonlinear)
        dz = df.array() * (1.0 - f.array().square());
      grads.d_hidden += dz * x.transpose();
    }
  }

  return {loss / n, std::move(grads)};
}

HypersphereModel init_model(int input_dim, int class_count,
                            const TrainConfig& config) {
  auto rng = make_rng(config.seed, "init");
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int feat_dim = config.hidden_width > 0 ? config.hidden_width : input_dim;
  Eigen::MatrixXd w(feat_dim, class_count);
  for (int k = 0; k < class_count; ++k) {
    for (int i = 0; i < feat_dim; ++i) w(i, k) = gauss(rng);
    w.col(k).normalize();  // unit columns so initial cosines sit near zero
  }

  HypersphereModel model{ClassWeights::validated(std::move(w))};
  model.scale = config.scale;
  if (config.hidden_width > 0) {
    model.hidden.resize(config.hidden_width, input_dim);
    const double sd = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (int i = 0; i < model.hidden.rows(); ++i)
      for (int j = 0; j < model.hidden.cols(); ++j)
        model.hidden(i, j) = sd * gauss(rng);
    model.hidden_nonlinear = true;
  }
  return model;
}

double dataset_accuracy(const HypersphereModel& model,
                        const EmbeddingDataset& dataset) {
  int correct = 0;
  for (const auto& ex : dataset.examples)
    if (model.predict(ex.features) == ex.label) ++correct;
  return static_cast<double>(correct) / dataset.size();
}

TrainResult train(const EmbeddingDataset& dataset, const TrainConfig& config,
                  const PacedLoading* schedule) {
  dataset.validate();
  config.validate();

  const int n = dataset.size();
  TrainResult result;
  result.model = init_model(dataset.dim(), dataset.class_count, config);
  result.dynamics.forgetting.assign(n, 0);
  result.dynamics.last_correct.assign(n, false);
  result.dynamics.ids.reserve(n);
  for (const auto& ex : dataset.examples) result.dynamics.ids.push_back(ex.id);

  // Dataset-order index for each id in the easy-to-hard sequence.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (schedule) {
    require(static_cast<int>(schedule->easy_to_hard_ids.size()) == n,
            ErrorKind::InvalidArgument,
            "paced order must be a permutation of the dataset");
    std::map<std::string, int> index;
    for (int i = 0; i < n; ++i) index[dataset.examples[i].id] = i;
    for (int i = 0; i < n; ++i) {
      auto it = index.find(schedule->easy_to_hard_ids[i]);
      require(it != index.end(), ErrorKind::InvalidArgument,
              "unknown id in paced order: " + schedule->easy_to_hard_ids[i]);
      order[i] = it->second;
    }
  }

  auto shuffle_rng = make_rng(config.seed, "shuffle");
  Eigen::MatrixXd v_w = Eigen::MatrixXd::Zero(result.model.weights.dim(),
                                              result.model.class_count());
  Eigen::MatrixXd v_h;
  if (result.model.has_hidden())
    v_h = Eigen::MatrixXd::Zero(result.model.hidden.rows(),
                                result.model.hidden.cols());

  bool first_eval = true;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double lr = config.initial_learning_rate;
    if (config.annealing == Annealing::Cosine)
      lr *= 0.5 * (1.0 + std::cos(M_PI * epoch / config.epochs));

    int visible = n;
    if (schedule) visible = schedule->pacing.pace_size(epoch);
    require(visible >= 1, ErrorKind::InvalidArgument,
            "empty visible subset under degenerate schedule");

    std::vector<int> epoch_order(order.begin(), order.begin() + visible);
    std::shuffle(epoch_order.begin(), epoch_order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < visible; start += config.batch_size) {
      const int bs = std::min(config.batch_size, visible - start);
      Eigen::MatrixXd batch(dataset.dim(), bs);
      std::vector<int> labels(bs);
      for (int j = 0; j < bs; ++j) {
        const Example& ex = dataset.examples[epoch_order[start + j]];
        batch.col(j) = ex.features;
        labels[j] = ex.label;
      }
      auto [loss, grads] = nsl_loss_and_grad(result.model, batch, labels);
      epoch_loss += loss;
      ++batches;

      v_w = config.momentum * v_w -
            lr * (grads.d_weights +
                  config.weight_decay * result.model.weights.columns);
      result.model.weights.columns += v_w;
      if (result.model.has_hidden()) {
        v_h = config.momentum * v_h -
              lr * (grads.d_hidden + config.weight_decay * result.model.hidden);
        result.model.hidden += v_h;
      }
    }

    // Learning dynamics: full-train-set evaluation once per epoch.
    int correct = 0;
    for (int i = 0; i < n; ++i) {
      const bool ok =
          result.model.predict(dataset.examples[i].features) ==
          dataset.examples[i].label;
      if (!first_eval && result.dynamics.last_correct[i] && !ok)
        ++result.dynamics.forgetting[i];
      result.dynamics.last_correct[i] = ok;
      if (ok) ++correct;
    }
    first_eval = false;

    result.history.push_back(EpochStats{
        epoch_loss / std::max(batches, 1),
        static_cast<double>(correct) / n, visible});
  }

  return result;
}

DifficultyReport score_dataset(const HypersphereModel& model,
                               const EmbeddingDataset& dataset,
                               const LearningDynamics* dynamics) {
  dataset.validate();
  require(dataset.dim() == model.input_dim(), ErrorKind::DimensionMismatch,
          "dataset dimension does not match model input");
  require(dataset.class_count == model.class_count(),
          ErrorKind::DimensionMismatch, "class count mismatch");

  std::map<std::string, int> forget;
  if (dynamics) {
    for (size_t i = 0; i < dynamics->ids.size(); ++i)
      forget[dynamics->ids[i]] = dynamics->forgetting[i];
  }

  DifficultyReport report;
  report.rows.reserve(dataset.size());
  for (const auto& ex : dataset.examples) {
    AngleProfile p = model.profile(ex.features);
    DifficultyRecord r;
    r.id = ex.id;
    r.label = ex.label;
    r.raw_gap = angular_gap(p, ex.label);
    r.avh = avh(p, ex.label);
    auto cm = confidence_and_margin(model.scale * p.cosines, ex.label);
    r.confidence = cm.confidence;
    r.margin = cm.margin;
    if (dynamics) {
      auto it = forget.find(ex.id);
      require(it != forget.end(), ErrorKind::InvalidArgument,
              "dynamics missing id " + ex.id);
      r.forgetting = it->second;
    }
    report.rows.push_back(std::move(r));
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const DifficultyRecord& a, const DifficultyRecord& b) {
              return a.id < b.id;
            });
  return report;
}

}  // namespace angap
