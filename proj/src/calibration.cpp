#include "angap/calibration.hpp"

#include <cmath>

#include "angap/metrics.hpp"

namespace angap {

CalibrationKind parse_calibration_kind(const std::string& name) {
  if (name == "global") return CalibrationKind::Global;
  if (name == "classwise") return CalibrationKind::Classwise;
  if (name == "temperature") return CalibrationKind::Temperature;
  throw Error(ErrorKind::InvalidArgument, "unknown calibration kind: " + name);
}

std::string calibration_kind_name(CalibrationKind kind) {
  switch (kind) {
    case CalibrationKind::Global: return "global";
    case CalibrationKind::Classwise: return "classwise";
    case CalibrationKind::Temperature: return "temperature";
  }
  return "unknown";
}

CalibrationParams CalibrationParams::identity(CalibrationKind kind,
                                              int class_count) {
  CalibrationParams p;
  p.kind = kind;
  if (kind == CalibrationKind::Classwise) {
    require(class_count >= 2, ErrorKind::InvalidArgument,
            "class-wise calibration needs C >= 2");
    p.class_scales = Eigen::VectorXd::Ones(class_count);
  }
  return p;
}

Eigen::VectorXd apply_calibration(const CalibrationParams& params,
                                  const Eigen::VectorXd& v) {
  switch (params.kind) {
    case CalibrationKind::Global:
      require(params.global_scale > 0.0, ErrorKind::InvalidArgument,
              "global scale must be positive");
      return params.global_scale * v;
    case CalibrationKind::Classwise:
      require(params.class_scales.size() == v.size(),
              ErrorKind::DimensionMismatch,
              "class-scale length does not match class count");
      require(params.class_scales.minCoeff() > 0.0, ErrorKind::InvalidArgument,
              "class scales must be positive");
      return params.class_scales.cwiseProduct(v);
    case CalibrationKind::Temperature:
      require(params.temperature > 0.0, ErrorKind::InvalidArgument,
              "temperature must be positive");
      return v / params.temperature;
  }
  throw Error(ErrorKind::InvalidArgument, "bad calibration kind");
}

double calibrated_angular_gap(const CalibrationParams& params,
                              const AngleProfile& profile, int label) {
  require(params.is_angle_kind(), ErrorKind::InvalidArgument,
          "calibrated gap needs a global or class-wise calibration");
  const Eigen::VectorXd xi = apply_calibration(params, profile.cosines);
  require(label >= 0 && label < xi.size(), ErrorKind::InvalidArgument,
          "label out of range");
  double best_other = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < xi.size(); ++k)
    if (k != label) best_other = std::max(best_other, xi[k]);
  return xi[label] - best_other;
}

double calibration_nll(const Eigen::MatrixXd& cosines,
                       const std::vector<int>& labels, double model_scale,
                       CalibrationKind kind, const Eigen::VectorXd& params,
                       Eigen::VectorXd* grad) {
  const int n = static_cast<int>(cosines.rows());
  const int c = static_cast<int>(cosines.cols());
  require(n >= 1 && static_cast<int>(labels.size()) == n,
          ErrorKind::InvalidArgument, "bad calibration batch");
  if (kind == CalibrationKind::Classwise)
    require(params.size() == c, ErrorKind::DimensionMismatch,
            "class-scale length does not match class count");
  else
    require(params.size() == 1, ErrorKind::InvalidArgument,
            "scalar calibration expects one parameter");

  if (grad) *grad = Eigen::VectorXd::Zero(params.size());
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    Eigen::VectorXd z(c);
    switch (kind) {
      case CalibrationKind::Global:
        z = model_scale * params[0] * cosines.row(i).transpose();
        break;
      case CalibrationKind::Classwise:
        z = model_scale *
            params.cwiseProduct(cosines.row(i).transpose()).eval();
        break;
      case CalibrationKind::Temperature:
        z = (model_scale / params[0]) * cosines.row(i).transpose();
        break;
    }
    const Eigen::VectorXd p = stable_softmax(z);
    loss += -std::log(std::max(p[y], 1e-300));
    if (!grad) continue;

    Eigen::VectorXd dz = p;  // dL_i/dz = p - onehot(y)
    dz[y] -= 1.0;
    switch (kind) {
      case CalibrationKind::Global:
        (*grad)[0] += model_scale * dz.dot(cosines.row(i).transpose());
        break;
      case CalibrationKind::Classwise:
        *grad += model_scale * dz.cwiseProduct(cosines.row(i).transpose());
        break;
      case CalibrationKind::Temperature:
        (*grad)[0] += dz.dot(cosines.row(i).transpose()) *
                      (-model_scale / (params[0] * params[0]));
        break;
    }
  }
  if (grad) *grad /= n;
  return loss / n;
}

namespace {

Eigen::MatrixXd cosine_matrix(const HypersphereModel& model,
                              const EmbeddingDataset& data) {
  Eigen::MatrixXd cos(data.size(), model.class_count());
  for (int i = 0; i < data.size(); ++i)
    cos.row(i) = model.profile(data.examples[i].features).cosines.transpose();
  return cos;
}

double ece_from_calibrated(const Eigen::MatrixXd& cosines,
                           const std::vector<int>& labels, double model_scale,
                           CalibrationKind kind, const Eigen::VectorXd& params,
                           int bins) {
  const int n = static_cast<int>(cosines.rows());
  std::vector<double> conf(n);
  std::vector<bool> hit(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd z;
    if (kind == CalibrationKind::Classwise)
      z = model_scale * params.cwiseProduct(cosines.row(i).transpose()).eval();
    else if (kind == CalibrationKind::Global)
      z = model_scale * params[0] * cosines.row(i).transpose();
    else
      z = (model_scale / params[0]) * cosines.row(i).transpose();
    const Eigen::VectorXd p = stable_softmax(z);
    int pred = 0;
    conf[i] = p.maxCoeff(&pred);
    hit[i] = pred == labels[i];
  }
  return ece(conf, hit, bins).ece;
}

}  // namespace

std::pair<CalibrationParams, CalibrationFitReport> fit_calibration(
    const HypersphereModel& model, const EmbeddingDataset& holdout,
    CalibrationKind kind, const FitCalibrationOptions& options) {
  holdout.validate();
  require(holdout.class_count == model.class_count(),
          ErrorKind::DimensionMismatch, "class count mismatch");
  if (options.train_ids) {
    for (const auto& ex : holdout.examples)
      require(options.train_ids->count(ex.id) == 0, ErrorKind::InvalidArgument,
              "holdout overlaps training split at id " + ex.id);
  }

  const Eigen::MatrixXd cosines = cosine_matrix(model, holdout);
  std::vector<int> labels(holdout.size());
  for (int i = 0; i < holdout.size(); ++i)
    labels[i] = holdout.examples[i].label;

  const int dim = kind == CalibrationKind::Classwise ? model.class_count() : 1;
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(dim);  // identity init

  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    return calibration_nll(cosines, labels, model.scale, kind, x, &g);
  };

  LbfgsResult opt = minimize_projected_lbfgs(objective, x0, options.optimizer);

  CalibrationParams params;
  params.kind = kind;
  if (kind == CalibrationKind::Classwise)
    params.class_scales = opt.x;
  else if (kind == CalibrationKind::Global)
    params.global_scale = opt.x[0];
  else
    params.temperature = opt.x[0];

  CalibrationFitReport report;
  report.iterations = opt.iterations;
  report.initial_nll = opt.initial_value;
  report.final_nll = opt.final_value;
  report.converged = opt.converged;
  report.initial_ece = ece_from_calibrated(cosines, labels, model.scale, kind,
                                           x0, options.ece_bins);
  report.final_ece = ece_from_calibrated(cosines, labels, model.scale, kind,
                                         opt.x, options.ece_bins);
  return {params, report};
}

void add_calibrated_gaps(const HypersphereModel& model,
                         const EmbeddingDataset& dataset,
                         const CalibrationParams& params,
                         DifficultyReport& report) {
  std::map<std::string, const Example*> by_id;
  for (const auto& ex : dataset.examples) by_id[ex.id] = &ex;
  for (auto& row : report.rows) {
    auto it = by_id.find(row.id);
    require(it != by_id.end(), ErrorKind::InvalidArgument,
            "report id not in dataset: " + row.id);
    const AngleProfile p = model.profile(it->second->features);
    row.calibrated_gap = calibrated_angular_gap(params, p, it->second->label);
  }
}

double model_ece(const HypersphereModel& model, const EmbeddingDataset& data,
                 const CalibrationParams* params, int bins) {
  const Eigen::MatrixXd cosines = cosine_matrix(model, data);
  std::vector<int> labels(data.size());
  for (int i = 0; i < data.size(); ++i) labels[i] = data.examples[i].label;
  Eigen::VectorXd x;
  CalibrationKind kind = CalibrationKind::Global;
  if (params) {
    kind = params->kind;
    if (kind == CalibrationKind::Classwise)
      x = params->class_scales;
    else if (kind == CalibrationKind::Global)
      x = Eigen::VectorXd::Constant(1, params->global_scale);
    else
      x = Eigen::VectorXd::Constant(1, params->temperature);
  } else {
    x = Eigen::VectorXd::Ones(1);
  }
  return ece_from_calibrated(cosines, labels, model.scale, kind, x, bins);
}

}  // namespace angap
