#pragma once

#include <Eigen/Dense>
#include <set>
#include <string>

#include "angap/dataset.hpp"
#include "angap/geometry.hpp"
#include "angap/optimizer.hpp"
#include "angap/report.hpp"
#include "angap/trainer.hpp"

namespace angap {

enum class CalibrationKind { Global, Classwise, Temperature };

CalibrationKind parse_calibration_kind(const std::string& name);
std::string calibration_kind_name(CalibrationKind kind);

// Post-training rescaling of hyperspherical similarities. Global multiplies
// every cosine by a single scalar, class-wise by a per-class vector; the
// temperature variant divides plain logits by T. Identity parameters
// reproduce raw scores exactly. Calibrated similarities are logit-like and
// may leave [-1, 1].
struct CalibrationParams {
  CalibrationKind kind = CalibrationKind::Global;
  double global_scale = 1.0;       // s_t, kind = Global
  Eigen::VectorXd class_scales;    // per-class s, kind = Classwise
  double temperature = 1.0;        // T > 0, kind = Temperature

  static CalibrationParams identity(CalibrationKind kind, int class_count);
  bool is_angle_kind() const { return kind != CalibrationKind::Temperature; }
};

struct CalibrationFitReport {
  int iterations = 0;
  double initial_nll = 0.0;
  double final_nll = 0.0;
  double initial_ece = 0.0;
  double final_ece = 0.0;
  bool converged = false;
};

/// Calibrated similarity vector: s_t * cos(theta) (global), s_k * cos(theta_k)
/// (class-wise), or logits / T (temperature).
Eigen::VectorXd apply_calibration(const CalibrationParams& params,
                                  const Eigen::VectorXd& cosines_or_logits);

/// Eq.-style calibrated gap: cos(xi_label) - max_{k != label} cos(xi_k).
double calibrated_angular_gap(const CalibrationParams& params,
                              const AngleProfile& profile, int label);

struct FitCalibrationOptions {
  LbfgsOptions optimizer;          // defaults: 10 iterations, step 0.01
  int ece_bins = 15;
  const std::set<std::string>* train_ids = nullptr;  // overlap check if set
};

/// Fits the calibration parameters by minimizing the holdout NLL of
/// softmax(s * (scale .* cos)) with the model frozen. Limited-memory
/// quasi-Newton with projection to strictly positive scales, gradient
/// descent fallback on degenerate curvature.
std::pair<CalibrationParams, CalibrationFitReport> fit_calibration(
    const HypersphereModel& model, const EmbeddingDataset& holdout,
    CalibrationKind kind, const FitCalibrationOptions& options = {});

/// Calibration NLL and gradient over precomputed cosines (rows = samples).
/// Exposed for gradient checking.
double calibration_nll(const Eigen::MatrixXd& cosines,
                       const std::vector<int>& labels, double model_scale,
                       CalibrationKind kind, const Eigen::VectorXd& params,
                       Eigen::VectorXd* grad = nullptr);

/// Fills the calibrated_gap column of a difficulty report.
void add_calibrated_gaps(const HypersphereModel& model,
                         const EmbeddingDataset& dataset,
                         const CalibrationParams& params,
                         DifficultyReport& report);

/// Holdout ECE of the (optionally calibrated) model's softmax confidence.
double model_ece(const HypersphereModel& model, const EmbeddingDataset& data,
                 const CalibrationParams* params = nullptr, int bins = 15);

}  // namespace angap
