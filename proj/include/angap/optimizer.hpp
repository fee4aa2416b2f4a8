#pragma once

#include <Eigen/Dense>
#include <functional>

#include "angap/common.hpp"

namespace angap {

struct LbfgsOptions {
  int max_iterations = 10;
  double step = 0.01;          // initial trial step on the first iteration
  int history = 10;
  double lower_bound = 1e-4;   // coordinates projected to [lower_bound, inf)
  double curvature_tol = 1e-10;
  double armijo_c = 1e-4;
  double grad_tol = 1e-10;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double initial_value = 0.0;
  double final_value = 0.0;
  int iterations = 0;
  bool converged = false;
  bool fell_back_to_gd = false;
};

/// Projected limited-memory quasi-Newton minimizer with Armijo backtracking.
/// Curvature pairs with inner product below curvature_tol are discarded; two
/// consecutive discards switch the search direction to steepest descent.
/// Never returns a point worse than the start.
LbfgsResult minimize_projected_lbfgs(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>&
        value_and_grad,
    Eigen::VectorXd x0, const LbfgsOptions& options = {});

}  // namespace angap
