#include "angap/optimizer.hpp"

#include <cmath>
#include <deque>

namespace angap {

namespace {

Eigen::VectorXd project(Eigen::VectorXd x, double lower) {
  return x.cwiseMax(lower);
}

}  // namespace

LbfgsResult minimize_projected_lbfgs(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>&
        value_and_grad,
    Eigen::VectorXd x0, const LbfgsOptions& options) {
  struct Pair {
    Eigen::VectorXd s, y;
    double rho;
  };
  std::deque<Pair> memory;

  Eigen::VectorXd x = project(std::move(x0), options.lower_bound);
  Eigen::VectorXd grad(x.size());
  double fx = value_and_grad(x, grad);
  require(std::isfinite(fx) && grad.allFinite(), ErrorKind::Numeric,
          "non-finite loss at initialization");

  LbfgsResult result;
  result.initial_value = fx;
  Eigen::VectorXd best_x = x;
  double best_f = fx;

  int consecutive_discards = 0;
  bool use_gd = false;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (grad.norm() <= options.grad_tol) {
      result.converged = true;
      break;
    }

    Eigen::VectorXd direction;
    if (use_gd || memory.empty()) {
      direction = -grad;
    } else {
      // two-loop recursion
      Eigen::VectorXd q = grad;
      std::vector<double> alpha(memory.size());
      for (int i = static_cast<int>(memory.size()) - 1; i >= 0; --i) {
        alpha[i] = memory[i].rho * memory[i].s.dot(q);
        q -= alpha[i] * memory[i].y;
      }
      const auto& last = memory.back();
      q *= last.s.dot(last.y) / last.y.squaredNorm();
      for (size_t i = 0; i < memory.size(); ++i) {
        const double beta = memory[i].rho * memory[i].y.dot(q);
        q += (alpha[i] - beta) * memory[i].s;
      }
      direction = -q;
      if (direction.dot(grad) >= 0.0) direction = -grad;  // not a descent dir
    }

    double alpha0 = (memory.empty() || use_gd) ? options.step : 1.0;
    const double dg = direction.dot(grad);

    double alpha = alpha0;
    Eigen::VectorXd x_new;
    Eigen::VectorXd grad_new(x.size());
    double f_new = fx;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = project(x + alpha * direction, options.lower_bound);
      f_new = value_and_grad(x_new, grad_new);
      if (std::isfinite(f_new) &&
          f_new <= fx + options.armijo_c * alpha * dg) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    ++result.iterations;
    if (!accepted) {
      result.converged = true;  // no further progress possible
      break;
    }

    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > options.curvature_tol) {
      memory.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(memory.size()) > options.history)
        memory.pop_front();
      consecutive_discards = 0;
    } else {
      ++consecutive_discards;
      if (consecutive_discards >= 2) use_gd = true;
    }

    x = std::move(x_new);
    grad = grad_new;
    fx = f_new;
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
    if (s.norm() <= 1e-14) {
      result.converged = true;
      break;
    }
  }

  result.x = best_x;
  result.final_value = best_f;
  result.fell_back_to_gd = use_gd;
  return result;
}

}  // namespace angap
