#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ctmsm {

struct ScalarOptResult {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Brent's golden-section / parabolic search for a maximum of f on [lo, hi].
ScalarOptResult brent_maximize(const std::function<double(double)>& f, double lo, double hi, double xtol,
                               int max_iterations = 200);

// Objective returning f(x) and writing its gradient into `grad`.
using ValueAndGradient = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct QuasiNewtonOptions {
  int max_iterations = 500;
  double grad_tol = 1e-6;  // max-norm of the gradient at convergence
};

struct QuasiNewtonResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<std::string> trace;
};

// Newton ascent on finite differences of the analytic gradient, falling back
// to BFGS updates where that Hessian is not negative definite. Backtracking
// Armijo line search.
QuasiNewtonResult maximize_quasi_newton(const ValueAndGradient& f, Eigen::VectorXd x0,
                                        const QuasiNewtonOptions& options = {});

// Hessian by central differences of an analytic gradient, symmetrized.
Eigen::MatrixXd hessian_from_gradient(const ValueAndGradient& f, const Eigen::VectorXd& x, double step = 1e-5);

// Hessian by central differences of function values.
Eigen::MatrixXd hessian_from_values(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x, const Eigen::VectorXd& steps);

}  // namespace ctmsm
