// Box-constrained quasi-Newton maximisation with central-difference derivatives.
#pragma once

#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

namespace gapfrail {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Central differences with h_i = rel_step * max(1, |x_i|).
Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x,
                                 double rel_step = 1e-4);
Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x,
                                double rel_step = 1e-4);

struct OptimizeOptions {
  int max_iter = 1000;
  int max_evals = 200'000;
  double grad_tol = 1e-6;       // on the projected gradient, infinity norm
  double rel_step = 1e-5;       // finite-difference step for the gradient
  Eigen::VectorXd lower, upper; // empty means unbounded
};

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool at_bound = false;
};

/// BFGS ascent with projection onto the box. Throws NumericalError if f(x0) is not
/// finite or the evaluation budget runs out.
OptimizeResult maximize_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                             const OptimizeOptions& options = {});

}  // namespace gapfrail
