#include "gapfrail/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gapfrail {

namespace {

double step_for(double x, double rel_step) { return rel_step * std::max(1.0, std::abs(x)); }

std::string format_point(const Eigen::VectorXd& x) {
  std::ostringstream os;
  os << '[';
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ']';
  return os.str();
}

}  // namespace

Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double rel_step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step_for(x[i], rel_step);
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double rel_step) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd H(n, n);
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) h[i] = step_for(x[i], rel_step);
  const double f0 = f(x);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    xp[i] = x[i] + h[i];
    const double fp = f(xp);
    xp[i] = x[i] - h[i];
    const double fm = f(xp);
    xp[i] = x[i];
    H(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      auto eval = [&](double si, double sj) {
        xp[i] = x[i] + si * h[i];
        xp[j] = x[j] + sj * h[j];
        const double v = f(xp);
        xp[i] = x[i];
        xp[j] = x[j];
        return v;
      };
      const double v = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * h[i] * h[j]);
      H(i, j) = v;
      H(j, i) = v;
    }
  }
  return H;
}

OptimizeResult maximize_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                             const OptimizeOptions& options) {
  const Eigen::Index n = x0.size();
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd lo = options.lower.size() == n ? options.lower : Eigen::VectorXd::Constant(n, -inf);
  Eigen::VectorXd hi = options.upper.size() == n ? options.upper : Eigen::VectorXd::Constant(n, inf);
  auto project = [&](Eigen::VectorXd v) { return v.cwiseMax(lo).cwiseMin(hi); };

  OptimizeResult r;
  // Minimise F = -f.
  auto F = [&](const Eigen::VectorXd& x) {
    if (++r.evaluations > options.max_evals)
      throw NumericalError("optimizer exceeded " + std::to_string(options.max_evals) +
                           " function evaluations");
    return -f(x);
  };
  // Central differences, falling back to a one-sided difference where a neighbour of
  // an accepted point leaves the objective's domain.
  auto gradient = [&](const Eigen::VectorXd& x, double fx0) {
    Eigen::VectorXd g(n);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = step_for(x[i], options.rel_step);
      xp[i] = x[i] + h;
      const double fp = F(xp);
      xp[i] = x[i] - h;
      const double fm = F(xp);
      xp[i] = x[i];
      if (std::isfinite(fp) && std::isfinite(fm))
        g[i] = (fp - fm) / (2.0 * h);
      else if (std::isfinite(fp))
        g[i] = (fp - fx0) / h;
      else if (std::isfinite(fm))
        g[i] = (fx0 - fm) / h;
      else
        throw NumericalError("non-finite gradient at " + format_point(x));
    }
    return g;
  };

  Eigen::VectorXd x = project(x0);
  double fx = F(x);
  if (!std::isfinite(fx)) throw NumericalError("objective is not finite at " + format_point(x));
  Eigen::VectorXd g = gradient(x, fx);
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);
  bool fresh = true;
  int stalled = 0;

  auto free_mask = [&](const Eigen::VectorXd& grad) {
    Eigen::VectorXd m = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((x[i] <= lo[i] && grad[i] > 0.0) || (x[i] >= hi[i] && grad[i] < 0.0)) m[i] = 0.0;
    }
    return m;
  };

  for (r.iterations = 0; r.iterations < options.max_iter; ++r.iterations) {
    const Eigen::VectorXd mask = free_mask(g);
    const Eigen::VectorXd pg = g.cwiseProduct(mask);
    r.grad_norm = pg.lpNorm<Eigen::Infinity>();
    if (r.grad_norm < options.grad_tol) {
      r.converged = true;
      break;
    }
    Eigen::VectorXd d = -(Hinv * pg).cwiseProduct(mask);
    if (d.dot(pg) >= 0.0) {
      Hinv.setIdentity();
      fresh = true;
      d = -pg;
    }
    const double dmax = d.lpNorm<Eigen::Infinity>();
    double t = dmax > 1.0 ? 1.0 / dmax : 1.0;

    Eigen::VectorXd x_new;
    double f_new = inf;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
      x_new = project(x + t * d);
      f_new = F(x_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * g.dot(x_new - x)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (fresh) break;
      Hinv.setIdentity();
      fresh = true;
      continue;
    }

    const Eigen::VectorXd g_new = gradient(x_new, f_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    stalled = std::abs(fx - f_new) <= 1e-15 * (1.0 + std::abs(fx)) ? stalled + 1 : 0;
    x = x_new;
    fx = f_new;
    g = g_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) Hinv *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) +
             rho * s * s.transpose();
      fresh = false;
    }
    if (stalled >= 5) break;
  }

  const Eigen::VectorXd pg = g.cwiseProduct(free_mask(g));
  r.grad_norm = pg.lpNorm<Eigen::Infinity>();
  r.converged = r.converged || r.grad_norm < options.grad_tol;
  r.x = x;
  r.value = -fx;
  for (Eigen::Index i = 0; i < n; ++i)
    if (x[i] <= lo[i] || x[i] >= hi[i]) r.at_bound = true;
  return r;
}

}  // namespace gapfrail
