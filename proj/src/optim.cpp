#include "optim.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace ctmsm {

ScalarOptResult brent_maximize(const std::function<double(double)>& f, double lo, double hi, double xtol,
                               int max_iterations) {
  constexpr double kGold = 0.3819660112501051;
  ScalarOptResult res;
  auto g = [&](double x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };

  double a = lo, b = hi;
  double x = a + kGold * (b - a);
  double w = x, v = x;
  double fx = g(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  for (int it = 0; it < max_iterations; ++it) {
    const double m = 0.5 * (a + b);
    const double tol1 = 1e-10 * std::abs(x) + xtol / 3.0;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) {
      res.converged = true;
      break;
    }
    bool golden = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (m >= x) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= m) ? a - x : b - x;
      d = kGold * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d >= 0 ? tol1 : -tol1);
    const double fu = g(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  res.x = x;
  res.value = -fx;
  return res;
}

Eigen::MatrixXd hessian_from_gradient(const ValueAndGradient& f, const Eigen::VectorXd& x, double step) {
  const auto n = x.size();
  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd gp(n), gm(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double hk = step * std::max(1.0, std::abs(x[k]));
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += hk;
    xm[k] -= hk;
    f(xp, gp);
    f(xm, gm);
    h.col(k) = (gp - gm) / (2.0 * hk);
  }
  return 0.5 * (h + h.transpose());
}

Eigen::MatrixXd hessian_from_values(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x, const Eigen::VectorXd& steps) {
  const auto n = x.size();
  Eigen::MatrixXd h(n, n);
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += steps[i];
    xm[i] -= steps[i];
    h(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (steps[i] * steps[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      Eigen::VectorXd xpp = x, xpm = x, xmp = x, xmm = x;
      xpp[i] += steps[i]; xpp[j] += steps[j];
      xpm[i] += steps[i]; xpm[j] -= steps[j];
      xmp[i] -= steps[i]; xmp[j] += steps[j];
      xmm[i] -= steps[i]; xmm[j] -= steps[j];
      h(i, j) = h(j, i) = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * steps[i] * steps[j]);
    }
  }
  return h;
}

namespace {

// Inverse of the negated Hessian when it is positive definite.
bool newton_inverse(const ValueAndGradient& f, const Eigen::VectorXd& x, Eigen::MatrixXd& out) {
  const auto n = x.size();
  Eigen::MatrixXd neg_h = -hessian_from_gradient(f, x);
  if (!neg_h.allFinite()) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(neg_h);
  if (llt.info() != Eigen::Success) return false;
  out = llt.solve(Eigen::MatrixXd::Identity(n, n));
  return out.allFinite();
}

}  // namespace

// Newton steps on the finite-difference Hessian while it is negative
// definite, BFGS updates otherwise; Armijo backtracking in both cases.
QuasiNewtonResult maximize_quasi_newton(const ValueAndGradient& f, Eigen::VectorXd x0,
                                        const QuasiNewtonOptions& opt) {
  QuasiNewtonResult res;
  const auto n = x0.size();
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd g(n), g_new(n);
  double fx = f(x, g);
  res.evaluations = 1;
  if (!std::isfinite(fx) || !g.allFinite()) {
    res.x = x;
    res.value = fx;
    res.gradient = g;
    res.trace.push_back("non-finite objective at the starting point");
    return res;
  }
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd hinv = eye / std::max(1.0, g.norm());
  int stalls = 0;

  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it;
    if (g.lpNorm<Eigen::Infinity>() <= opt.grad_tol) {
      res.converged = true;
      break;
    }
    Eigen::MatrixXd newton;
    const bool use_newton = newton_inverse(f, x, newton);
    res.evaluations += 2 * static_cast<int>(n);
    if (use_newton) hinv = newton;
    Eigen::VectorXd dir = hinv * g;  // ascent direction
    double slope = g.dot(dir);
    if (!(slope > 0.0)) {
      hinv = eye / std::max(1.0, g.norm());
      dir = hinv * g;
      slope = g.dot(dir);
    }
    // Predicted gain of a Newton step is below what f can resolve.
    if (use_newton && 0.5 * slope <= 1e-12 * std::max(1.0, std::abs(fx)) &&
        g.lpNorm<Eigen::Infinity>() <= 1e3 * opt.grad_tol) {
      res.converged = true;
      break;
    }

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * dir;
      f_new = f(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && g_new.allFinite() && f_new >= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      std::ostringstream os;
      os << "iteration " << it << ": line search stalled, |g|max=" << g.lpNorm<Eigen::Infinity>();
      res.trace.push_back(os.str());
      if (++stalls > 2) break;
      hinv = eye / std::max(1.0, g.norm());
      continue;
    }

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = g - g_new;  // gradient change of the minimized -f
    const double sy = s.dot(yv);
    if (!use_newton && sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      hinv = (eye - rho * s * yv.transpose()) * hinv * (eye - rho * yv * s.transpose()) + rho * s * s.transpose();
    }
    x = x_new;
    fx = f_new;
    g = g_new;
    res.iterations = it + 1;
  }
  if (!res.converged && g.lpNorm<Eigen::Infinity>() <= opt.grad_tol) res.converged = true;
  if (!res.converged) {
    std::ostringstream os;
    os << "stopped after " << res.iterations << " iterations, |g|max=" << g.lpNorm<Eigen::Infinity>()
       << ", f=" << fx;
    res.trace.push_back(os.str());
  }
  res.x = x;
  res.value = fx;
  res.gradient = g;
  return res;
}

}  // namespace ctmsm
