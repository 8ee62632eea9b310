#include "sfda/newton.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sfda {

namespace {
using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}

NewtonReport minimize_newton(const SmoothFn& f, std::vector<double>& x,
                             const NewtonOptions& opt) {
  const int n = static_cast<int>(x.size());
  if (n == 0) throw std::invalid_argument("newton: empty point");

  std::vector<double> grad(n), hess(static_cast<size_t>(n) * n);
  std::vector<double> trial(n);
  NewtonReport rep;

  double fx = f(x, &grad, &hess);
  if (!std::isfinite(fx)) throw std::invalid_argument("newton: start outside domain");

  for (int it = 0; it < opt.max_iters; ++it) {
    rep.iters = it + 1;
    Eigen::Map<const Eigen::VectorXd> g(grad.data(), n);
    Eigen::Map<const MatRM> H(hess.data(), n, n);

    Eigen::VectorXd step;
    double shift = 0.0;
    for (int attempt = 0; attempt < 40; ++attempt) {
      MatRM Hs = H;
      if (shift > 0.0) Hs.diagonal().array() += shift;
      Eigen::LLT<MatRM> llt(Hs);
      if (llt.info() == Eigen::Success) {
        step = llt.solve(-g);
        if (step.allFinite()) break;
      }
      shift = (shift == 0.0) ? 1e-10 * std::max(1.0, H.diagonal().maxCoeff()) : shift * 10.0;
      if (attempt == 39)
        throw std::runtime_error("newton: hessian factorization failed");
    }

    const double descent = g.dot(step);
    rep.decrement = -0.5 * descent;
    const double tol =
        std::max(opt.decrement_tol, std::fabs(fx) * opt.relative_floor);
    if (rep.decrement <= tol) {
      rep.converged = true;
      break;
    }
    if (descent >= 0.0) {
      // Shifted solve lost descent; fall back on the gradient direction.
      step = -g;
    }

    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < opt.max_line_steps; ++ls) {
      for (int i = 0; i < n; ++i) trial[i] = x[i] + t * step[i];
      const double ft = f(trial, nullptr, nullptr);
      if (std::isfinite(ft) && ft <= fx + opt.armijo * t * g.dot(step)) {
        accepted = true;
        break;
      }
      t *= opt.backtrack;
    }
    if (!accepted) {
      rep.converged = rep.decrement <= 1e3 * tol;
      break;
    }
    x = trial;
    fx = f(x, &grad, &hess);
  }
  rep.value = fx;
  return rep;
}

}
