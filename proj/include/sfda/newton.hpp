#pragma once

#include <functional>
#include <span>
#include <vector>

namespace sfda {

struct NewtonOptions {
  int max_iters = 200;
  double decrement_tol = 1e-10;  // stop when the squared Newton decrement / 2 drops below
  double armijo = 0.25;
  double backtrack = 0.5;
  int max_line_steps = 60;
  // The decrement tolerance is floored at |f| * relative_floor: once predicted
  // progress falls under the rounding error of evaluating f itself, the line
  // search cannot verify improvement and further iterations only burn time.
  double relative_floor = 1e-12;
};

struct NewtonReport {
  bool converged = false;
  int iters = 0;
  double value = 0.0;
  double decrement = 0.0;  // last squared decrement / 2
};

// f(x, grad, hess) returns the value; when grad/hess are non-null it must fill
// them (hess is row-major n*n). Returning +inf marks x outside the domain and
// the line search backs off.
using SmoothFn = std::function<double(std::span<const double>, std::vector<double>*,
                                      std::vector<double>*)>;

// Damped Newton descent with backtracking; x is updated in place. The Hessian
// solve adds a diagonal shift when the factorization fails, so mildly
// indefinite models still make progress.
NewtonReport minimize_newton(const SmoothFn& f, std::vector<double>& x,
                             const NewtonOptions& opt = {});

}
