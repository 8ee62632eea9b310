#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sfda/newton.hpp"

using namespace sfda;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// (x - 3)^2 + 2 (y + 1)^2
double quadratic(std::span<const double> x, std::vector<double>* g,
                 std::vector<double>* h) {
  const double a = x[0] - 3.0, b = x[1] + 1.0;
  if (g) {
    (*g)[0] = 2.0 * a;
    (*g)[1] = 4.0 * b;
  }
  if (h) {
    (*h)[0] = 2.0;
    (*h)[1] = 0.0;
    (*h)[2] = 0.0;
    (*h)[3] = 4.0;
  }
  return a * a + 2.0 * b * b;
}

// x - ln x on x > 0, minimized at x = 1 with value 1.
double log_barrier_1d(std::span<const double> x, std::vector<double>* g,
                      std::vector<double>* h) {
  if (x[0] <= 0.0) return kInf;
  if (g) (*g)[0] = 1.0 - 1.0 / x[0];
  if (h) (*h)[0] = 1.0 / (x[0] * x[0]);
  return x[0] - std::log(x[0]);
}

}  // namespace

TEST_CASE("quadratic converges in one step") {
  std::vector<double> x = {10.0, 10.0};
  const NewtonReport rep = minimize_newton(quadratic, x);
  CHECK(rep.converged);
  CHECK(x[0] == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(x[1] == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(rep.value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep.iters <= 3);
}

TEST_CASE("line search backs off when a full step leaves the domain") {
  // From x = 3 the pure Newton step lands at -3, outside the domain; the
  // backtracking must recover and still reach the minimum at 1.
  std::vector<double> x = {3.0};
  const NewtonReport rep = minimize_newton(log_barrier_1d, x);
  CHECK(rep.converged);
  // The decrement tolerance 1e-10 pins the error at roughly sqrt(2e-10).
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(rep.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("convergence from inside the domain") {
  std::vector<double> x = {0.05};
  const NewtonReport rep = minimize_newton(log_barrier_1d, x);
  CHECK(rep.converged);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(rep.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("bad starts are rejected") {
  std::vector<double> outside = {-2.0};
  CHECK_THROWS_AS(minimize_newton(log_barrier_1d, outside), std::invalid_argument);
  std::vector<double> empty;
  CHECK_THROWS_AS(minimize_newton(quadratic, empty), std::invalid_argument);
}

TEST_CASE("iteration cap is respected") {
  NewtonOptions opt;
  opt.max_iters = 1;
  opt.decrement_tol = 1e-300;  // unreachable, so the cap binds
  std::vector<double> x = {100.0};
  const NewtonReport rep = minimize_newton(log_barrier_1d, x, opt);
  CHECK(rep.iters == 1);
}
