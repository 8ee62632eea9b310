#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sfda/alpha_opt.hpp"

using namespace sfda;

namespace {

// Brute-force reference: scan a much finer grid than the solver uses and
// return the smallest divergence value seen.
double dense_grid_min(int k, double sigma, const HyperParams& hp) {
  double best = round_divergence_bound(k, 1.0, sigma, hp);
  const int points = 20000;
  for (int i = 1; i <= points; ++i) {
    const double a = static_cast<double>(i) / points;
    best = std::min(best, round_divergence_bound(k, a, sigma, hp));
  }
  return best;
}

}  // namespace

TEST_CASE("numeric weight matches a dense grid scan") {
  HyperParams hp;
  for (double sigma : {0.0, 0.1, 0.4}) {
    for (int k : {1, 3, 8, 15}) {
      CAPTURE(sigma);
      CAPTURE(k);
      const AlphaResult r = optimal_alpha_numeric(k, sigma, hp);
      const double at_result = round_divergence_bound(k, r.value, sigma, hp);
      const double reference = dense_grid_min(k, sigma, hp);
      CHECK(at_result <= reference + 1e-9 * (1.0 + std::fabs(reference)));
    }
  }
}

TEST_CASE("closed form recomputed by hand at the default constants") {
  HyperParams hp;
  const AlphaResult r = optimal_alpha_closed_form(0.0, hp);
  // Independent recomputation of the stationary point.
  const double b1 = std::pow(1.02, 20) - 1.0;
  const double b5 = std::pow(1.02, 1);
  const double gd = std::pow(1.02, 19) - 1.0;
  const double numer = 2.0 * 0.02 * 20 * 25 * b1;
  const double denom = 2.0 * 0.02 * 19 * 25 * b1 + 0.02 * 19 * 25 * b5 -
                       0.5 * b5 * gd + 0.02 * 0.5 * 19;
  CHECK(r.value == doctest::Approx(std::sqrt(numer / denom)).epsilon(1e-9));
  CHECK(r.value == doctest::Approx(0.7175).epsilon(2e-3));
  CHECK_FALSE(r.clamped);
}

TEST_CASE("no delay makes the pure local update optimal") {
  HyperParams hp;
  hp.delay = 0;
  const AlphaResult closed = optimal_alpha_closed_form(0.0, hp);
  CHECK(closed.value == 1.0);
  CHECK(closed.clamped);
  for (int k : {1, 5, 15}) {
    const AlphaResult numeric = optimal_alpha_numeric(k, 0.0, hp);
    CHECK(numeric.value == 1.0);
  }
}

TEST_CASE("closed form clamps instead of exceeding 1") {
  HyperParams hp;
  hp.delay = 2;  // little staleness to amortize: the optimum pushes past 1
  const AlphaResult r = optimal_alpha_closed_form(0.0, hp);
  CHECK(r.value == 1.0);
  CHECK(r.clamped);
}

TEST_CASE("solver input validation") {
  HyperParams hp;
  CHECK_THROWS_AS(optimal_alpha_numeric(-1, 0.0, hp), std::invalid_argument);
  CHECK_THROWS_AS(optimal_alpha_closed_form(-0.5, hp), std::invalid_argument);
  AlphaSolverConfig cfg;
  cfg.grid_points = 1;
  CHECK_THROWS_AS(optimal_alpha_numeric(1, 0.0, hp, cfg), std::invalid_argument);
}

TEST_CASE("schedule builder uses round index j + 1") {
  HyperParams hp;
  hp.rounds = 4;
  const std::vector<double> sigmas = {0.0, 0.1, 0.2, 0.3};

  ScheduleOptions opt;
  opt.mode = ScheduleMode::Numeric;
  const CombinerSchedule numeric = build_combiner_schedule(sigmas, hp, opt);
  REQUIRE(numeric.rounds() == 4);
  for (int j = 0; j < 4; ++j)
    CHECK(numeric.alpha[j] == optimal_alpha_numeric(j + 1, sigmas[j], hp).value);

  opt.mode = ScheduleMode::ClosedForm;
  const CombinerSchedule closed = build_combiner_schedule(sigmas, hp, opt);
  for (int j = 0; j < 4; ++j)
    CHECK(closed.alpha[j] == optimal_alpha_closed_form(sigmas[j], hp).value);
}

TEST_CASE("fixed schedule") {
  HyperParams hp;
  hp.rounds = 3;
  ScheduleOptions opt;
  opt.mode = ScheduleMode::Fixed;
  opt.fixed_alpha = 0.25;
  const CombinerSchedule s = build_combiner_schedule({0.0, 0.0, 0.0}, hp, opt);
  for (double a : s.alpha) CHECK(a == 0.25);

  opt.fixed_alpha = 0.0;
  CHECK_THROWS_AS(build_combiner_schedule({0.0, 0.0, 0.0}, hp, opt),
                  std::invalid_argument);
  opt.fixed_alpha = 1.5;
  CHECK_THROWS_AS(build_combiner_schedule({0.0, 0.0, 0.0}, hp, opt),
                  std::invalid_argument);
}

TEST_CASE("schedule builder rejects mismatched noise vector") {
  HyperParams hp;
  hp.rounds = 5;
  CHECK_THROWS_AS(build_combiner_schedule({0.0, 0.0}, hp, {}),
                  std::invalid_argument);
}
