#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sfda/gp_solver.hpp"

using namespace sfda;

namespace {

GpProgram two_var_shell() {
  GpProgram prog;
  prog.vars.count = 2;
  prog.lo = {0.1, 0.1};
  prog.hi = {10.0, 10.0};
  return prog;
}

}  // namespace

TEST_CASE("monomial-constrained program lands on the corner") {
  // minimize 1/(xy) subject to x <= 2, y <= 3: optimum (2, 3), value 1/6.
  GpProgram prog = two_var_shell();
  prog.objective = Monomial{1.0, {{0, -1.0}, {1, -1.0}}};
  prog.rows.push_back({"x_cap", GpRow::Kind::Inequality,
                       Monomial::var(0, 1.0, 0.5), {}});
  prog.rows.push_back({"y_cap", GpRow::Kind::Inequality,
                       Monomial::var(1, 1.0, 1.0 / 3.0), {}});

  std::vector<double> y = {1.0, 1.0};
  const PenaltyConfig pen;
  const InnerReport rep = solve_condensed(prog, y, pen);
  CHECK(rep.converged);
  CHECK(y[0] == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(y[1] == doctest::Approx(3.0).epsilon(1e-4));
  CHECK(rep.objective == doctest::Approx(1.0 / 6.0).epsilon(1e-4));
  CHECK(rep.condensation_gap == 0.0);  // no sum denominators to approximate
  CHECK(penalized_objective(prog, y) == doctest::Approx(rep.objective));
}

TEST_CASE("sum denominator is condensed and re-anchored to the optimum") {
  // minimize x + 4y subject to x + y >= 2: optimum (1.9, 0.1), value 2.3,
  // with y pressed onto its box floor.
  GpProgram prog = two_var_shell();
  prog.objective += Monomial::var(0);
  prog.objective += Monomial::var(1, 1.0, 4.0);
  Posynomial den;
  den += Monomial::var(0);
  den += Monomial::var(1);
  prog.rows.push_back({"sum_floor", GpRow::Kind::Inequality,
                       Monomial::constant(2.0), std::move(den)});

  std::vector<double> y = {3.0, 1.0};
  const PenaltyConfig pen;
  double prev = penalized_objective(prog, y);
  for (int it = 0; it < 20; ++it) {
    const InnerReport rep = solve_condensed(prog, y, pen);
    CHECK(rep.converged);
    CHECK(rep.objective <= prev * (1.0 + 1e-9));
    prev = rep.objective;
  }
  // The approximated feasible set always sits inside the true one.
  CHECK(y[0] + y[1] >= 2.0 * (1.0 - 1e-9));
  CHECK(prev == doctest::Approx(2.3).epsilon(1e-2));
  CHECK(prev >= 2.3 * (1.0 - 1e-9));
  CHECK(y[1] == doctest::Approx(0.1).epsilon(1e-2));
}

TEST_CASE("solver rejects bad starts") {
  GpProgram prog = two_var_shell();
  prog.objective = Monomial{1.0, {{0, -1.0}, {1, -1.0}}};
  prog.rows.push_back({"x_cap", GpRow::Kind::Inequality,
                       Monomial::var(0, 1.0, 0.5), {}});
  const PenaltyConfig pen;

  std::vector<double> outside_box = {20.0, 1.0};
  CHECK_THROWS_AS(solve_condensed(prog, outside_box, pen), std::runtime_error);
  std::vector<double> violating = {4.0, 1.0};  // inside box, violates x <= 2
  CHECK_THROWS_AS(solve_condensed(prog, violating, pen), std::runtime_error);
  std::vector<double> short_point = {1.0};
  CHECK_THROWS_AS(solve_condensed(prog, short_point, pen), std::invalid_argument);
}

TEST_CASE("variable layout counts and names") {
  const VarMap v = VarMap::layout(2, 2);
  CHECK(v.count == 4 + 14 * 2 + 3 * 2 * 2);
  CHECK(v.name(v.loss_gap) == "loss_gap");
  CHECK(v.name(v.at(v.noise0, 1)) == "noise[1]");
  CHECK(v.name(v.cell(v.batch0, 1, 0)) == "batch[1,0]");
  CHECK_THROWS_AS(VarMap::layout(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(VarMap::layout(3, 0), std::invalid_argument);
}

TEST_CASE("schedule program construction") {
  HyperParams hp;
  hp.rounds = 2;
  const std::vector<DeviceProfile> devices(2);
  const CostWeights weights;
  const PenaltyConfig pen;
  const std::vector<double> ahat = {0.7, 0.7};

  const GpProgram prog = build_schedule_program(hp, devices, weights, pen, ahat);
  CHECK(prog.vars.count == 44);
  CHECK(prog.lo.size() == 44);
  CHECK(prog.hi.size() == 44);
  CHECK(prog.alpha_hat == ahat);
  // Batch boxes follow the local data sizes.
  CHECK(prog.lo[prog.vars.cell(prog.vars.batch0, 0, 1)] == 1.0);
  CHECK(prog.hi[prog.vars.cell(prog.vars.batch0, 0, 1)] == 25.0);
  CHECK_FALSE(prog.objective.empty());
  CHECK_FALSE(prog.rows.empty());

  HyperParams tight = hp;
  tight.delay = tight.local_steps;  // empty overlap window
  CHECK_THROWS_AS(build_schedule_program(tight, devices, weights, pen, ahat),
                  std::invalid_argument);

  CHECK_THROWS_AS(build_schedule_program(hp, devices, weights, pen, {0.7}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_schedule_program(hp, devices, weights, pen, {0.7, 1.5}),
                  std::invalid_argument);

  std::vector<DeviceProfile> silent(2);
  silent[0].variability = 0.0;
  silent[1].variability = 0.0;  // no sampling noise anywhere: nothing to allocate
  CHECK_THROWS_AS(build_schedule_program(hp, silent, weights, pen, ahat),
                  std::invalid_argument);
}

TEST_CASE("anchor repair produces a strictly feasible point") {
  HyperParams hp;
  hp.rounds = 2;
  const std::vector<DeviceProfile> devices(2);
  const CostWeights weights;
  const PenaltyConfig pen;
  const GpProgram prog =
      build_schedule_program(hp, devices, weights, pen, {0.7, 0.7});

  std::vector<double> y(prog.vars.count, 1.0);
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i) y[prog.vars.cell(prog.vars.batch0, k, i)] = 12.5;

  REQUIRE(repair_anchor(prog, hp, devices, weights, y, pen.margin));

  std::vector<double> z(y.size());
  for (std::size_t v = 0; v < y.size(); ++v) {
    CHECK(y[v] > prog.lo[v]);
    CHECK(y[v] < prog.hi[v]);
    z[v] = std::log(y[v]);
  }
  for (const auto& row : prog.rows) {
    if (row.kind == GpRow::Kind::Identity) continue;
    const double den = row.den.empty() ? 1.0 : row.den.eval(z);
    CHECK(row.num.eval(z) < den);
  }
  CHECK(max_identity_residual(prog, y) <= 1e-12);
}

TEST_CASE("anchor repair reports a hopeless battery") {
  HyperParams hp;
  hp.rounds = 2;
  std::vector<DeviceProfile> devices(2);
  devices[1].battery = 100.0;  // two rounds cost ~62 kJ even at batch 1
  const CostWeights weights;
  const PenaltyConfig pen;
  const GpProgram prog =
      build_schedule_program(hp, devices, weights, pen, {0.7, 0.7});
  std::vector<double> y(prog.vars.count, 1.0);
  CHECK_FALSE(repair_anchor(prog, hp, devices, weights, y, pen.margin));
}

TEST_CASE("full schedule solve on a small instance") {
  HyperParams hp;
  hp.rounds = 2;
  const std::vector<DeviceProfile> devices(2);
  const CostWeights weights;
  ScheduleOptions mode;
  mode.mode = ScheduleMode::ClosedForm;

  const SpResult res = solve_schedule(devices, hp, weights, mode);
  CHECK(res.report.feasible);
  CHECK(res.report.converged);
  CHECK(res.report.message == "converged");
  CHECK(res.report.outer_iters >= 1);

  const NetworkSnapshot net = snapshot_from_profiles(devices);
  CHECK_NOTHROW(res.batches.validate(net));
  for (double n : res.batches.sizes) CHECK(n == std::round(n));
  CHECK_NOTHROW(res.combiner.validate());

  CHECK(res.report.max_slack <= 1.01);
  CHECK(res.report.max_identity_residual <= 1e-6);
  CHECK(res.report.condensation_gap <= 1e-3);
  CHECK(res.report.objective > 0.0);
  CHECK(res.report.relaxed_objective > 0.0);

  const auto& trace = res.report.objective_trace;
  REQUIRE_FALSE(trace.empty());
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <= trace[i - 1] * (1.0 + 1e-8));
}

TEST_CASE("schedule solve reports an empty overlap window as infeasible") {
  HyperParams hp;
  hp.delay = hp.local_steps;
  const std::vector<DeviceProfile> devices(2);
  const SpResult res = solve_schedule(devices, hp, CostWeights{});
  CHECK_FALSE(res.report.feasible);
  CHECK_FALSE(res.report.message.empty());
}
