#pragma once

#include <span>
#include <string>
#include <vector>

#include "sfda/alpha_opt.hpp"
#include "sfda/bounds.hpp"
#include "sfda/cost_model.hpp"
#include "sfda/posynomial.hpp"

namespace sfda {

// Index layout for the schedule program's variables. Round indices are the
// 0-based schedule rows; per-round blocks are contiguous, per-round-per-device
// blocks are row major.
struct VarMap {
  int rounds = 0;
  int devices = 0;

  // scalars
  int loss_gap = 0;     // certified gap value
  int surd = 1;         // square-root auxiliary inside the gap
  int psi_total = 2;    // summed divergence
  int slack_total = 3;  // slack pinning the summed divergence from above

  // per-round bases
  int energy_cmp0 = 0, energy_tx0 = 0, time_cmp0 = 0, time_tx0 = 0;
  int noise0 = 0, drift_full0 = 0, drift_overlap0 = 0, staleness0 = 0, round_bound0 = 0;
  int slack_round0[5] = {0, 0, 0, 0, 0};  // upper pins of psi, h_full, h_overlap, eps, sigma

  // per-round-per-device bases
  int batch0 = 0, noise_factor0 = 0, slack_dev0 = 0;
  int count = 0;

  static VarMap layout(int rounds, int devices);
  int at(int base, int k) const { return base + k; }
  int cell(int base, int k, int i) const { return base + k * devices + i; }
  std::string name(int v) const;
};

// One constraint: num / den <= 1, or == 1 for identities. A missing den means
// the constant 1. The solver condenses any multi-term den into a monomial at
// the current anchor; identities hold by construction and are only evaluated
// for reporting. Degenerate rows are enforced like inequalities but flag a
// drift window whose true value is zero, where the variable rides its box
// floor instead of a pin.
struct GpRow {
  enum class Kind { Inequality, Identity, Degenerate };
  std::string name;
  Kind kind = Kind::Inequality;
  Posynomial num;
  Posynomial den;
};

struct GpProgram {
  VarMap vars;
  Posynomial objective;  // cost terms plus slack penalties
  std::vector<GpRow> rows;
  std::vector<double> lo, hi;      // per-variable boxes in value space
  std::vector<double> alpha_hat;   // per-round combiner constants baked into the rows
};

struct PenaltyConfig {
  double w_global = 1e5;   // slack on the summed divergence
  double w_round = 1e5;    // per-round slacks
  double w_device = 1e6;   // per-round-per-device slacks
  double margin = 1e-7;    // interior margin used by the anchor repair
  double inner_tol = 1e-8;  // barrier gap target on the scaled objective
  double newton_tol = 1e-10;  // squared-decrement/2 threshold per centering stage
  double barrier_mu = 30.0;
  int max_inner = 400;  // Newton iterations per centering stage
  int max_outer = 150;
  // Relative objective drop per pass that still counts as progress. The
  // cross-round budget split settles much later than the headline objective,
  // so this sits well below the accuracy anyone needs from the objective
  // itself; loosening it freezes the schedule while that split is still
  // drifting.
  double outer_tol = 1e-8;

  void validate() const;
};

GpProgram build_schedule_program(const HyperParams& hp,
                                 const std::vector<DeviceProfile>& devices,
                                 const CostWeights& weights, const PenaltyConfig& pen,
                                 const std::vector<double>& alpha_hat);

// Rewrites y so every enforced row holds with a strict multiplicative margin,
// recomputing each derived variable bottom-up from the batch block. Only the
// batch entries of y are read; everything else is overwritten. Returns false
// when the battery rows cannot hold even at batch size 1.
bool repair_anchor(const GpProgram& prog, const HyperParams& hp,
                   const std::vector<DeviceProfile>& devices, const CostWeights& weights,
                   std::vector<double>& y, double margin);

struct InnerReport {
  bool converged = false;
  int stages = 0;
  int newton_iters = 0;
  double objective = 0.0;         // penalized objective at the returned point
  double condensation_gap = 0.0;  // worst 1 - condensed/true over tightened rows
};

// One condensation step: approximates every multi-term denominator at the
// current y (which must be strictly feasible), then runs the barrier method on
// the resulting program. y is updated to the stage optimum.
InnerReport solve_condensed(const GpProgram& prog, std::vector<double>& y,
                            const PenaltyConfig& pen);

double penalized_objective(const GpProgram& prog, std::span<const double> y);
double max_identity_residual(const GpProgram& prog, std::span<const double> y);

struct SpReport {
  bool feasible = true;
  bool converged = false;
  bool alpha_frozen = false;  // a combiner refresh was rejected and disabled
  int outer_iters = 0;
  double objective = 0.0;          // exact objective of the rounded schedule
  double relaxed_objective = 0.0;  // penalized objective at the continuous optimum
  double max_slack = 1.0;
  double max_identity_residual = 0.0;
  double condensation_gap = 0.0;
  std::vector<double> objective_trace;  // penalized objective after each accepted solve
  std::string message;
};

struct SpResult {
  MinibatchSchedule batches;
  CombinerSchedule combiner;
  SpReport report;
};

// Full pipeline: interior start, repeated condensation with monotone accepts,
// combiner refreshes on an accept-or-freeze rule, then integer rounding with a
// battery repair and a final combiner pass on the rounded noise levels.
SpResult solve_schedule(const std::vector<DeviceProfile>& devices, const HyperParams& hp,
                        const CostWeights& weights, const ScheduleOptions& alpha_mode = {},
                        const PenaltyConfig& pen = {});

}
