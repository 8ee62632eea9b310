#pragma once

#include <vector>

#include "sfda/bounds.hpp"

namespace sfda {

struct AlphaSolverConfig {
  int grid_points = 400;      // coarse scan resolution over (0, 1]
  int refine_iters = 80;      // golden-section steps around the best cell
  double floor = 1e-4;        // smallest admissible weight
  double snap_tol = 1e-9;     // distance to 1.0 below which we return exactly 1.0
};

struct AlphaResult {
  double value = 1.0;
  bool clamped = false;  // true when the unconstrained optimum fell outside (0, 1]
};

// Minimizes the per-round divergence bound over the combiner weight for a
// given round index and noise level. Ties between equally good weights are
// broken toward the larger one.
AlphaResult optimal_alpha_numeric(int k, double sigma_k, const HyperParams& hp,
                                  const AlphaSolverConfig& cfg = {});

// Stationary point of the large-round limit of the divergence bound, clamped
// to (0, 1]. A nonpositive curvature denominator means the bound only improves
// as the weight grows, so the result is exactly 1.
AlphaResult optimal_alpha_closed_form(double sigma_inf, const HyperParams& hp);

enum class ScheduleMode { Numeric, ClosedForm, Fixed };

struct ScheduleOptions {
  ScheduleMode mode = ScheduleMode::Numeric;
  double fixed_alpha = 1.0;
  AlphaSolverConfig solver;
};

// One weight per round; sigmas[j] is the network noise level for round j
// (bound index j + 1).
CombinerSchedule build_combiner_schedule(const std::vector<double>& sigmas,
                                         const HyperParams& hp,
                                         const ScheduleOptions& opt = {});

}
