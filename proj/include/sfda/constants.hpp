#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sfda/dataset.hpp"

namespace sfda {

// Measured regularity constants for one device's data under a given loss.
// All are probe-based lower estimates of the corresponding suprema.
struct DataConstants {
  double variability = 0.0;     // max ||grad f(x1) - grad f(x2)|| / ||x1 - x2||
  double feature_stddev = 0.0;  // sqrt(trace of feature sample covariance)
  double dissimilarity = 0.0;   // max_w ||grad F_i(w) - grad F(w)|| over probes
  void validate(double lipschitz) const;  // 0 <= dissimilarity <= 2 * lipschitz
};

struct ConstantsReport {
  std::vector<DataConstants> per_device;
  double dissimilarity = 0.0;  // data-size weighted mean of per-device values
  double lipschitz = 0.0;      // max gradient norm seen at any probe
  double smoothness = 0.0;     // max gradient-difference ratio between probes
};

// sqrt(trace of the sample covariance) of the feature rows (divisor N-1).
double feature_stddev(const Dataset& data);

// Max over sample pairs of ||grad f(x1,y1;w) - grad f(x2,y2;w)|| / ||x1-x2||
// at a fixed weight vector. Pairs with identical features are skipped.
double local_variability(const Dataset& data, LossKind kind, const ModelParams& at);

// Probes `probe_count` random weight vectors (plus the origin) and measures
// every device's constants at them. Requires every device to hold >= 2 samples.
ConstantsReport estimate_constants(std::span<const Dataset> data, LossKind kind,
                                   int probe_count, std::uint64_t seed);

}
