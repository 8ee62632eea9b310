#pragma once

#include <cstdint>
#include <string>

#include "sfda/alpha_opt.hpp"
#include "sfda/bounds.hpp"
#include "sfda/cost_model.hpp"
#include "sfda/gp_solver.hpp"

namespace sfda {

enum class ExperimentKind {
  PsiVsSigma,          // divergence bound across noise levels and rounds
  MinibatchOverTime,   // optimized batch sizes per device per round
  MinibatchVsC1,       // mean optimized batch across an energy-weight sweep
  ObjectiveOptVsFixed, // final objective for each combiner policy
  AlphaVsDelta,        // mean optimized combiner weight across delays
  AccuracyRun,         // training accuracy under different combiner policies
};

const char* to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from(const std::string& text);  // throws on unknown

// Uniform sampling ranges and shared constants for the device population.
// Chip efficiency and per-sample cycle counts are drawn per trial; everything
// else is common to all devices.
struct DeviceRanges {
  double cap_coeff_min = 4e-12;
  double cap_coeff_max = 6.5e-12;
  double cycles_min = 600;
  double cycles_max = 640;
  double clock_rate = 1e6;
  double tx_power = 0.1;
  double link_rate = 1e6;
  double battery = 7.5e6;
  double data_size = 25;
  double variability = 2.0;
  double feature_stddev = 0.2;

  void validate() const;
};

// Everything a run needs, file-loadable. Defaults reproduce the reference
// experiment setup end to end.
struct ExperimentConfig {
  HyperParams hp;
  int devices = 5;
  DeviceRanges ranges;
  CostWeights weights;
  PenaltyConfig penalty;

  ExperimentKind kind = ExperimentKind::PsiVsSigma;
  int trials = 20;
  std::uint64_t seed = 1;
  std::string output_dir = ".";

  ScheduleMode alpha_mode = ScheduleMode::Numeric;
  double fixed_alpha = 1.0;

  // Training-run extras (simulate and the accuracy experiment).
  double alpha_small = 0.05;  // the "barely combine" policy
  int batch = 0;              // per-device batch size; 0 means full batch
  int per_device = 400;       // synthetic samples per device
  int dim = 784;              // synthetic feature dimension
  double heterogeneity = 1.0;
  bool record_reference = false;
  std::string idx_train_images, idx_train_labels;  // optional IDX inputs
  std::string idx_test_images, idx_test_labels;
  int class_a = 0, class_b = 1;

  void validate() const;
};

// Parses the key = value section format. An empty file yields the defaults.
// Errors carry the path and line number. See the schema in the repo docs.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text, const std::string& origin);

// Renders a config in the same format load_config reads; the round trip is
// exact for every field.
std::string render_config(const ExperimentConfig& cfg);

bool operator==(const DeviceRanges& a, const DeviceRanges& b);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);
bool operator==(const HyperParams& a, const HyperParams& b);
bool operator==(const CostWeights& a, const CostWeights& b);
bool operator==(const PenaltyConfig& a, const PenaltyConfig& b);

}
