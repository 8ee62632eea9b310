#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfda/config.hpp"
#include "sfda/csv.hpp"

namespace sfda {

struct NamedTable {
  std::string name;  // output file stem
  Table table;
};

struct ExperimentResult {
  std::vector<NamedTable> tables;
  std::vector<std::string> notes;  // soft-check findings and per-trial failures
};

// Draws one trial's device population: chip efficiency and per-sample cycle
// counts are sampled uniformly from the configured ranges, sorted ascending,
// and assigned jointly, so the lowest-index device is the cheapest on both
// axes. Everything else comes straight from the config.
std::vector<DeviceProfile> sample_network(const ExperimentConfig& cfg,
                                          std::uint64_t trial_seed);

// Runs the configured experiment over all trials. Deterministic in the config
// (including the seed): the same input produces identical tables, cell for
// cell. Individual trial failures become notes, not exceptions.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Writes each table as <dir>/<stem>.csv plus a <kind>_manifest.txt recording
// the config hash, seed, software version, and any notes. The directory is
// cfg.output_dir unless the SFDA_OUTPUT_DIR environment variable overrides
// it. Returns the written paths.
std::vector<std::string> write_outputs(const ExperimentConfig& cfg,
                                       const ExperimentResult& result);

// FNV-1a hash of the rendered config text; what the manifest records.
std::uint64_t config_hash(const ExperimentConfig& cfg);

// The energy-weight sweep used by the minibatch_vs_c1 experiment:
// 13 logarithmically spaced points covering [1e-6, 1].
std::vector<double> c1_sweep_grid();

}
