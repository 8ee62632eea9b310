#pragma once

#include <vector>

#include "sfda/bounds.hpp"

namespace sfda {

// Static description of one participating device: chip and radio parameters
// plus its local data constants.
struct DeviceProfile {
  double cap_coeff = 5e-12;       // effective switched capacitance of the chip
  double cycles_per_sample = 620;  // processor cycles to use one sample once
  double clock_rate = 1e6;         // cycles per second
  double tx_power = 0.1;           // watts while transmitting
  double link_rate = 1e6;          // bits per second
  double battery = 7.5e6;          // joules available for the whole run
  double data_size = 25;           // local samples
  double variability = 2.0;        // gradient variability of the local data
  double feature_stddev = 0.2;     // per-coordinate feature spread

  void validate() const;
};

struct CostWeights {
  double energy_weight = 1e-4;   // scales total joules
  double time_weight = 1e-3;     // scales total seconds
  double gap_weight = 2.5e6;     // scales the convergence gap
  double payload_bits = 16000;   // size of one model upload

  void validate() const;
};

// Joules one device spends computing a round of local steps at batch size n.
double compute_energy(const DeviceProfile& dev, int local_steps, double batch);

// Joules one device spends sending its model once.
double transmit_energy(const DeviceProfile& dev, double payload_bits);

// Seconds the slowest device needs for the round's computation.
double compute_time(const std::vector<DeviceProfile>& devices, int local_steps,
                    std::span<const double> batch_row);

// Seconds the slowest link needs for one upload.
double transmit_time(const std::vector<DeviceProfile>& devices, double payload_bits);

struct BatteryReport {
  std::vector<double> spent;   // joules per device across all rounds
  std::vector<double> margin;  // battery - spent
  bool ok = true;              // all margins nonnegative
};

BatteryReport battery_report(const std::vector<DeviceProfile>& devices,
                             const MinibatchSchedule& batches, int local_steps,
                             double payload_bits);

// Weighted sum of total energy, total wall time, and the convergence gap that
// the given schedules certify.
double objective_value(const std::vector<DeviceProfile>& devices,
                       const MinibatchSchedule& batches,
                       const CombinerSchedule& combiner, const CostWeights& weights,
                       const HyperParams& hp, const NetworkSnapshot& net);

// Builds the network view (weights, sizes, data constants) from the profiles.
NetworkSnapshot snapshot_from_profiles(const std::vector<DeviceProfile>& devices);

}
