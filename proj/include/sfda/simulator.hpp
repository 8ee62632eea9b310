#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sfda/bounds.hpp"
#include "sfda/cost_model.hpp"
#include "sfda/dataset.hpp"

namespace sfda {

// In-order message queue with a fixed per-message release tick. Models one
// direction of the device/server link: a payload pushed at tick t with
// release r becomes visible exactly at tick r and never earlier.
template <typename T>
class DelayChannel {
 public:
  void push(T payload, long long release) {
    if (!q_.empty() && release < q_.back().release)
      throw std::logic_error("DelayChannel: releases must be nondecreasing");
    q_.push_back(Item{std::move(payload), release});
  }

  // Returns the front payload when its release tick is exactly t.
  std::optional<T> poll_at(long long t) {
    if (q_.empty() || q_.front().release != t) return std::nullopt;
    T out = std::move(q_.front().payload);
    q_.pop_front();
    return out;
  }

  bool empty() const { return q_.empty(); }
  size_t pending() const { return q_.size(); }

 private:
  struct Item {
    T payload;
    long long release;
  };
  std::deque<Item> q_;
};

// Everything one training run needs. Aggregation weights are derived from the
// dataset sizes, so they are not configured separately.
struct SimConfig {
  HyperParams hp;
  std::vector<Dataset> datasets;        // one per device
  std::vector<DeviceProfile> profiles;  // empty, or one per device (energy/time)
  MinibatchSchedule batches;            // integral entries, rounds x devices
  CombinerSchedule combiner;            // one weight per round
  LossKind kind = LossKind::Logistic;
  ModelParams init;                     // starting model; empty means zeros
  double payload_bits = 16000;          // upload size used for the energy ledger
  std::uint64_t seed = 1;
  bool record_reference = false;        // also run the centralized comparison
  bool record_devices = false;          // keep per-tick device states (tests)

  int devices() const { return static_cast<int>(datasets.size()); }
  void validate() const;  // throws std::invalid_argument
};

// One completed aggregation round as the server sees it.
struct RoundRecord {
  int round = 0;          // 0-based
  long long tick = 0;     // time index of the server model for this round
  double loss = 0.0;      // training objective at that model
  double accuracy = 0.0;  // NaN for regression runs
  double divergence = 0.0;  // distance to the centralized reference; NaN when off
  double energy_to_date = 0.0;  // joules over all devices, all completed rounds
  double time_to_date = 0.0;    // seconds of compute + upload, serial per round
  double alpha_used = 0.0;      // combiner weight applied entering this round
};

// End-of-tick device states, one entry per tick the devices were active.
struct DeviceSnapshot {
  long long tick = 0;
  std::vector<ModelParams> models;
};

struct SimTrace {
  std::vector<ModelParams> aggregates;     // the K server-side models, in order
  std::vector<ModelParams> reference_end;  // per-round centralized endpoints (opt)
  std::vector<DeviceSnapshot> device_steps;  // only with record_devices
  std::vector<RoundRecord> rounds;
  ModelParams best;        // aggregate with the lowest training objective
  int best_round = 0;      // 0-based index of that aggregate
  double best_loss = 0.0;
};

// Aggregation weights proportional to local dataset sizes.
std::vector<double> data_weights(const std::vector<Dataset>& datasets);

// Weighted mean of the device models.
ModelParams aggregate(const std::vector<ModelParams>& locals,
                      std::span<const double> rhos);

// Combiner update applied when a device receives the delayed server model:
//   alpha * global + (1 - alpha) * (local_prev - grad_step),
// where grad_step is the already-scaled step eta * g.
ModelParams synchronize(const ModelParams& local_prev, const ModelParams& delayed_global,
                        std::span<const double> grad_step, double alpha_k);

// Size-weighted training objective across all devices.
double global_loss(const ModelParams& model, const std::vector<Dataset>& datasets,
                   std::span<const double> rhos, LossKind kind);

// Size-weighted classification accuracy across all devices.
double global_accuracy(const ModelParams& model, const std::vector<Dataset>& datasets,
                       std::span<const double> rhos);

// Index and loss of the candidate with the lowest training objective.
// Ties go to the earliest candidate.
std::pair<int, double> select_best(const std::vector<ModelParams>& candidates,
                                   const std::vector<Dataset>& datasets,
                                   std::span<const double> rhos, LossKind kind);

// Runs the full delayed-averaging protocol and returns the recorded trace.
// Deterministic given the config, including the seed.
SimTrace run_training(const SimConfig& cfg);

}
