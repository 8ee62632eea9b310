#include "sfda/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sfda {

void DeviceProfile::validate() const {
  if (cap_coeff <= 0.0 || cycles_per_sample <= 0.0 || clock_rate <= 0.0)
    throw std::invalid_argument("device: chip parameters must be positive");
  if (tx_power <= 0.0 || link_rate <= 0.0)
    throw std::invalid_argument("device: radio parameters must be positive");
  if (battery <= 0.0) throw std::invalid_argument("device: battery must be positive");
  if (data_size < 1.0) throw std::invalid_argument("device: data size below 1");
  if (variability < 0.0 || feature_stddev < 0.0)
    throw std::invalid_argument("device: negative data constants");
}

void CostWeights::validate() const {
  if (energy_weight < 0.0 || time_weight < 0.0 || gap_weight < 0.0)
    throw std::invalid_argument("cost weights: negative weight");
  if (payload_bits <= 0.0)
    throw std::invalid_argument("cost weights: payload must be positive");
}

double compute_energy(const DeviceProfile& dev, int local_steps, double batch) {
  dev.validate();
  if (local_steps < 1) throw std::invalid_argument("compute energy: no local steps");
  if (batch < 1.0 || batch > dev.data_size)
    throw std::invalid_argument("compute energy: batch outside [1, N]");
  return 0.5 * dev.cap_coeff * dev.cycles_per_sample * local_steps * batch *
         dev.clock_rate * dev.clock_rate;
}

double transmit_energy(const DeviceProfile& dev, double payload_bits) {
  dev.validate();
  if (payload_bits <= 0.0) throw std::invalid_argument("transmit energy: empty payload");
  return dev.tx_power * payload_bits / dev.link_rate;
}

double compute_time(const std::vector<DeviceProfile>& devices, int local_steps,
                    std::span<const double> batch_row) {
  if (devices.empty()) throw std::invalid_argument("compute time: no devices");
  if (batch_row.size() != devices.size())
    throw std::invalid_argument("compute time: batch row length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const double t =
        local_steps * devices[i].cycles_per_sample * batch_row[i] / devices[i].clock_rate;
    worst = std::max(worst, t);
  }
  return worst;
}

double transmit_time(const std::vector<DeviceProfile>& devices, double payload_bits) {
  if (devices.empty()) throw std::invalid_argument("transmit time: no devices");
  double worst = 0.0;
  for (const auto& dev : devices) worst = std::max(worst, payload_bits / dev.link_rate);
  return worst;
}

BatteryReport battery_report(const std::vector<DeviceProfile>& devices,
                             const MinibatchSchedule& batches, int local_steps,
                             double payload_bits) {
  if (batches.devices != static_cast<int>(devices.size()))
    throw std::invalid_argument("battery report: device count mismatch");
  BatteryReport rep;
  rep.spent.assign(devices.size(), 0.0);
  rep.margin.assign(devices.size(), 0.0);
  for (int k = 0; k < batches.rounds; ++k)
    for (std::size_t i = 0; i < devices.size(); ++i)
      rep.spent[i] += compute_energy(devices[i], local_steps, batches.at(k, i)) +
                      transmit_energy(devices[i], payload_bits);
  for (std::size_t i = 0; i < devices.size(); ++i) {
    rep.margin[i] = devices[i].battery - rep.spent[i];
    if (rep.margin[i] < 0.0) rep.ok = false;
  }
  return rep;
}

NetworkSnapshot snapshot_from_profiles(const std::vector<DeviceProfile>& devices) {
  std::vector<double> sizes, theta, spread;
  sizes.reserve(devices.size());
  theta.reserve(devices.size());
  spread.reserve(devices.size());
  for (const auto& dev : devices) {
    dev.validate();
    sizes.push_back(dev.data_size);
    theta.push_back(dev.variability);
    spread.push_back(dev.feature_stddev);
  }
  return NetworkSnapshot::from_sizes(std::move(sizes), std::move(theta),
                                     std::move(spread));
}

double objective_value(const std::vector<DeviceProfile>& devices,
                       const MinibatchSchedule& batches,
                       const CombinerSchedule& combiner, const CostWeights& weights,
                       const HyperParams& hp, const NetworkSnapshot& net) {
  weights.validate();
  hp.validate();
  batches.validate(net);

  double cost = 0.0;
  for (int k = 0; k < batches.rounds; ++k) {
    double energy = 0.0;
    for (std::size_t i = 0; i < devices.size(); ++i)
      energy += compute_energy(devices[i], hp.local_steps, batches.at(k, i)) +
                transmit_energy(devices[i], weights.payload_bits);
    const double time = compute_time(devices, hp.local_steps, batches.row(k)) +
                        transmit_time(devices, weights.payload_bits);
    cost += weights.energy_weight * energy + weights.time_weight * time;
  }

  const double psi = total_divergence_bound(combiner, batches, net, hp);
  cost += weights.gap_weight * optimality_gap(psi, hp);
  return cost;
}

}
