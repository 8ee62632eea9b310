#include "sfda/bounds.hpp"

#include <cmath>
#include <stdexcept>

namespace sfda {

double HyperParams::growth(double x) const {
  return std::exp(x * std::log1p(eta * beta));
}

void HyperParams::validate() const {
  if (eta <= 0.0) throw std::invalid_argument("hyperparams: eta must be positive");
  if (beta <= 0.0) throw std::invalid_argument("hyperparams: beta must be positive");
  if (eta >= 2.0 / beta)
    throw std::invalid_argument("hyperparams: eta must be below 2/beta");
  if (lipschitz < 0.0) throw std::invalid_argument("hyperparams: negative gradient bound");
  if (delta < 0.0) throw std::invalid_argument("hyperparams: negative dissimilarity");
  if (phi <= 0.0) throw std::invalid_argument("hyperparams: phi must be positive");
  if (local_steps < 1) throw std::invalid_argument("hyperparams: local_steps must be >= 1");
  if (rounds < 1) throw std::invalid_argument("hyperparams: rounds must be >= 1");
  if (delay < 0) throw std::invalid_argument("hyperparams: negative delay");
  if (delay > local_steps)
    throw std::invalid_argument("hyperparams: delay exceeds tau");
}

NetworkSnapshot NetworkSnapshot::from_sizes(std::vector<double> data_sizes,
                                            std::vector<double> variability,
                                            std::vector<double> stddev) {
  NetworkSnapshot net;
  double total = 0.0;
  for (double n : data_sizes) total += n;
  if (total <= 0.0) throw std::invalid_argument("network: empty data sizes");
  net.rho.resize(data_sizes.size());
  for (std::size_t i = 0; i < data_sizes.size(); ++i) net.rho[i] = data_sizes[i] / total;
  net.data_sizes = std::move(data_sizes);
  net.variability = std::move(variability);
  net.stddev = std::move(stddev);
  net.validate();
  return net;
}

void NetworkSnapshot::validate() const {
  const std::size_t n = rho.size();
  if (n == 0) throw std::invalid_argument("network: no devices");
  if (data_sizes.size() != n || variability.size() != n || stddev.size() != n)
    throw std::invalid_argument("network: per-device arrays disagree in length");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (rho[i] <= 0.0) throw std::invalid_argument("network: nonpositive weight");
    if (data_sizes[i] < 1.0) throw std::invalid_argument("network: data size below 1");
    if (variability[i] < 0.0 || stddev[i] < 0.0)
      throw std::invalid_argument("network: negative data constants");
    total += rho[i];
  }
  if (std::fabs(total - 1.0) > 1e-12)
    throw std::invalid_argument("network: weights must sum to 1");
}

MinibatchSchedule MinibatchSchedule::uniform(int rounds, int devices, double size) {
  MinibatchSchedule s;
  s.rounds = rounds;
  s.devices = devices;
  s.sizes.assign(static_cast<size_t>(rounds) * devices, size);
  return s;
}

void MinibatchSchedule::validate(const NetworkSnapshot& net) const {
  if (devices != net.devices())
    throw std::invalid_argument("minibatch schedule: device count mismatch");
  if (rounds < 1) throw std::invalid_argument("minibatch schedule: no rounds");
  if (sizes.size() != static_cast<size_t>(rounds) * devices)
    throw std::invalid_argument("minibatch schedule: bad storage size");
  for (int k = 0; k < rounds; ++k)
    for (int i = 0; i < devices; ++i) {
      const double v = at(k, i);
      if (v < 1.0 || v > net.data_sizes[i])
        throw std::invalid_argument("minibatch schedule: entry outside [1, N_i]");
    }
}

CombinerSchedule CombinerSchedule::constant(int rounds, double value) {
  CombinerSchedule c;
  c.alpha.assign(rounds, value);
  c.validate();
  return c;
}

void CombinerSchedule::validate() const {
  if (alpha.empty()) throw std::invalid_argument("combiner schedule: empty");
  for (double a : alpha)
    if (!(a > 0.0) || a > 1.0)
      throw std::invalid_argument("combiner schedule: weight outside (0, 1]");
}

double device_noise_bound(double variability, double stddev, double data_size,
                          double batch) {
  if (data_size < 1.0) throw std::invalid_argument("noise bound: data size below 1");
  if (batch < 1.0 || batch > data_size)
    throw std::invalid_argument("noise bound: batch outside [1, N]");
  if (variability < 0.0 || stddev < 0.0)
    throw std::invalid_argument("noise bound: negative constants");
  return variability * stddev * std::sqrt(2.0 * (data_size - batch) / (data_size * batch));
}

double network_noise_bound(const NetworkSnapshot& net, std::span<const double> batch_row) {
  net.validate();
  if (batch_row.size() != static_cast<size_t>(net.devices()))
    throw std::invalid_argument("network noise: batch row length mismatch");
  double s = 0.0;
  for (int i = 0; i < net.devices(); ++i)
    s += net.rho[i] * device_noise_bound(net.variability[i], net.stddev[i],
                                         net.data_sizes[i], batch_row[i]);
  return s;
}

double drift_term(double x, double sigma_k, const HyperParams& hp) {
  if (x < 0.0) throw std::invalid_argument("drift term: negative window");
  if (sigma_k < 0.0) throw std::invalid_argument("drift term: negative noise");
  const double mix = hp.delta + sigma_k;
  return (mix / hp.beta) * (hp.growth(x) - 1.0) - hp.eta * mix * x;
}

double staleness_term(int k, double alpha_k, double sigma_k, const HyperParams& hp) {
  if (k < 0) throw std::invalid_argument("staleness term: negative round");
  if (!(alpha_k > 0.0) || alpha_k > 1.0)
    throw std::invalid_argument("staleness term: alpha outside (0, 1]");
  if (sigma_k < 0.0) throw std::invalid_argument("staleness term: negative noise");
  const double reach = 1.0 - std::pow(1.0 - alpha_k, k);
  return reach * 2.0 * hp.eta * (hp.lipschitz + sigma_k) *
         (hp.local_steps / alpha_k - hp.delay);
}

double round_divergence_bound(int k, double alpha_k, double sigma_k,
                              const HyperParams& hp) {
  hp.validate();
  const double tau = hp.local_steps;
  const double del = hp.delay;
  const double eps = staleness_term(k, alpha_k, sigma_k, hp);
  const double one_minus = 1.0 - alpha_k;
  return one_minus * eps * (hp.growth(tau) - 1.0) +
         one_minus * drift_term(tau, sigma_k, hp) +
         alpha_k * drift_term(tau - del, sigma_k, hp) +
         alpha_k * hp.eta * del * hp.lipschitz * hp.growth(tau - del) +
         hp.eta * sigma_k * (tau - alpha_k * del);
}

double total_divergence_bound(const CombinerSchedule& combiner,
                              const MinibatchSchedule& batches,
                              const NetworkSnapshot& net, const HyperParams& hp) {
  hp.validate();
  combiner.validate();
  batches.validate(net);
  if (combiner.rounds() != hp.rounds || batches.rounds != hp.rounds)
    throw std::invalid_argument("divergence bound: schedule length != rounds");
  double total = 0.0;
  for (int j = 0; j < hp.rounds; ++j) {
    const double sigma_k = network_noise_bound(net, batches.row(j));
    total += round_divergence_bound(j + 1, combiner.alpha[j], sigma_k, hp);
  }
  return total;
}

double optimality_gap(double psi_total, const HyperParams& hp) {
  hp.validate();
  if (psi_total < 0.0) throw std::invalid_argument("optimality gap: negative divergence");
  const double denom = hp.eta * hp.phi * static_cast<double>(hp.horizon());
  const double lead = 1.0 / (2.0 * denom);
  const double lp = hp.lipschitz * psi_total;
  return lead + std::sqrt(lead * lead + lp / denom) + lp;
}

}
