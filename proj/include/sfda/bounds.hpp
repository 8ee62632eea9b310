#pragma once

#include <span>
#include <vector>

namespace sfda {

// Learning-side constants shared by the bound evaluator, the combiner-weight
// optimizer, the minibatch optimizer, and the simulator.
struct HyperParams {
  double eta = 0.02;       // SGD step size
  double beta = 1.0;       // smoothness of the local losses
  double lipschitz = 25.0; // gradient-norm bound L
  double delta = 0.5;      // gradient dissimilarity across devices
  double phi = 0.025;      // strong-convexity-style curvature constant
  int local_steps = 20;    // ticks per aggregation round (tau)
  int delay = 19;          // round-trip staleness in ticks (Delta)
  int rounds = 15;         // aggregation rounds (K)

  long long horizon() const { return static_cast<long long>(rounds) * local_steps; }

  // (1 + eta*beta)^x for real x, evaluated as exp(x*log1p(eta*beta)).
  double growth(double x) const;

  void validate() const;  // throws std::invalid_argument
};

// Data-weighting view of the device population used by the bound terms.
struct NetworkSnapshot {
  std::vector<double> rho;          // aggregation weights, sum to 1
  std::vector<double> data_sizes;   // N_i
  std::vector<double> variability;  // Theta_i
  std::vector<double> stddev;       // S_i

  int devices() const { return static_cast<int>(rho.size()); }
  // rho_i = N_i / sum N_j
  static NetworkSnapshot from_sizes(std::vector<double> data_sizes,
                                    std::vector<double> variability,
                                    std::vector<double> stddev);
  void validate() const;
};

// Per-round, per-device minibatch sizes. Stored as reals because the
// network optimizer relaxes them; the simulator requires integral entries.
struct MinibatchSchedule {
  int rounds = 0;
  int devices = 0;
  std::vector<double> sizes;  // row-major, rounds x devices

  double& at(int k, int i) { return sizes[static_cast<size_t>(k) * devices + i]; }
  double at(int k, int i) const { return sizes[static_cast<size_t>(k) * devices + i]; }
  std::span<const double> row(int k) const {
    return {sizes.data() + static_cast<size_t>(k) * devices, static_cast<size_t>(devices)};
  }
  static MinibatchSchedule uniform(int rounds, int devices, double size);
  void validate(const NetworkSnapshot& net) const;  // 1 <= n_i(k) <= N_i
};

// Per-round combiner weights, each in (0, 1].
struct CombinerSchedule {
  std::vector<double> alpha;

  int rounds() const { return static_cast<int>(alpha.size()); }
  static CombinerSchedule constant(int rounds, double value);
  void validate() const;
};

// Expected minibatch gradient error for one device:
//   Theta * S * sqrt(2 (N - n) / (N n)).
double device_noise_bound(double variability, double stddev, double data_size,
                          double batch);

// Data-weighted network aggregate of the device noise bounds for one round.
double network_noise_bound(const NetworkSnapshot& net, std::span<const double> batch_row);

// Drift accumulated over a window of x steps:
//   ((delta + sigma)/beta) [(1+eta beta)^x - 1] - eta (delta + sigma) x.
// Zero at x = 0 and x = 1, nonnegative and increasing beyond.
double drift_term(double x, double sigma_k, const HyperParams& hp);

// Residual deviation of device models from the global model at the start of
// round k: (1 - (1-alpha)^k) * 2 eta (L + sigma) (tau/alpha - Delta).
double staleness_term(int k, double alpha_k, double sigma_k, const HyperParams& hp);

// Per-round divergence bound between the global model and the centralized
// reference over one aggregation window.
double round_divergence_bound(int k, double alpha_k, double sigma_k,
                              const HyperParams& hp);

// Sum of per-round divergence bounds; schedule row j contributes at index j+1.
double total_divergence_bound(const CombinerSchedule& combiner,
                              const MinibatchSchedule& batches,
                              const NetworkSnapshot& net, const HyperParams& hp);

// Optimality-gap bound as a function of the accumulated divergence:
//   1/(2 eta phi T) + sqrt(1/(2 eta phi T)^2 + L Psi/(eta phi T)) + L Psi.
double optimality_gap(double psi_total, const HyperParams& hp);

}
