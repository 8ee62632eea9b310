#include "sfda/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

// Protocol timeline. One tick is one local SGD step. Devices run from
// t = -delay+1 through t = K*tau - delay, uploading their models every tau
// ticks starting at t = tau - delay. An upload spends ceil(delay/2) ticks in
// flight; the server then averages the cohort and broadcasts, and the result
// lands back on the devices floor(delay/2) ticks later, exactly at the next
// multiple of tau, where it is folded in with the combiner weight for that
// round. The loop runs through t = K*tau so the final upload is still
// collected after the devices stop.

namespace sfda {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

void SimConfig::validate() const {
  hp.validate();
  if (datasets.empty()) throw std::invalid_argument("SimConfig: no datasets");
  const int d = datasets[0].dim();
  for (const auto& ds : datasets) {
    ds.validate();
    if (ds.dim() != d)
      throw std::invalid_argument("SimConfig: datasets disagree on feature dimension");
  }
  if (!profiles.empty() && static_cast<int>(profiles.size()) != devices())
    throw std::invalid_argument(
        "SimConfig: profiles must be empty or match the device count");
  for (const auto& p : profiles) p.validate();
  if (batches.rounds != hp.rounds || batches.devices != devices())
    throw std::invalid_argument(
        "SimConfig: batch schedule shape must be rounds x devices");
  for (int k = 0; k < batches.rounds; ++k)
    for (int i = 0; i < batches.devices; ++i) {
      const double raw = batches.at(k, i);
      const double snapped = std::round(raw);
      if (std::fabs(raw - snapped) > 1e-9)
        throw std::invalid_argument("SimConfig: batch size at round " +
                                    std::to_string(k) + ", device " + std::to_string(i) +
                                    " is not an integer");
      if (snapped < 1.0 || snapped > datasets[i].size())
        throw std::invalid_argument("SimConfig: batch size at round " +
                                    std::to_string(k) + ", device " + std::to_string(i) +
                                    " is outside [1, N_i]");
    }
  if (combiner.rounds() != hp.rounds)
    throw std::invalid_argument(
        "SimConfig: combiner schedule length must equal the round count");
  combiner.validate();
  if (init.dim() != 0 && init.dim() != d)
    throw std::invalid_argument(
        "SimConfig: initial model dimension does not match the data");
  if (!(payload_bits > 0.0))
    throw std::invalid_argument("SimConfig: payload_bits must be positive");
}

std::vector<double> data_weights(const std::vector<Dataset>& datasets) {
  double total = 0.0;
  for (const auto& d : datasets) total += d.size();
  if (total <= 0.0) throw std::invalid_argument("data_weights: empty datasets");
  std::vector<double> rho(datasets.size());
  for (size_t i = 0; i < datasets.size(); ++i) rho[i] = datasets[i].size() / total;
  return rho;
}

ModelParams aggregate(const std::vector<ModelParams>& locals,
                      std::span<const double> rhos) {
  if (locals.empty()) throw std::invalid_argument("aggregate: no models");
  if (locals.size() != rhos.size())
    throw std::invalid_argument("aggregate: weight/model count mismatch");
  double total = 0.0;
  for (double r : rhos) total += r;
  if (std::fabs(total - 1.0) > 1e-9)
    throw std::invalid_argument("aggregate: weights must sum to 1");
  const int d = locals[0].dim();
  ModelParams out = ModelParams::zeros(d);
  for (size_t i = 0; i < locals.size(); ++i) {
    if (locals[i].dim() != d)
      throw std::invalid_argument("aggregate: model dimension mismatch");
    axpy(rhos[i], locals[i].weights, out.weights);
  }
  return out;
}

ModelParams synchronize(const ModelParams& local_prev, const ModelParams& delayed_global,
                        std::span<const double> grad_step, double alpha_k) {
  if (!(alpha_k > 0.0) || alpha_k > 1.0)
    throw std::invalid_argument("synchronize: alpha must lie in (0, 1]");
  const int d = local_prev.dim();
  if (delayed_global.dim() != d || static_cast<int>(grad_step.size()) != d)
    throw std::invalid_argument("synchronize: dimension mismatch");
  ModelParams out = ModelParams::zeros(d);
  for (int j = 0; j < d; ++j)
    out.weights[j] = alpha_k * delayed_global.weights[j] +
                     (1.0 - alpha_k) * (local_prev.weights[j] - grad_step[j]);
  return out;
}

double global_loss(const ModelParams& model, const std::vector<Dataset>& datasets,
                   std::span<const double> rhos, LossKind kind) {
  double v = 0.0;
  for (size_t i = 0; i < datasets.size(); ++i)
    v += rhos[i] * loss(model, datasets[i], kind);
  return v;
}

double global_accuracy(const ModelParams& model, const std::vector<Dataset>& datasets,
                       std::span<const double> rhos) {
  double v = 0.0;
  for (size_t i = 0; i < datasets.size(); ++i)
    v += rhos[i] * classification_accuracy(model, datasets[i]);
  return v;
}

std::pair<int, double> select_best(const std::vector<ModelParams>& candidates,
                                   const std::vector<Dataset>& datasets,
                                   std::span<const double> rhos, LossKind kind) {
  if (candidates.empty()) throw std::invalid_argument("select_best: no candidates");
  int best = 0;
  double best_loss = global_loss(candidates[0], datasets, rhos, kind);
  for (size_t c = 1; c < candidates.size(); ++c) {
    const double v = global_loss(candidates[c], datasets, rhos, kind);
    if (v < best_loss) {
      best = static_cast<int>(c);
      best_loss = v;
    }
  }
  return {best, best_loss};
}

SimTrace run_training(const SimConfig& cfg) {
  cfg.validate();
  const HyperParams& hp = cfg.hp;
  const int I = cfg.devices();
  const int K = hp.rounds;
  const int tau = hp.local_steps;
  const int delay = hp.delay;
  const int up_half = (delay + 1) / 2;
  const int down_half = delay / 2;
  const long long horizon = hp.horizon();
  const int dim = cfg.datasets[0].dim();

  const std::vector<double> rhos = data_weights(cfg.datasets);

  std::vector<int> batch(static_cast<size_t>(K) * I);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i)
      batch[static_cast<size_t>(k) * I + i] =
          static_cast<int>(std::llround(cfg.batches.at(k, i)));

  const ModelParams start = cfg.init.dim() == 0 ? ModelParams::zeros(dim) : cfg.init;

  std::vector<ModelParams> w(I, start);
  std::vector<std::vector<double>> prev(I), step(I);
  std::vector<Rng> rng;
  rng.reserve(I);
  for (int i = 0; i < I; ++i) rng.emplace_back(substream_seed(cfg.seed, i));

  std::vector<DelayChannel<ModelParams>> uplink(I);
  DelayChannel<ModelParams> downlink;
  // With a real delay the devices' first combine at t = 0 folds in the
  // starting model itself, announced ahead of the run. With no delay there is
  // nothing in flight at t = 0 and the first combine happens at t = tau.
  if (delay > 0) downlink.push(start, 0);

  SimTrace trace;
  trace.aggregates.reserve(K);
  trace.rounds.reserve(K);

  ModelParams ref = start;  // centralized comparison state, when enabled
  double energy_acc = 0.0;
  double time_acc = 0.0;

  auto finish_round = [&](const ModelParams& agg, int k) {
    if (!cfg.profiles.empty()) {
      for (int i = 0; i < I; ++i)
        energy_acc += compute_energy(cfg.profiles[i], tau, cfg.batches.at(k, i)) +
                      transmit_energy(cfg.profiles[i], cfg.payload_bits);
      time_acc += compute_time(cfg.profiles, tau, cfg.batches.row(k)) +
                  transmit_time(cfg.profiles, cfg.payload_bits);
    }
    RoundRecord rec;
    rec.round = k;
    rec.tick = static_cast<long long>(k + 1) * tau - delay;
    rec.loss = global_loss(agg, cfg.datasets, rhos, cfg.kind);
    rec.accuracy = cfg.kind == LossKind::Logistic
                       ? global_accuracy(agg, cfg.datasets, rhos)
                       : kNaN;
    rec.divergence = kNaN;
    if (cfg.record_reference) {
      // Exact descent on the size-weighted objective over the same window,
      // restarted from the previous server model.
      for (int s = 0; s < tau; ++s) {
        std::vector<double> g(dim, 0.0);
        for (int i = 0; i < I; ++i) {
          const std::vector<double> gi = gradient(ref, cfg.datasets[i], cfg.kind);
          axpy(rhos[i], gi, g);
        }
        axpy(-hp.eta, g, ref.weights);
      }
      std::vector<double> diff = agg.weights;
      axpy(-1.0, ref.weights, diff);
      rec.divergence = norm2(diff);
      trace.reference_end.push_back(ref);
      ref = agg;
    }
    rec.energy_to_date = energy_acc;
    rec.time_to_date = time_acc;
    rec.alpha_used = cfg.combiner.alpha[k];
    trace.rounds.push_back(rec);
    trace.aggregates.push_back(agg);
  };

  for (long long t = -delay + 1; t <= horizon; ++t) {
    // Device phase: one SGD step each, then upload on send ticks.
    if (t <= horizon - delay) {
      const int kr = static_cast<int>(
          std::clamp<long long>((t + delay - 1) / tau, 0, K - 1));
      for (int i = 0; i < I; ++i) {
        prev[i] = w[i].weights;
        auto drawn = minibatch_gradient(w[i], cfg.datasets[i],
                                        batch[static_cast<size_t>(kr) * I + i], rng[i],
                                        cfg.kind);
        step[i].resize(dim);
        for (int j = 0; j < dim; ++j) step[i][j] = hp.eta * drawn.first[j];
        for (int j = 0; j < dim; ++j) w[i].weights[j] = prev[i][j] - step[i][j];
      }
      if (t >= tau - delay && (t + delay) % tau == 0)
        for (int i = 0; i < I; ++i) uplink[i].push(w[i], t + up_half);
    }

    // Server phase: a cohort arrives together or not at all.
    {
      std::vector<ModelParams> got;
      for (int i = 0; i < I; ++i)
        if (auto m = uplink[i].poll_at(t)) got.push_back(std::move(*m));
      if (!got.empty()) {
        if (static_cast<int>(got.size()) != I)
          throw std::logic_error("run_training: partial cohort on the uplink");
        const ModelParams agg = aggregate(got, rhos);
        const int s = static_cast<int>((t + down_half) / tau);  // 1-based round index
        finish_round(agg, s - 1);
        // The last aggregate is the end of the run; nothing left to combine it.
        if (s <= K - 1) downlink.push(agg, static_cast<long long>(s) * tau);
      }
    }

    // Combine phase: fold the delayed server model into every device.
    if (t >= 0 && t % tau == 0 && t / tau <= K - 1) {
      if (auto global = downlink.poll_at(t)) {
        const double a = cfg.combiner.alpha[static_cast<size_t>(t / tau)];
        for (int i = 0; i < I; ++i)
          w[i] = synchronize(ModelParams{prev[i]}, *global, step[i], a);
      }
    }

    if (cfg.record_devices && t <= horizon - delay)
      trace.device_steps.push_back({t, w});
  }

  if (static_cast<int>(trace.aggregates.size()) != K)
    throw std::logic_error("run_training: expected one server model per round");

  const auto [best_idx, best_loss] =
      select_best(trace.aggregates, cfg.datasets, rhos, cfg.kind);
  trace.best = trace.aggregates[best_idx];
  trace.best_round = best_idx;
  trace.best_loss = best_loss;
  return trace;
}

}
