#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sfda/simulator.hpp"

using namespace sfda;

namespace {

SimConfig small_config(int devices, int rounds, int tau, int delay, int per_device,
                       double batch, std::uint64_t seed) {
  SimConfig cfg;
  cfg.hp.rounds = rounds;
  cfg.hp.local_steps = tau;
  cfg.hp.delay = delay;
  cfg.datasets = generate_synthetic(seed, devices, per_device, 3, 1.0);
  cfg.batches = MinibatchSchedule::uniform(rounds, devices, batch);
  cfg.combiner = CombinerSchedule::constant(rounds, 1.0);
  cfg.seed = seed;
  return cfg;
}

bool same_weights(const ModelParams& a, const ModelParams& b) {
  if (a.dim() != b.dim()) return false;
  for (int j = 0; j < a.dim(); ++j)
    if (a.weights[j] != b.weights[j]) return false;
  return true;
}

}  // namespace

TEST_CASE("delay channel releases exactly on time, in order") {
  DelayChannel<int> ch;
  CHECK(ch.empty());
  ch.push(7, 5);
  CHECK_FALSE(ch.empty());
  CHECK(ch.pending() == 1);
  CHECK_FALSE(ch.poll_at(4).has_value());  // early: stays queued
  CHECK(ch.pending() == 1);
  auto got = ch.poll_at(5);
  REQUIRE(got.has_value());
  CHECK(*got == 7);
  CHECK_FALSE(ch.poll_at(5).has_value());
  CHECK(ch.empty());

  ch.push(1, 2);
  ch.push(2, 2);  // same release: first in, first out
  CHECK(*ch.poll_at(2) == 1);
  CHECK(*ch.poll_at(2) == 2);

  ch.push(3, 9);
  CHECK_THROWS_AS(ch.push(4, 8), std::logic_error);
}

TEST_CASE("combiner update hand value") {
  const ModelParams local{{2.0}};
  const ModelParams global{{1.0}};
  const std::vector<double> step = {0.2};
  const ModelParams out = synchronize(local, global, step, 0.5);
  // 0.5 * 1 + 0.5 * (2 - 0.2) = 1.4
  CHECK(out.weights[0] == doctest::Approx(1.4).epsilon(1e-15));

  // Full weight on the server model reproduces it exactly.
  const ModelParams pinned = synchronize(local, global, step, 1.0);
  CHECK(pinned.weights[0] == 1.0);

  CHECK_THROWS_AS(synchronize(local, global, step, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(synchronize(local, global, step, 1.5), std::invalid_argument);
  const std::vector<double> wrong = {0.2, 0.3};
  CHECK_THROWS_AS(synchronize(local, global, wrong, 0.5), std::invalid_argument);
}

TEST_CASE("aggregation is the weighted mean") {
  const std::vector<ModelParams> two = {ModelParams{{0.0}}, ModelParams{{1.0}}};
  const std::vector<double> w = {0.25, 0.75};
  CHECK(aggregate(two, w).weights[0] == doctest::Approx(0.75));

  std::vector<ModelParams> five;
  for (int v = 1; v <= 5; ++v) five.push_back(ModelParams{{double(v)}});
  const std::vector<double> even(5, 0.2);
  CHECK(aggregate(five, even).weights[0] == doctest::Approx(3.0));

  const std::vector<double> bad = {0.5, 0.25};
  CHECK_THROWS_AS(aggregate(two, bad), std::invalid_argument);
  CHECK_THROWS_AS(aggregate({}, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("weights follow the data sizes") {
  auto data = generate_synthetic(3, 2, 4, 2, 1.0);
  data[1].features.resize(12, std::vector<double>(2, 0.0));
  data[1].labels.resize(12, 0.0);
  const std::vector<double> rho = data_weights(data);
  CHECK(rho[0] == doctest::Approx(0.25));
  CHECK(rho[1] == doctest::Approx(0.75));
}

TEST_CASE("best model selection breaks ties toward the earliest") {
  const auto data = generate_synthetic(11, 1, 8, 2, 0.5);
  const std::vector<double> rho = {1.0};
  const ModelParams a{{0.1, -0.2}};
  const ModelParams b{{0.5, 0.9}};

  const auto tied = select_best({a, a}, data, rho, LossKind::Logistic);
  CHECK(tied.first == 0);
  CHECK(tied.second == global_loss(a, data, rho, LossKind::Logistic));

  const double la = global_loss(a, data, rho, LossKind::Logistic);
  const double lb = global_loss(b, data, rho, LossKind::Logistic);
  const auto mixed = select_best({a, b}, data, rho, LossKind::Logistic);
  CHECK(mixed.first == (lb < la ? 1 : 0));
  CHECK(mixed.second == std::min(la, lb));
}

TEST_CASE("no delay with full server weight is plain periodic averaging") {
  const int I = 2, K = 3, tau = 4, N = 6;
  SimConfig cfg = small_config(I, K, tau, 0, N, 3.0, 21);
  cfg.batches.at(1, 0) = 6.0;  // mix of partial and full batches
  cfg.record_devices = true;
  const SimTrace trace = run_training(cfg);
  REQUIRE(static_cast<int>(trace.aggregates.size()) == K);
  REQUIRE(static_cast<int>(trace.device_steps.size()) == K * tau);

  // Mirror of the protocol without any channels: step every tick, average and
  // broadcast every tau ticks.
  const std::vector<double> rhos = data_weights(cfg.datasets);
  const int dim = cfg.datasets[0].dim();
  std::vector<ModelParams> w(I, ModelParams::zeros(dim));
  std::vector<Rng> rng;
  for (int i = 0; i < I; ++i) rng.emplace_back(substream_seed(cfg.seed, i));
  std::vector<ModelParams> aggs;
  std::size_t at = 0;
  for (int t = 1; t <= K * tau; ++t) {
    const int kr = std::clamp((t - 1) / tau, 0, K - 1);
    for (int i = 0; i < I; ++i) {
      const std::vector<double> prev = w[i].weights;
      const auto drawn =
          minibatch_gradient(w[i], cfg.datasets[i],
                             static_cast<int>(cfg.batches.at(kr, i)), rng[i], cfg.kind);
      std::vector<double> step(dim);
      for (int j = 0; j < dim; ++j) step[j] = cfg.hp.eta * drawn.first[j];
      for (int j = 0; j < dim; ++j) w[i].weights[j] = prev[j] - step[j];
    }
    if (t % tau == 0) {
      aggs.push_back(aggregate(w, rhos));
      if (t / tau <= K - 1)
        for (int i = 0; i < I; ++i) w[i] = aggs.back();
    }
    REQUIRE(at < trace.device_steps.size());
    CHECK(trace.device_steps[at].tick == t);
    for (int i = 0; i < I; ++i)
      CHECK(same_weights(trace.device_steps[at].models[i], w[i]));
    ++at;
  }
  for (int k = 0; k < K; ++k) CHECK(same_weights(trace.aggregates[k], aggs[k]));
}

TEST_CASE("single device with full batches tracks the centralized run exactly") {
  SimConfig cfg = small_config(1, 3, 4, 0, 8, 8.0, 5);
  cfg.record_reference = true;
  const SimTrace trace = run_training(cfg);
  REQUIRE(trace.rounds.size() == 3);
  REQUIRE(trace.reference_end.size() == 3);
  for (const auto& rec : trace.rounds) CHECK(rec.divergence == 0.0);
}

TEST_CASE("identical devices reduce to one device") {
  const auto one = generate_synthetic(9, 1, 6, 3, 1.0);
  SimConfig solo = small_config(1, 2, 3, 0, 6, 6.0, 9);
  solo.datasets = one;

  SimConfig duo = solo;
  duo.datasets = {one[0], one[0]};
  duo.batches = MinibatchSchedule::uniform(2, 2, 6.0);

  const SimTrace a = run_training(solo);
  const SimTrace b = run_training(duo);
  REQUIRE(a.aggregates.size() == b.aggregates.size());
  for (std::size_t k = 0; k < a.aggregates.size(); ++k)
    CHECK(same_weights(a.aggregates[k], b.aggregates[k]));
}

TEST_CASE("training runs are deterministic") {
  SimConfig cfg = small_config(3, 2, 5, 4, 10, 4.0, 33);
  cfg.combiner = CombinerSchedule::constant(2, 0.6);
  const SimTrace a = run_training(cfg);
  const SimTrace b = run_training(cfg);
  REQUIRE(a.aggregates.size() == b.aggregates.size());
  for (std::size_t k = 0; k < a.aggregates.size(); ++k) {
    CHECK(same_weights(a.aggregates[k], b.aggregates[k]));
    CHECK(a.rounds[k].loss == b.rounds[k].loss);
    CHECK(a.rounds[k].accuracy == b.rounds[k].accuracy);
  }
  CHECK(a.best_round == b.best_round);
  CHECK(a.best_loss == b.best_loss);
}

TEST_CASE("a delay equal to the round length still completes") {
  SimConfig cfg = small_config(2, 2, 3, 3, 6, 3.0, 17);
  cfg.combiner = CombinerSchedule::constant(2, 0.5);
  const SimTrace trace = run_training(cfg);
  REQUIRE(trace.rounds.size() == 2);
  CHECK(trace.rounds[0].tick == 0);  // models uploaded at t = tau - delay
  CHECK(trace.rounds[1].tick == 3);
  for (const auto& rec : trace.rounds) {
    CHECK(std::isfinite(rec.loss));
    CHECK(rec.alpha_used == 0.5);
    CHECK(std::isnan(rec.divergence));  // reference off
  }
}

TEST_CASE("round records carry the energy and time ledgers") {
  SimConfig cfg = small_config(2, 2, 3, 2, 10, 5.0, 12);
  const SimTrace bare = run_training(cfg);
  for (const auto& rec : bare.rounds) {
    CHECK(rec.energy_to_date == 0.0);
    CHECK(rec.time_to_date == 0.0);
  }

  cfg.profiles.assign(2, DeviceProfile{});
  const SimTrace priced = run_training(cfg);
  const double round_energy =
      2 * (compute_energy(DeviceProfile{}, 3, 5.0) +
           transmit_energy(DeviceProfile{}, cfg.payload_bits));
  const double round_time =
      compute_time(cfg.profiles, 3, cfg.batches.row(0)) +
      transmit_time(cfg.profiles, cfg.payload_bits);
  CHECK(priced.rounds[0].energy_to_date ==
        doctest::Approx(round_energy).epsilon(1e-12));
  CHECK(priced.rounds[1].energy_to_date ==
        doctest::Approx(2 * round_energy).epsilon(1e-12));
  CHECK(priced.rounds[0].time_to_date == doctest::Approx(round_time).epsilon(1e-12));
  CHECK(priced.rounds[1].time_to_date ==
        doctest::Approx(2 * round_time).epsilon(1e-12));
}

TEST_CASE("ridge runs report no accuracy") {
  SimConfig cfg = small_config(2, 2, 3, 1, 6, 3.0, 4);
  cfg.kind = LossKind::Ridge;
  const SimTrace trace = run_training(cfg);
  for (const auto& rec : trace.rounds) {
    CHECK(std::isfinite(rec.loss));
    CHECK(std::isnan(rec.accuracy));
  }
}

TEST_CASE("the recorded best matches the loss-minimizing aggregate") {
  SimConfig cfg = small_config(2, 4, 3, 2, 8, 4.0, 77);
  const SimTrace trace = run_training(cfg);
  const std::vector<double> rhos = data_weights(cfg.datasets);
  int expect = 0;
  double expect_loss = global_loss(trace.aggregates[0], cfg.datasets, rhos, cfg.kind);
  for (int k = 1; k < 4; ++k) {
    const double v = global_loss(trace.aggregates[k], cfg.datasets, rhos, cfg.kind);
    if (v < expect_loss) {
      expect = k;
      expect_loss = v;
    }
  }
  CHECK(trace.best_round == expect);
  CHECK(trace.best_loss == expect_loss);
  CHECK(same_weights(trace.best, trace.aggregates[expect]));
}

TEST_CASE("configuration validation") {
  SimConfig cfg = small_config(2, 2, 3, 1, 6, 3.0, 2);
  CHECK_NOTHROW(cfg.validate());

  SimConfig bad = cfg;
  bad.batches.at(0, 0) = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.batches.at(1, 1) = 7.0;  // above the 6 local samples
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.combiner = CombinerSchedule::constant(3, 1.0);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.init = ModelParams::zeros(5);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.payload_bits = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.profiles.assign(3, DeviceProfile{});
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.datasets[1].features.assign(6, std::vector<double>(4, 0.0));
  bad.datasets[1].labels.assign(6, 0.0);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
