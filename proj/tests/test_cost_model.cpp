#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sfda/cost_model.hpp"

using namespace sfda;

TEST_CASE("per-round energies by hand") {
  const DeviceProfile dev;  // 5e-12 F, 620 cycles/sample, 1 MHz, 0.1 W, 1 Mb/s
  // 0.5 * 5e-12 * 620 * 20 * 25 * (1e6)^2 = 775 kJ of compute.
  CHECK(compute_energy(dev, 20, 25.0) == doctest::Approx(775000.0).epsilon(1e-12));
  // Energy is linear in the batch.
  CHECK(compute_energy(dev, 20, 5.0) ==
        doctest::Approx(775000.0 / 5.0).epsilon(1e-12));
  // 0.1 W * 16000 bits / 1e6 b/s = 1.6 mJ per upload.
  CHECK(transmit_energy(dev, 16000.0) == doctest::Approx(0.0016).epsilon(1e-12));
}

TEST_CASE("per-round times by hand") {
  const std::vector<DeviceProfile> devs(1);
  const std::vector<double> row = {25.0};
  // 20 steps * 620 cycles * 25 samples / 1e6 Hz = 0.31 s.
  CHECK(compute_time(devs, 20, row) == doctest::Approx(0.31).epsilon(1e-12));
  CHECK(transmit_time(devs, 16000.0) == doctest::Approx(0.016).epsilon(1e-12));
}

TEST_CASE("times track the slowest device") {
  std::vector<DeviceProfile> devs(2);
  devs[1].clock_rate = 2e6;  // faster chip
  devs[1].link_rate = 5e5;   // slower radio
  const std::vector<double> row = {10.0, 25.0};
  // Device 0: 20*620*10/1e6 = 0.124; device 1: 20*620*25/2e6 = 0.155.
  CHECK(compute_time(devs, 20, row) == doctest::Approx(0.155).epsilon(1e-12));
  CHECK(transmit_time(devs, 16000.0) == doctest::Approx(0.032).epsilon(1e-12));
}

TEST_CASE("input validation") {
  DeviceProfile dev;
  CHECK_THROWS_AS(compute_energy(dev, 0, 5.0), std::invalid_argument);
  CHECK_THROWS_AS(compute_energy(dev, 20, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(compute_energy(dev, 20, 26.0), std::invalid_argument);
  CHECK_THROWS_AS(transmit_energy(dev, 0.0), std::invalid_argument);
  dev.battery = 0.0;
  CHECK_THROWS_AS(dev.validate(), std::invalid_argument);
  dev = DeviceProfile{};
  dev.link_rate = -1.0;
  CHECK_THROWS_AS(dev.validate(), std::invalid_argument);

  CostWeights w;
  CHECK_NOTHROW(w.validate());
  w.payload_bits = 0.0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
}

TEST_CASE("battery accounting over a schedule") {
  const std::vector<DeviceProfile> devs(2);
  const MinibatchSchedule batches = MinibatchSchedule::uniform(2, 2, 25.0);
  const BatteryReport rep = battery_report(devs, batches, 20, 16000.0);
  REQUIRE(rep.spent.size() == 2);
  const double per_device = 2 * (775000.0 + 0.0016);
  CHECK(rep.spent[0] == doctest::Approx(per_device).epsilon(1e-12));
  CHECK(rep.margin[0] == doctest::Approx(7.5e6 - per_device).epsilon(1e-12));
  CHECK(rep.ok);

  std::vector<DeviceProfile> drained(2);
  drained[1].battery = 1.0;
  CHECK_FALSE(battery_report(drained, batches, 20, 16000.0).ok);

  const MinibatchSchedule wrong = MinibatchSchedule::uniform(2, 3, 5.0);
  CHECK_THROWS_AS(battery_report(devs, wrong, 20, 16000.0), std::invalid_argument);
}

TEST_CASE("network view built from profiles") {
  std::vector<DeviceProfile> devs(2);
  devs[0].data_size = 10.0;
  devs[1].data_size = 30.0;
  devs[1].variability = 3.0;
  const NetworkSnapshot net = snapshot_from_profiles(devs);
  CHECK(net.rho[0] == doctest::Approx(0.25));
  CHECK(net.rho[1] == doctest::Approx(0.75));
  CHECK(net.data_sizes[1] == 30.0);
  CHECK(net.variability[1] == 3.0);
  CHECK(net.stddev[0] == 0.2);
}

TEST_CASE("objective composes the published parts") {
  const std::vector<DeviceProfile> devs(2);
  HyperParams hp;
  hp.rounds = 3;
  const NetworkSnapshot net = snapshot_from_profiles(devs);
  MinibatchSchedule batches = MinibatchSchedule::uniform(3, 2, 25.0);
  batches.at(1, 0) = 5.0;
  const CombinerSchedule combiner = CombinerSchedule::constant(3, 0.8);
  const CostWeights w;

  double expected = 0.0;
  for (int k = 0; k < 3; ++k) {
    double energy = 0.0;
    for (int i = 0; i < 2; ++i)
      energy += compute_energy(devs[i], hp.local_steps, batches.at(k, i)) +
                transmit_energy(devs[i], w.payload_bits);
    const double time = compute_time(devs, hp.local_steps, batches.row(k)) +
                        transmit_time(devs, w.payload_bits);
    expected += w.energy_weight * energy + w.time_weight * time;
  }
  expected += w.gap_weight *
              optimality_gap(total_divergence_bound(combiner, batches, net, hp), hp);

  CHECK(objective_value(devs, batches, combiner, w, hp, net) ==
        doctest::Approx(expected).epsilon(1e-14));
}
