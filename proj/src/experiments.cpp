#include "sfda/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "sfda/idx.hpp"
#include "sfda/simulator.hpp"
#include "sfda/version.hpp"

namespace sfda {

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

NetworkSnapshot snapshot_from_config(const ExperimentConfig& cfg) {
  const int I = cfg.devices;
  return NetworkSnapshot::from_sizes(
      std::vector<double>(I, cfg.ranges.data_size),
      std::vector<double>(I, cfg.ranges.variability),
      std::vector<double>(I, cfg.ranges.feature_stddev));
}

ScheduleOptions schedule_options(const ExperimentConfig& cfg) {
  ScheduleOptions opt;
  opt.mode = cfg.alpha_mode;
  opt.fixed_alpha = cfg.fixed_alpha;
  return opt;
}

std::string trial_tag(int trial) { return "trial " + std::to_string(trial); }

// Divergence bound across noise levels, one block per round index. Nothing
// here is sampled, so the table has no trial dimension.
ExperimentResult run_psi_vs_sigma(const ExperimentConfig& cfg) {
  ExperimentResult out;
  const NetworkSnapshot net = snapshot_from_config(cfg);
  const std::vector<double> ones(net.devices(), 1.0);
  const double sigma_max = network_noise_bound(net, ones);
  const int points = 41;

  Table t;
  t.columns = {"k", "sigma", "alpha_numeric", "psi_numeric", "alpha_closed_form",
               "psi_closed_form"};
  for (int k = 1; k <= cfg.hp.rounds; ++k) {
    for (int j = 0; j < points; ++j) {
      const double sigma = sigma_max * j / (points - 1);
      const AlphaResult num = optimal_alpha_numeric(k, sigma, cfg.hp);
      const AlphaResult cf = optimal_alpha_closed_form(sigma, cfg.hp);
      t.add_row({std::to_string(k), format_number(sigma), format_number(num.value),
                 format_number(round_divergence_bound(k, num.value, sigma, cfg.hp)),
                 format_number(cf.value),
                 format_number(round_divergence_bound(k, cf.value, sigma, cfg.hp))});
    }
  }
  out.tables.push_back({to_string(cfg.kind), std::move(t)});
  return out;
}

// Optimized batch sizes for every round and device, per trial plus
// mean/stddev rows. Also runs the growth soft check.
ExperimentResult run_minibatch_over_time(const ExperimentConfig& cfg) {
  ExperimentResult out;
  const int K = cfg.hp.rounds;
  const int I = cfg.devices;
  Table t;
  t.columns = {"stat", "trial", "round", "device", "batch"};
  std::vector<std::vector<double>> cells(static_cast<size_t>(K) * I);

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t base = substream_seed(cfg.seed, trial);
    try {
      const auto profiles = sample_network(cfg, substream_seed(base, 0));
      const SpResult res =
          solve_schedule(profiles, cfg.hp, cfg.weights, schedule_options(cfg), cfg.penalty);
      if (!res.report.feasible) {
        out.notes.push_back(trial_tag(trial) + " infeasible: " + res.report.message);
        continue;
      }
      if (!res.report.converged)
        out.notes.push_back(trial_tag(trial) + " did not converge: " + res.report.message);
      for (int k = 0; k < K; ++k)
        for (int i = 0; i < I; ++i) {
          const double n = res.batches.at(k, i);
          cells[static_cast<size_t>(k) * I + i].push_back(n);
          t.add_row({"trial", std::to_string(trial), std::to_string(k + 1),
                     std::to_string(i + 1), format_number(n)});
        }
      for (int i = 0; i < I; ++i)
        for (int k = 1; k < K; ++k)
          if (res.batches.at(k, i) < res.batches.at(k - 1, i) - 1e-9) {
            out.notes.push_back("soft check: " + trial_tag(trial) + " device " +
                                std::to_string(i + 1) + " batch shrinks from round " +
                                std::to_string(k) + " to " + std::to_string(k + 1));
            break;
          }
    } catch (const std::exception& e) {
      out.notes.push_back(trial_tag(trial) + " failed: " + e.what());
    }
  }

  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i)
      t.add_row({"mean", "", std::to_string(k + 1), std::to_string(i + 1),
                 format_number(mean_of(cells[static_cast<size_t>(k) * I + i]))});
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i)
      t.add_row({"stddev", "", std::to_string(k + 1), std::to_string(i + 1),
                 format_number(stddev_of(cells[static_cast<size_t>(k) * I + i]))});
  out.tables.push_back({to_string(cfg.kind), std::move(t)});
  return out;
}

// Network-mean optimized batch size across the energy-weight sweep.
ExperimentResult run_minibatch_vs_c1(const ExperimentConfig& cfg) {
  ExperimentResult out;
  const std::vector<double> grid = c1_sweep_grid();
  const int K = cfg.hp.rounds;
  const int I = cfg.devices;
  Table t;
  t.columns = {"stat", "trial", "c1", "mean_batch"};
  std::vector<std::vector<double>> per_point(grid.size());

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t base = substream_seed(cfg.seed, trial);
    const auto profiles = sample_network(cfg, substream_seed(base, 0));
    for (size_t j = 0; j < grid.size(); ++j) {
      try {
        CostWeights w = cfg.weights;
        w.energy_weight = grid[j];
        const SpResult res =
            solve_schedule(profiles, cfg.hp, w, schedule_options(cfg), cfg.penalty);
        if (!res.report.feasible) {
          out.notes.push_back(trial_tag(trial) + " c1=" + format_number(grid[j]) +
                              " infeasible: " + res.report.message);
          continue;
        }
        double total = 0.0;
        for (int k = 0; k < K; ++k)
          for (int i = 0; i < I; ++i) total += res.batches.at(k, i);
        const double mean_batch = total / (static_cast<double>(K) * I);
        per_point[j].push_back(mean_batch);
        t.add_row({"trial", std::to_string(trial), format_number(grid[j]),
                   format_number(mean_batch)});
      } catch (const std::exception& e) {
        out.notes.push_back(trial_tag(trial) + " c1=" + format_number(grid[j]) +
                            " failed: " + e.what());
      }
    }
  }

  for (size_t j = 0; j < grid.size(); ++j)
    t.add_row({"mean", "", format_number(grid[j]), format_number(mean_of(per_point[j]))});
  for (size_t j = 0; j < grid.size(); ++j)
    t.add_row(
        {"stddev", "", format_number(grid[j]), format_number(stddev_of(per_point[j]))});
  out.tables.push_back({to_string(cfg.kind), std::move(t)});
  return out;
}

// Final schedule objective under each combiner policy, paired per trial.
ExperimentResult run_objective_opt_vs_fixed(const ExperimentConfig& cfg) {
  ExperimentResult out;
  struct Mode {
    const char* name;
    ScheduleOptions opt;
  };
  std::vector<Mode> modes;
  modes.push_back({"numeric", {}});
  modes.push_back({"closed_form", {}});
  modes.back().opt.mode = ScheduleMode::ClosedForm;
  modes.push_back({"fixed_1", {}});
  modes.back().opt.mode = ScheduleMode::Fixed;
  modes.back().opt.fixed_alpha = 1.0;
  modes.push_back({"fixed_0.5", {}});
  modes.back().opt.mode = ScheduleMode::Fixed;
  modes.back().opt.fixed_alpha = 0.5;

  Table t;
  t.columns = {"stat", "trial", "mode", "objective", "converged"};
  std::vector<std::vector<double>> per_mode(modes.size());

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t base = substream_seed(cfg.seed, trial);
    const auto profiles = sample_network(cfg, substream_seed(base, 0));
    for (size_t m = 0; m < modes.size(); ++m) {
      try {
        const SpResult res =
            solve_schedule(profiles, cfg.hp, cfg.weights, modes[m].opt, cfg.penalty);
        if (!res.report.feasible) {
          out.notes.push_back(trial_tag(trial) + " mode " + modes[m].name +
                              " infeasible: " + res.report.message);
          continue;
        }
        if (!res.report.converged)
          out.notes.push_back(trial_tag(trial) + " mode " + modes[m].name +
                              " did not converge: " + res.report.message);
        per_mode[m].push_back(res.report.objective);
        t.add_row({"trial", std::to_string(trial), modes[m].name,
                   format_number(res.report.objective),
                   res.report.converged ? "1" : "0"});
      } catch (const std::exception& e) {
        out.notes.push_back(trial_tag(trial) + " mode " + std::string(modes[m].name) +
                            " failed: " + e.what());
      }
    }
  }

  for (size_t m = 0; m < modes.size(); ++m)
    t.add_row({"mean", "", modes[m].name, format_number(mean_of(per_mode[m])), ""});
  for (size_t m = 0; m < modes.size(); ++m)
    t.add_row({"stddev", "", modes[m].name, format_number(stddev_of(per_mode[m])), ""});
  out.tables.push_back({to_string(cfg.kind), std::move(t)});
  return out;
}

// Mean optimized combiner weight as the delay grows from 0 to tau - 1.
ExperimentResult run_alpha_vs_delta(const ExperimentConfig& cfg) {
  ExperimentResult out;
  const int tau = cfg.hp.local_steps;
  Table t;
  t.columns = {"stat", "trial", "delta", "mean_alpha"};
  std::vector<std::vector<double>> per_delta(tau);

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t base = substream_seed(cfg.seed, trial);
    const auto profiles = sample_network(cfg, substream_seed(base, 0));
    for (int d = 0; d < tau; ++d) {
      try {
        HyperParams hp = cfg.hp;
        hp.delay = d;
        const SpResult res =
            solve_schedule(profiles, hp, cfg.weights, schedule_options(cfg), cfg.penalty);
        if (!res.report.feasible) {
          out.notes.push_back(trial_tag(trial) + " delta=" + std::to_string(d) +
                              " infeasible: " + res.report.message);
          continue;
        }
        const double mean_alpha = mean_of(res.combiner.alpha);
        per_delta[d].push_back(mean_alpha);
        t.add_row({"trial", std::to_string(trial), std::to_string(d),
                   format_number(mean_alpha)});
      } catch (const std::exception& e) {
        out.notes.push_back(trial_tag(trial) + " delta=" + std::to_string(d) +
                            " failed: " + e.what());
      }
    }
  }

  for (int d = 0; d < tau; ++d)
    t.add_row({"mean", "", std::to_string(d), format_number(mean_of(per_delta[d]))});
  for (int d = 0; d < tau; ++d)
    t.add_row({"stddev", "", std::to_string(d), format_number(stddev_of(per_delta[d]))});
  out.tables.push_back({to_string(cfg.kind), std::move(t)});
  return out;
}

struct AccuracyData {
  std::vector<Dataset> train;  // one shard per device
  Dataset test;
  std::string source;
};

// Round-robin sharding keeps shard sizes within one sample of each other.
AccuracyData load_idx_data(const ExperimentConfig& cfg) {
  AccuracyData out;
  const Dataset all = read_idx(cfg.idx_train_images, cfg.idx_train_labels,
                               {cfg.class_a, cfg.class_b});
  out.test =
      read_idx(cfg.idx_test_images, cfg.idx_test_labels, {cfg.class_a, cfg.class_b});
  out.train.resize(cfg.devices);
  for (int s = 0; s < all.size(); ++s) {
    Dataset& shard = out.train[s % cfg.devices];
    shard.features.push_back(all.features[s]);
    shard.labels.push_back(all.labels[s]);
  }
  for (const Dataset& shard : out.train)
    if (shard.size() < 2)
      throw std::runtime_error("accuracy run: a device shard has fewer than 2 samples");
  out.source = "idx";
  return out;
}

AccuracyData make_synthetic_data(const ExperimentConfig& cfg, std::uint64_t data_seed) {
  AccuracyData out;
  std::vector<Dataset> all = generate_synthetic(data_seed, cfg.devices + 1,
                                                cfg.per_device, cfg.dim,
                                                cfg.heterogeneity);
  out.test = std::move(all.back());
  all.pop_back();
  out.train = std::move(all);
  out.source = "synthetic";
  return out;
}

// Training curves under three combiner policies on shared batches per trial.
ExperimentResult run_accuracy(const ExperimentConfig& cfg) {
  ExperimentResult out;
  const bool use_idx = !cfg.idx_train_images.empty() || !cfg.idx_train_labels.empty();
  if (use_idx &&
      (cfg.idx_train_images.empty() || cfg.idx_train_labels.empty() ||
       cfg.idx_test_images.empty() || cfg.idx_test_labels.empty()))
    throw std::invalid_argument(
        "accuracy run: all four IDX paths are required to use IDX data");

  const int K = cfg.hp.rounds;
  const int I = cfg.devices;
  Table t;
  t.columns = {"stat", "trial", "mode", "round", "tick", "train_loss",
               "test_accuracy", "data_source"};

  AccuracyData shared;  // IDX inputs are fixed across trials
  if (use_idx) shared = load_idx_data(cfg);

  const char* mode_names[3] = {"optimized", "fixed_small", "fixed_one"};
  std::vector<std::vector<double>> final_acc(3);
  std::vector<std::vector<std::vector<double>>> acc_curve(
      3, std::vector<std::vector<double>>(K));
  std::vector<std::vector<std::vector<double>>> loss_curve(
      3, std::vector<std::vector<double>>(K));

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t base = substream_seed(cfg.seed, trial);
    try {
      if (!use_idx) shared = make_synthetic_data(cfg, substream_seed(base, 1));
      const AccuracyData& data = shared;
      auto profiles = sample_network(cfg, substream_seed(base, 0));
      // Chip and radio constants are sampled; the data volume is whatever the
      // dataset actually holds, not the nominal allocation-problem size.
      for (int i = 0; i < I; ++i)
        profiles[i].data_size = static_cast<double>(data.train[i].size());

      MinibatchSchedule batches;
      batches.rounds = K;
      batches.devices = I;
      batches.sizes.assign(static_cast<size_t>(K) * I, 0.0);
      for (int k = 0; k < K; ++k)
        for (int i = 0; i < I; ++i) {
          const int n = data.train[i].size();
          batches.at(k, i) =
              cfg.batch == 0 ? n : std::min(cfg.batch, n);
        }

      std::vector<double> sizes, vars, stds;
      for (int i = 0; i < I; ++i) {
        sizes.push_back(data.train[i].size());
        vars.push_back(cfg.ranges.variability);
        stds.push_back(cfg.ranges.feature_stddev);
      }
      const NetworkSnapshot net = NetworkSnapshot::from_sizes(sizes, vars, stds);
      std::vector<double> sigmas(K);
      for (int k = 0; k < K; ++k)
        sigmas[k] = network_noise_bound(net, batches.row(k));

      ScheduleOptions numeric;  // the optimized policy
      CombinerSchedule policies[3] = {
          build_combiner_schedule(sigmas, cfg.hp, numeric),
          CombinerSchedule::constant(K, cfg.alpha_small),
          CombinerSchedule::constant(K, 1.0)};

      for (int m = 0; m < 3; ++m) {
        SimConfig sc;
        sc.hp = cfg.hp;
        sc.datasets = data.train;
        sc.profiles = profiles;
        sc.batches = batches;
        sc.combiner = policies[m];
        sc.kind = LossKind::Logistic;
        sc.payload_bits = cfg.weights.payload_bits;
        sc.seed = substream_seed(base, 2);  // same batches for all three policies
        sc.record_reference = cfg.record_reference;
        const SimTrace trace = run_training(sc);
        for (int k = 0; k < K; ++k) {
          const RoundRecord& r = trace.rounds[k];
          const double acc = classification_accuracy(trace.aggregates[k], data.test);
          acc_curve[m][k].push_back(acc);
          loss_curve[m][k].push_back(r.loss);
          t.add_row({"trial", std::to_string(trial), mode_names[m],
                     std::to_string(k + 1), std::to_string(r.tick),
                     format_number(r.loss), format_number(acc), data.source});
        }
        final_acc[m].push_back(acc_curve[m][K - 1].back());
      }
    } catch (const std::exception& e) {
      out.notes.push_back(trial_tag(trial) + " failed: " + e.what());
    }
  }

  for (int m = 0; m < 3; ++m)
    for (int k = 0; k < K; ++k)
      t.add_row({"mean", "", mode_names[m], std::to_string(k + 1), "",
                 format_number(mean_of(loss_curve[m][k])),
                 format_number(mean_of(acc_curve[m][k])), ""});
  for (int m = 0; m < 3; ++m)
    for (int k = 0; k < K; ++k)
      t.add_row({"stddev", "", mode_names[m], std::to_string(k + 1), "",
                 format_number(stddev_of(loss_curve[m][k])),
                 format_number(stddev_of(acc_curve[m][k])), ""});

  for (int m = 0; m < 3; ++m)
    out.notes.push_back(std::string("final test accuracy, ") + mode_names[m] +
                        ": mean " + format_number(mean_of(final_acc[m])) + " over " +
                        std::to_string(final_acc[m].size()) + " trials");
  out.tables.push_back({to_string(cfg.kind), std::move(t)});
  return out;
}

}  // namespace

std::vector<double> c1_sweep_grid() {
  const double lo = 1e-6, hi = 1.0;
  const int points = 13;
  std::vector<double> grid(points);
  for (int j = 0; j < points; ++j)
    grid[j] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * j / (points - 1));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

std::vector<DeviceProfile> sample_network(const ExperimentConfig& cfg,
                                          std::uint64_t trial_seed) {
  Rng rng(trial_seed);
  const int I = cfg.devices;
  std::vector<double> caps(I), cycles(I);
  for (int i = 0; i < I; ++i)
    caps[i] = uniform_in(rng, cfg.ranges.cap_coeff_min, cfg.ranges.cap_coeff_max);
  for (int i = 0; i < I; ++i)
    cycles[i] = uniform_in(rng, cfg.ranges.cycles_min, cfg.ranges.cycles_max);
  std::sort(caps.begin(), caps.end());
  std::sort(cycles.begin(), cycles.end());
  std::vector<DeviceProfile> devices(I);
  for (int i = 0; i < I; ++i) {
    DeviceProfile& d = devices[i];
    d.cap_coeff = caps[i];
    d.cycles_per_sample = cycles[i];
    d.clock_rate = cfg.ranges.clock_rate;
    d.tx_power = cfg.ranges.tx_power;
    d.link_rate = cfg.ranges.link_rate;
    d.battery = cfg.ranges.battery;
    d.data_size = cfg.ranges.data_size;
    d.variability = cfg.ranges.variability;
    d.feature_stddev = cfg.ranges.feature_stddev;
  }
  return devices;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case ExperimentKind::PsiVsSigma: return run_psi_vs_sigma(cfg);
    case ExperimentKind::MinibatchOverTime: return run_minibatch_over_time(cfg);
    case ExperimentKind::MinibatchVsC1: return run_minibatch_vs_c1(cfg);
    case ExperimentKind::ObjectiveOptVsFixed: return run_objective_opt_vs_fixed(cfg);
    case ExperimentKind::AlphaVsDelta: return run_alpha_vs_delta(cfg);
    case ExperimentKind::AccuracyRun: return run_accuracy(cfg);
  }
  throw std::logic_error("unknown experiment kind");
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string text = render_config(cfg);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> write_outputs(const ExperimentConfig& cfg,
                                       const ExperimentResult& result) {
  std::string dir = cfg.output_dir;
  if (const char* env = std::getenv("SFDA_OUTPUT_DIR"); env && *env) dir = env;
  std::filesystem::create_directories(dir);

  std::vector<std::string> paths;
  for (const NamedTable& nt : result.tables) {
    const std::string path = dir + "/" + nt.name + ".csv";
    write_csv_file(nt.table, path);
    paths.push_back(path);
  }

  const std::string manifest_path =
      dir + "/" + std::string(to_string(cfg.kind)) + "_manifest.txt";
  std::ofstream m(manifest_path, std::ios::binary);
  if (!m) throw std::runtime_error("cannot open for writing: " + manifest_path);
  char hash_hex[17];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  m << "config_hash=" << hash_hex << "\n";
  m << "seed=" << cfg.seed << "\n";
  m << "version=" << kVersion << "\n";
  for (const std::string& note : result.notes) m << "note=" << note << "\n";
  m.flush();
  if (!m) throw std::runtime_error("write failed: " + manifest_path);
  paths.push_back(manifest_path);
  return paths;
}

}
