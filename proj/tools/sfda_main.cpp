// Command-line front end: single runs, schedule optimization, bound tables,
// combiner weights, the full experiment suite, and config validation.
// Exit codes: 0 success, 1 validation or I/O error, 2 solver non-convergence.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sfda/config.hpp"
#include "sfda/csv.hpp"
#include "sfda/experiments.hpp"
#include "sfda/gp_solver.hpp"
#include "sfda/idx.hpp"
#include "sfda/simulator.hpp"
#include "sfda/version.hpp"

namespace {

using namespace sfda;

ExperimentConfig load_or_default(const std::string& path) {
  if (path.empty()) {
    ExperimentConfig cfg;
    cfg.validate();
    return cfg;
  }
  return load_config(path);
}

std::string output_dir_of(const ExperimentConfig& cfg) {
  std::string dir = cfg.output_dir;
  if (const char* env = std::getenv("SFDA_OUTPUT_DIR"); env && *env) dir = env;
  std::filesystem::create_directories(dir);
  return dir;
}

// Training data for `simulate`: IDX shards when paths are configured,
// otherwise the synthetic generator.
std::vector<Dataset> simulate_datasets(const ExperimentConfig& cfg) {
  if (!cfg.idx_train_images.empty() || !cfg.idx_train_labels.empty()) {
    if (cfg.idx_train_images.empty() || cfg.idx_train_labels.empty())
      throw std::invalid_argument("simulate: both IDX train paths are required");
    const Dataset all =
        read_idx(cfg.idx_train_images, cfg.idx_train_labels, {cfg.class_a, cfg.class_b});
    std::vector<Dataset> shards(cfg.devices);
    for (int s = 0; s < all.size(); ++s) {
      shards[s % cfg.devices].features.push_back(all.features[s]);
      shards[s % cfg.devices].labels.push_back(all.labels[s]);
    }
    for (const Dataset& d : shards)
      if (d.size() < 1) throw std::runtime_error("simulate: an empty device shard");
    return shards;
  }
  return generate_synthetic(substream_seed(cfg.seed, 1), cfg.devices, cfg.per_device,
                            cfg.dim, cfg.heterogeneity);
}

MinibatchSchedule uniform_batches(const ExperimentConfig& cfg,
                                  const std::vector<Dataset>& data) {
  MinibatchSchedule b;
  b.rounds = cfg.hp.rounds;
  b.devices = cfg.devices;
  b.sizes.assign(static_cast<size_t>(b.rounds) * b.devices, 0.0);
  for (int k = 0; k < b.rounds; ++k)
    for (int i = 0; i < b.devices; ++i) {
      const int n = data[i].size();
      b.at(k, i) = cfg.batch == 0 ? n : std::min(cfg.batch, n);
    }
  return b;
}

NetworkSnapshot snapshot_for(const ExperimentConfig& cfg,
                             const std::vector<Dataset>& data) {
  std::vector<double> sizes, vars, stds;
  for (const Dataset& d : data) {
    sizes.push_back(d.size());
    vars.push_back(cfg.ranges.variability);
    stds.push_back(cfg.ranges.feature_stddev);
  }
  return NetworkSnapshot::from_sizes(sizes, vars, stds);
}

CombinerSchedule combiner_for(const ExperimentConfig& cfg,
                              const MinibatchSchedule& batches,
                              const NetworkSnapshot& net) {
  std::vector<double> sigmas(cfg.hp.rounds);
  for (int k = 0; k < cfg.hp.rounds; ++k)
    sigmas[k] = network_noise_bound(net, batches.row(k));
  ScheduleOptions opt;
  opt.mode = cfg.alpha_mode;
  opt.fixed_alpha = cfg.fixed_alpha;
  return build_combiner_schedule(sigmas, cfg.hp, opt);
}

int cmd_simulate(const ExperimentConfig& cfg, std::string out_path) {
  const std::vector<Dataset> data = simulate_datasets(cfg);
  const MinibatchSchedule batches = uniform_batches(cfg, data);
  const NetworkSnapshot net = snapshot_for(cfg, data);

  SimConfig sc;
  sc.hp = cfg.hp;
  sc.datasets = data;
  sc.profiles = sample_network(cfg, substream_seed(cfg.seed, 0));
  sc.batches = batches;
  sc.combiner = combiner_for(cfg, batches, net);
  sc.kind = LossKind::Logistic;
  sc.payload_bits = cfg.weights.payload_bits;
  sc.seed = substream_seed(cfg.seed, 2);
  sc.record_reference = cfg.record_reference;

  const SimTrace trace = run_training(sc);
  if (out_path.empty()) out_path = output_dir_of(cfg) + "/trace.csv";
  write_csv_file(trace_table(trace, sc.kind), out_path);

  std::cout << "rounds: " << trace.rounds.size() << "\n";
  std::cout << "best round: " << trace.best_round + 1 << "\n";
  std::cout << "best loss: " << format_number(trace.best_loss) << "\n";
  std::cout << "final loss: " << format_number(trace.rounds.back().loss) << "\n";
  std::cout << "final accuracy: " << format_number(trace.rounds.back().accuracy) << "\n";
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_optimize(const ExperimentConfig& cfg, std::string out_path) {
  const auto profiles = sample_network(cfg, substream_seed(cfg.seed, 0));
  ScheduleOptions opt;
  opt.mode = cfg.alpha_mode;
  opt.fixed_alpha = cfg.fixed_alpha;
  const SpResult res = solve_schedule(profiles, cfg.hp, cfg.weights, opt, cfg.penalty);

  std::cout << "feasible: " << (res.report.feasible ? "yes" : "no") << "\n";
  std::cout << "converged: " << (res.report.converged ? "yes" : "no") << "\n";
  std::cout << "outer iterations: " << res.report.outer_iters << "\n";
  std::cout << "objective (rounded schedule): " << format_number(res.report.objective)
            << "\n";
  std::cout << "objective (relaxed): " << format_number(res.report.relaxed_objective)
            << "\n";
  std::cout << "max slack: " << format_number(res.report.max_slack) << "\n";
  std::cout << "max identity residual: "
            << format_number(res.report.max_identity_residual) << "\n";
  std::cout << "condensation gap: " << format_number(res.report.condensation_gap)
            << "\n";
  std::cout << "status: " << res.report.message << "\n";
  if (!res.report.feasible) return 2;

  Table t;
  t.columns = {"round", "device", "batch", "alpha"};
  for (int k = 0; k < res.batches.rounds; ++k)
    for (int i = 0; i < res.batches.devices; ++i)
      t.add_row({std::to_string(k + 1), std::to_string(i + 1),
                 format_number(res.batches.at(k, i)),
                 format_number(res.combiner.alpha[k])});
  if (out_path.empty()) out_path = output_dir_of(cfg) + "/schedule.csv";
  write_csv_file(t, out_path);
  std::cout << "wrote " << out_path << "\n";
  return res.report.converged ? 0 : 2;
}

int cmd_bound(const ExperimentConfig& cfg, const std::string& out_path) {
  const int I = cfg.devices;
  const NetworkSnapshot net = NetworkSnapshot::from_sizes(
      std::vector<double>(I, cfg.ranges.data_size),
      std::vector<double>(I, cfg.ranges.variability),
      std::vector<double>(I, cfg.ranges.feature_stddev));
  MinibatchSchedule batches;
  batches.rounds = cfg.hp.rounds;
  batches.devices = I;
  const double n =
      cfg.batch == 0 ? cfg.ranges.data_size
                     : std::min<double>(cfg.batch, cfg.ranges.data_size);
  batches.sizes.assign(static_cast<size_t>(batches.rounds) * I, n);
  const CombinerSchedule combiner = combiner_for(cfg, batches, net);

  Table t;
  t.columns = {"round", "sigma", "alpha", "psi"};
  double psi_total = 0.0;
  for (int k = 0; k < cfg.hp.rounds; ++k) {
    const double sigma = network_noise_bound(net, batches.row(k));
    const double psi = round_divergence_bound(k + 1, combiner.alpha[k], sigma, cfg.hp);
    psi_total += psi;
    t.add_row({std::to_string(k + 1), format_number(sigma),
               format_number(combiner.alpha[k]), format_number(psi)});
  }
  std::cout << "batch per device: " << format_number(n) << "\n";
  std::cout << "summed divergence bound: " << format_number(psi_total) << "\n";
  std::cout << "optimality gap bound: "
            << format_number(optimality_gap(psi_total, cfg.hp)) << "\n";
  if (!out_path.empty()) {
    write_csv_file(t, out_path);
    std::cout << "wrote " << out_path << "\n";
  } else {
    write_csv(t, std::cout);
  }
  return 0;
}

int cmd_alpha(const ExperimentConfig& cfg, double sigma_flag, bool sigma_set,
              const std::string& out_path) {
  const int I = cfg.devices;
  double sigma = sigma_flag;
  if (!sigma_set) {
    const NetworkSnapshot net = NetworkSnapshot::from_sizes(
        std::vector<double>(I, cfg.ranges.data_size),
        std::vector<double>(I, cfg.ranges.variability),
        std::vector<double>(I, cfg.ranges.feature_stddev));
    const double n =
        cfg.batch == 0 ? cfg.ranges.data_size
                       : std::min<double>(cfg.batch, cfg.ranges.data_size);
    sigma = network_noise_bound(net, std::vector<double>(I, n));
  }
  const AlphaResult cf = optimal_alpha_closed_form(sigma, cfg.hp);
  Table t;
  t.columns = {"k", "sigma", "alpha_numeric", "alpha_closed_form"};
  for (int k = 1; k <= cfg.hp.rounds; ++k) {
    const AlphaResult num = optimal_alpha_numeric(k, sigma, cfg.hp);
    t.add_row({std::to_string(k), format_number(sigma), format_number(num.value),
               format_number(cf.value)});
  }
  if (!out_path.empty()) {
    write_csv_file(t, out_path);
    std::cout << "wrote " << out_path << "\n";
  } else {
    write_csv(t, std::cout);
  }
  return 0;
}

int cmd_experiment(ExperimentConfig cfg, const std::string& kind) {
  cfg.kind = experiment_kind_from(kind);
  const ExperimentResult result = run_experiment(cfg);
  const std::vector<std::string> paths = write_outputs(cfg, result);
  for (const std::string& p : paths) std::cout << "wrote " << p << "\n";
  for (const std::string& note : result.notes) std::cerr << "note: " << note << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delay-aware federated training: simulation, bounds, and "
               "schedule optimization"};
  app.set_version_flag("--version", sfda::kVersion);
  app.require_subcommand(1);

  std::string config_path, out_path, kind;
  double sigma_flag = 0.0;

  CLI::App* sim = app.add_subcommand("simulate", "run one training trace");
  sim->add_option("--config", config_path, "config file (defaults when omitted)");
  sim->add_option("--output", out_path, "trace CSV path");

  CLI::App* opt = app.add_subcommand("optimize", "solve the batch/combiner schedule");
  opt->add_option("--config", config_path, "config file (defaults when omitted)");
  opt->add_option("--output", out_path, "schedule CSV path");

  CLI::App* bnd = app.add_subcommand("bound", "evaluate the divergence and gap bounds");
  bnd->add_option("--config", config_path, "config file (defaults when omitted)");
  bnd->add_option("--output", out_path, "per-round CSV path (stdout when omitted)");

  CLI::App* alp = app.add_subcommand("alpha", "combiner weights per round");
  alp->add_option("--config", config_path, "config file (defaults when omitted)");
  CLI::Option* sig_opt = alp->add_option("--sigma", sigma_flag, "noise level override");
  alp->add_option("--output", out_path, "CSV path (stdout when omitted)");

  CLI::App* exp = app.add_subcommand("experiment", "run a full experiment");
  exp->add_option("kind", kind,
                  "psi_vs_sigma | minibatch_over_time | minibatch_vs_c1 | "
                  "objective_opt_vs_fixed | alpha_vs_delta | accuracy_run")
      ->required();
  exp->add_option("--config", config_path, "config file (defaults when omitted)");

  CLI::App* val = app.add_subcommand("validate-config", "parse and check a config");
  val->add_option("--config", config_path, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (val->parsed()) {
      sfda::load_config(config_path);
      std::cout << "config OK\n";
      return 0;
    }
    const sfda::ExperimentConfig cfg = load_or_default(config_path);
    if (sim->parsed()) return cmd_simulate(cfg, out_path);
    if (opt->parsed()) return cmd_optimize(cfg, out_path);
    if (bnd->parsed()) return cmd_bound(cfg, out_path);
    if (alp->parsed()) return cmd_alpha(cfg, sigma_flag, sig_opt->count() > 0, out_path);
    if (exp->parsed()) return cmd_experiment(cfg, kind);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
