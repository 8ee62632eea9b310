#include "sfda/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sfda/csv.hpp"

namespace sfda {

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::PsiVsSigma: return "psi_vs_sigma";
    case ExperimentKind::MinibatchOverTime: return "minibatch_over_time";
    case ExperimentKind::MinibatchVsC1: return "minibatch_vs_c1";
    case ExperimentKind::ObjectiveOptVsFixed: return "objective_opt_vs_fixed";
    case ExperimentKind::AlphaVsDelta: return "alpha_vs_delta";
    case ExperimentKind::AccuracyRun: return "accuracy_run";
  }
  throw std::logic_error("unknown experiment kind");
}

ExperimentKind experiment_kind_from(const std::string& text) {
  if (text == "psi_vs_sigma") return ExperimentKind::PsiVsSigma;
  if (text == "minibatch_over_time") return ExperimentKind::MinibatchOverTime;
  if (text == "minibatch_vs_c1") return ExperimentKind::MinibatchVsC1;
  if (text == "objective_opt_vs_fixed") return ExperimentKind::ObjectiveOptVsFixed;
  if (text == "alpha_vs_delta") return ExperimentKind::AlphaVsDelta;
  if (text == "accuracy_run") return ExperimentKind::AccuracyRun;
  throw std::invalid_argument("unknown experiment kind: " + text);
}

namespace {

const char* to_string(ScheduleMode mode) {
  switch (mode) {
    case ScheduleMode::Numeric: return "numeric";
    case ScheduleMode::ClosedForm: return "closed_form";
    case ScheduleMode::Fixed: return "fixed";
  }
  throw std::logic_error("unknown schedule mode");
}

ScheduleMode schedule_mode_from(const std::string& text) {
  if (text == "numeric") return ScheduleMode::Numeric;
  if (text == "closed_form") return ScheduleMode::ClosedForm;
  if (text == "fixed") return ScheduleMode::Fixed;
  throw std::invalid_argument("unknown alpha mode: " + text);
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Cursor {
  std::string origin;
  size_t line = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + msg);
  }

  double num(const std::string& v) const {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') fail("not a number: '" + v + "'");
    return x;
  }

  int integer(const std::string& v) const {
    const double x = num(v);
    const long long r = static_cast<long long>(x);
    if (static_cast<double>(r) != x) fail("not an integer: '" + v + "'");
    return static_cast<int>(r);
  }

  std::uint64_t unsigned64(const std::string& v) const {
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') fail("not an unsigned integer: '" + v + "'");
    return x;
  }

  bool boolean(const std::string& v) const {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail("not a boolean: '" + v + "'");
  }
};

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  Cursor at{origin, 0};
  std::istringstream in(text);
  std::string raw, section;
  while (std::getline(in, raw)) {
    ++at.line;
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') at.fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "learning" && section != "network" && section != "cost" &&
          section != "penalty" && section != "experiment")
        at.fail("unknown section [" + section + "]");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) at.fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) at.fail("empty key");
    if (section.empty()) at.fail("key before any [section]");

    if (section == "learning") {
      if (key == "eta") cfg.hp.eta = at.num(val);
      else if (key == "beta") cfg.hp.beta = at.num(val);
      else if (key == "lipschitz") cfg.hp.lipschitz = at.num(val);
      else if (key == "dissimilarity") cfg.hp.delta = at.num(val);
      else if (key == "curvature") cfg.hp.phi = at.num(val);
      else if (key == "local_steps") cfg.hp.local_steps = at.integer(val);
      else if (key == "delay") cfg.hp.delay = at.integer(val);
      else if (key == "rounds") cfg.hp.rounds = at.integer(val);
      else at.fail("unknown key '" + key + "' in [learning]");
    } else if (section == "network") {
      if (key == "devices") cfg.devices = at.integer(val);
      else if (key == "cap_coeff_min") cfg.ranges.cap_coeff_min = at.num(val);
      else if (key == "cap_coeff_max") cfg.ranges.cap_coeff_max = at.num(val);
      else if (key == "cycles_min") cfg.ranges.cycles_min = at.num(val);
      else if (key == "cycles_max") cfg.ranges.cycles_max = at.num(val);
      else if (key == "clock_rate") cfg.ranges.clock_rate = at.num(val);
      else if (key == "tx_power") cfg.ranges.tx_power = at.num(val);
      else if (key == "link_rate") cfg.ranges.link_rate = at.num(val);
      else if (key == "battery") cfg.ranges.battery = at.num(val);
      else if (key == "data_size") cfg.ranges.data_size = at.num(val);
      else if (key == "variability") cfg.ranges.variability = at.num(val);
      else if (key == "feature_stddev") cfg.ranges.feature_stddev = at.num(val);
      else at.fail("unknown key '" + key + "' in [network]");
    } else if (section == "cost") {
      if (key == "energy_weight") cfg.weights.energy_weight = at.num(val);
      else if (key == "time_weight") cfg.weights.time_weight = at.num(val);
      else if (key == "gap_weight") cfg.weights.gap_weight = at.num(val);
      else if (key == "payload_bits") cfg.weights.payload_bits = at.num(val);
      else at.fail("unknown key '" + key + "' in [cost]");
    } else if (section == "penalty") {
      if (key == "w_global") cfg.penalty.w_global = at.num(val);
      else if (key == "w_round") cfg.penalty.w_round = at.num(val);
      else if (key == "w_device") cfg.penalty.w_device = at.num(val);
      else if (key == "margin") cfg.penalty.margin = at.num(val);
      else if (key == "inner_tol") cfg.penalty.inner_tol = at.num(val);
      else if (key == "newton_tol") cfg.penalty.newton_tol = at.num(val);
      else if (key == "barrier_mu") cfg.penalty.barrier_mu = at.num(val);
      else if (key == "max_inner") cfg.penalty.max_inner = at.integer(val);
      else if (key == "max_outer") cfg.penalty.max_outer = at.integer(val);
      else if (key == "outer_tol") cfg.penalty.outer_tol = at.num(val);
      else at.fail("unknown key '" + key + "' in [penalty]");
    } else {  // experiment
      if (key == "kind") {
        try {
          cfg.kind = experiment_kind_from(val);
        } catch (const std::invalid_argument& e) {
          at.fail(e.what());
        }
      } else if (key == "trials") cfg.trials = at.integer(val);
      else if (key == "seed") cfg.seed = at.unsigned64(val);
      else if (key == "output_dir") cfg.output_dir = val;
      else if (key == "alpha_mode") {
        try {
          cfg.alpha_mode = schedule_mode_from(val);
        } catch (const std::invalid_argument& e) {
          at.fail(e.what());
        }
      } else if (key == "fixed_alpha") cfg.fixed_alpha = at.num(val);
      else if (key == "alpha_small") cfg.alpha_small = at.num(val);
      else if (key == "batch") cfg.batch = at.integer(val);
      else if (key == "per_device") cfg.per_device = at.integer(val);
      else if (key == "dim") cfg.dim = at.integer(val);
      else if (key == "heterogeneity") cfg.heterogeneity = at.num(val);
      else if (key == "record_reference") cfg.record_reference = at.boolean(val);
      else if (key == "idx_train_images") cfg.idx_train_images = val;
      else if (key == "idx_train_labels") cfg.idx_train_labels = val;
      else if (key == "idx_test_images") cfg.idx_test_images = val;
      else if (key == "idx_test_labels") cfg.idx_test_labels = val;
      else if (key == "class_a") cfg.class_a = at.integer(val);
      else if (key == "class_b") cfg.class_b = at.integer(val);
      else at.fail("unknown key '" + key + "' in [experiment]");
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

void DeviceRanges::validate() const {
  if (!(cap_coeff_min > 0.0) || cap_coeff_max < cap_coeff_min)
    throw std::invalid_argument("ranges: chip coefficient range is invalid");
  if (!(cycles_min > 0.0) || cycles_max < cycles_min)
    throw std::invalid_argument("ranges: cycle count range is invalid");
  if (!(clock_rate > 0.0)) throw std::invalid_argument("ranges: clock_rate must be positive");
  if (tx_power < 0.0) throw std::invalid_argument("ranges: negative tx_power");
  if (!(link_rate > 0.0)) throw std::invalid_argument("ranges: link_rate must be positive");
  if (!(battery > 0.0)) throw std::invalid_argument("ranges: battery must be positive");
  if (data_size < 1.0) throw std::invalid_argument("ranges: data_size below 1");
  if (variability < 0.0 || feature_stddev < 0.0)
    throw std::invalid_argument("ranges: negative data constants");
}

void ExperimentConfig::validate() const {
  hp.validate();
  if (devices < 1) throw std::invalid_argument("config: devices must be >= 1");
  ranges.validate();
  weights.validate();
  penalty.validate();
  if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  if (output_dir.empty()) throw std::invalid_argument("config: output_dir is empty");
  if (!(fixed_alpha > 0.0) || fixed_alpha > 1.0)
    throw std::invalid_argument("config: fixed_alpha outside (0, 1]");
  if (!(alpha_small > 0.0) || alpha_small > 1.0)
    throw std::invalid_argument("config: alpha_small outside (0, 1]");
  if (batch < 0) throw std::invalid_argument("config: batch must be >= 0 (0 = full)");
  if (per_device < 2) throw std::invalid_argument("config: per_device must be >= 2");
  if (dim < 1) throw std::invalid_argument("config: dim must be >= 1");
  if (heterogeneity < 0.0) throw std::invalid_argument("config: negative heterogeneity");
  if (class_a < 0 || class_a > 255 || class_b < 0 || class_b > 255)
    throw std::invalid_argument("config: classes must be byte values");
  if (class_a == class_b) throw std::invalid_argument("config: classes must differ");
}

namespace {
std::string fmt(double v) { return format_number(v); }
}

std::string render_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "[learning]\n";
  o << "eta = " << fmt(c.hp.eta) << "\n";
  o << "beta = " << fmt(c.hp.beta) << "\n";
  o << "lipschitz = " << fmt(c.hp.lipschitz) << "\n";
  o << "dissimilarity = " << fmt(c.hp.delta) << "\n";
  o << "curvature = " << fmt(c.hp.phi) << "\n";
  o << "local_steps = " << c.hp.local_steps << "\n";
  o << "delay = " << c.hp.delay << "\n";
  o << "rounds = " << c.hp.rounds << "\n";
  o << "\n[network]\n";
  o << "devices = " << c.devices << "\n";
  o << "cap_coeff_min = " << fmt(c.ranges.cap_coeff_min) << "\n";
  o << "cap_coeff_max = " << fmt(c.ranges.cap_coeff_max) << "\n";
  o << "cycles_min = " << fmt(c.ranges.cycles_min) << "\n";
  o << "cycles_max = " << fmt(c.ranges.cycles_max) << "\n";
  o << "clock_rate = " << fmt(c.ranges.clock_rate) << "\n";
  o << "tx_power = " << fmt(c.ranges.tx_power) << "\n";
  o << "link_rate = " << fmt(c.ranges.link_rate) << "\n";
  o << "battery = " << fmt(c.ranges.battery) << "\n";
  o << "data_size = " << fmt(c.ranges.data_size) << "\n";
  o << "variability = " << fmt(c.ranges.variability) << "\n";
  o << "feature_stddev = " << fmt(c.ranges.feature_stddev) << "\n";
  o << "\n[cost]\n";
  o << "energy_weight = " << fmt(c.weights.energy_weight) << "\n";
  o << "time_weight = " << fmt(c.weights.time_weight) << "\n";
  o << "gap_weight = " << fmt(c.weights.gap_weight) << "\n";
  o << "payload_bits = " << fmt(c.weights.payload_bits) << "\n";
  o << "\n[penalty]\n";
  o << "w_global = " << fmt(c.penalty.w_global) << "\n";
  o << "w_round = " << fmt(c.penalty.w_round) << "\n";
  o << "w_device = " << fmt(c.penalty.w_device) << "\n";
  o << "margin = " << fmt(c.penalty.margin) << "\n";
  o << "inner_tol = " << fmt(c.penalty.inner_tol) << "\n";
  o << "newton_tol = " << fmt(c.penalty.newton_tol) << "\n";
  o << "barrier_mu = " << fmt(c.penalty.barrier_mu) << "\n";
  o << "max_inner = " << c.penalty.max_inner << "\n";
  o << "max_outer = " << c.penalty.max_outer << "\n";
  o << "outer_tol = " << fmt(c.penalty.outer_tol) << "\n";
  o << "\n[experiment]\n";
  o << "kind = " << to_string(c.kind) << "\n";
  o << "trials = " << c.trials << "\n";
  o << "seed = " << c.seed << "\n";
  o << "output_dir = " << c.output_dir << "\n";
  o << "alpha_mode = " << to_string(c.alpha_mode) << "\n";
  o << "fixed_alpha = " << fmt(c.fixed_alpha) << "\n";
  o << "alpha_small = " << fmt(c.alpha_small) << "\n";
  o << "batch = " << c.batch << "\n";
  o << "per_device = " << c.per_device << "\n";
  o << "dim = " << c.dim << "\n";
  o << "heterogeneity = " << fmt(c.heterogeneity) << "\n";
  o << "record_reference = " << (c.record_reference ? "true" : "false") << "\n";
  if (!c.idx_train_images.empty()) o << "idx_train_images = " << c.idx_train_images << "\n";
  if (!c.idx_train_labels.empty()) o << "idx_train_labels = " << c.idx_train_labels << "\n";
  if (!c.idx_test_images.empty()) o << "idx_test_images = " << c.idx_test_images << "\n";
  if (!c.idx_test_labels.empty()) o << "idx_test_labels = " << c.idx_test_labels << "\n";
  o << "class_a = " << c.class_a << "\n";
  o << "class_b = " << c.class_b << "\n";
  return o.str();
}

bool operator==(const HyperParams& a, const HyperParams& b) {
  return a.eta == b.eta && a.beta == b.beta && a.lipschitz == b.lipschitz &&
         a.delta == b.delta && a.phi == b.phi && a.local_steps == b.local_steps &&
         a.delay == b.delay && a.rounds == b.rounds;
}

bool operator==(const DeviceRanges& a, const DeviceRanges& b) {
  return a.cap_coeff_min == b.cap_coeff_min && a.cap_coeff_max == b.cap_coeff_max &&
         a.cycles_min == b.cycles_min && a.cycles_max == b.cycles_max &&
         a.clock_rate == b.clock_rate && a.tx_power == b.tx_power &&
         a.link_rate == b.link_rate && a.battery == b.battery &&
         a.data_size == b.data_size && a.variability == b.variability &&
         a.feature_stddev == b.feature_stddev;
}

bool operator==(const CostWeights& a, const CostWeights& b) {
  return a.energy_weight == b.energy_weight && a.time_weight == b.time_weight &&
         a.gap_weight == b.gap_weight && a.payload_bits == b.payload_bits;
}

bool operator==(const PenaltyConfig& a, const PenaltyConfig& b) {
  return a.w_global == b.w_global && a.w_round == b.w_round &&
         a.w_device == b.w_device && a.margin == b.margin &&
         a.inner_tol == b.inner_tol && a.newton_tol == b.newton_tol &&
         a.barrier_mu == b.barrier_mu && a.max_inner == b.max_inner &&
         a.max_outer == b.max_outer && a.outer_tol == b.outer_tol;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.hp == b.hp && a.devices == b.devices && a.ranges == b.ranges &&
         a.weights == b.weights && a.penalty == b.penalty && a.kind == b.kind &&
         a.trials == b.trials && a.seed == b.seed && a.output_dir == b.output_dir &&
         a.alpha_mode == b.alpha_mode && a.fixed_alpha == b.fixed_alpha &&
         a.alpha_small == b.alpha_small && a.batch == b.batch &&
         a.per_device == b.per_device && a.dim == b.dim &&
         a.heterogeneity == b.heterogeneity &&
         a.record_reference == b.record_reference &&
         a.idx_train_images == b.idx_train_images &&
         a.idx_train_labels == b.idx_train_labels &&
         a.idx_test_images == b.idx_test_images &&
         a.idx_test_labels == b.idx_test_labels && a.class_a == b.class_a &&
         a.class_b == b.class_b;
}

}
