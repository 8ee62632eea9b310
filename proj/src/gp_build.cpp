#include <cmath>
#include <stdexcept>

#include "sfda/gp_solver.hpp"

namespace sfda {

VarMap VarMap::layout(int rounds, int devices) {
  if (rounds < 1 || devices < 1)
    throw std::invalid_argument("variable layout: empty program");
  VarMap m;
  m.rounds = rounds;
  m.devices = devices;
  int next = 4;  // scalars occupy 0..3
  auto round_block = [&](int& base) {
    base = next;
    next += rounds;
  };
  round_block(m.energy_cmp0);
  round_block(m.energy_tx0);
  round_block(m.time_cmp0);
  round_block(m.time_tx0);
  round_block(m.noise0);
  round_block(m.drift_full0);
  round_block(m.drift_overlap0);
  round_block(m.staleness0);
  round_block(m.round_bound0);
  for (int f = 0; f < 5; ++f) round_block(m.slack_round0[f]);
  auto cell_block = [&](int& base) {
    base = next;
    next += rounds * devices;
  };
  cell_block(m.batch0);
  cell_block(m.noise_factor0);
  cell_block(m.slack_dev0);
  m.count = next;
  return m;
}

std::string VarMap::name(int v) const {
  auto in_round = [&](int base) { return v >= base && v < base + rounds; };
  auto in_cell = [&](int base) { return v >= base && v < base + rounds * devices; };
  auto round_tag = [&](const char* label, int base) {
    return std::string(label) + "[" + std::to_string(v - base) + "]";
  };
  auto cell_tag = [&](const char* label, int base) {
    const int off = v - base;
    return std::string(label) + "[" + std::to_string(off / devices) + "," +
           std::to_string(off % devices) + "]";
  };
  if (v == loss_gap) return "loss_gap";
  if (v == surd) return "surd";
  if (v == psi_total) return "psi_total";
  if (v == slack_total) return "slack_total";
  if (in_round(energy_cmp0)) return round_tag("energy_cmp", energy_cmp0);
  if (in_round(energy_tx0)) return round_tag("energy_tx", energy_tx0);
  if (in_round(time_cmp0)) return round_tag("time_cmp", time_cmp0);
  if (in_round(time_tx0)) return round_tag("time_tx", time_tx0);
  if (in_round(noise0)) return round_tag("noise", noise0);
  if (in_round(drift_full0)) return round_tag("drift_full", drift_full0);
  if (in_round(drift_overlap0)) return round_tag("drift_overlap", drift_overlap0);
  if (in_round(staleness0)) return round_tag("staleness", staleness0);
  if (in_round(round_bound0)) return round_tag("round_bound", round_bound0);
  static const char* slack_names[5] = {"slack_round_bound", "slack_drift_full",
                                       "slack_drift_overlap", "slack_staleness",
                                       "slack_noise"};
  for (int f = 0; f < 5; ++f)
    if (in_round(slack_round0[f])) return round_tag(slack_names[f], slack_round0[f]);
  if (in_cell(batch0)) return cell_tag("batch", batch0);
  if (in_cell(noise_factor0)) return cell_tag("noise_factor", noise_factor0);
  if (in_cell(slack_dev0)) return cell_tag("slack_dev", slack_dev0);
  return "var[" + std::to_string(v) + "]";
}

void PenaltyConfig::validate() const {
  if (w_global <= 0.0 || w_round <= 0.0 || w_device <= 0.0)
    throw std::invalid_argument("penalty config: slack weights must be positive");
  if (margin <= 0.0 || margin >= 1e-2)
    throw std::invalid_argument("penalty config: margin outside (0, 1e-2)");
  if (inner_tol <= 0.0 || outer_tol <= 0.0 || newton_tol <= 0.0)
    throw std::invalid_argument("penalty config: tolerances must be positive");
  if (barrier_mu <= 1.0) throw std::invalid_argument("penalty config: mu must exceed 1");
  if (max_inner < 10 || max_outer < 1)
    throw std::invalid_argument("penalty config: iteration caps too small");
}

namespace {

// Appends coef * prod(vars^pows) unless the coefficient vanishes; negative
// coefficients never belong in this program.
void add_term(Posynomial& p, double coef,
              std::initializer_list<std::pair<int, double>> pows) {
  if (coef == 0.0) return;
  if (coef < 0.0) throw std::logic_error("schedule program: negative coefficient");
  Monomial m;
  m.coef = coef;
  for (const auto& [idx, e] : pows)
    if (e != 0.0) m.set_power(idx, m.exponent_of(idx) + e);
  p += std::move(m);
}

}  // namespace

GpProgram build_schedule_program(const HyperParams& hp,
                                 const std::vector<DeviceProfile>& devices,
                                 const CostWeights& weights, const PenaltyConfig& pen,
                                 const std::vector<double>& alpha_hat) {
  hp.validate();
  weights.validate();
  pen.validate();
  if (devices.empty()) throw std::invalid_argument("schedule program: no devices");
  for (const auto& d : devices) d.validate();
  const int K = hp.rounds;
  const int I = static_cast<int>(devices.size());
  if (static_cast<int>(alpha_hat.size()) != K)
    throw std::invalid_argument("schedule program: combiner constants length != rounds");
  for (double a : alpha_hat)
    if (!(a > 0.0) || a > 1.0)
      throw std::invalid_argument("schedule program: combiner constant outside (0, 1]");
  if (hp.delay >= hp.local_steps)
    throw std::invalid_argument(
        "schedule program: delay must stay strictly below the local step count, "
        "otherwise the overlap drift window is empty and its pins are undefined");

  const NetworkSnapshot net = snapshot_from_profiles(devices);

  const double tau = hp.local_steps;
  const double del = hp.delay;
  const double T = static_cast<double>(hp.horizon());
  const double m1 = 1.0 / (2.0 * hp.eta * hp.phi * T);
  const double m2 = m1 * m1;
  const double m3 = hp.lipschitz / (hp.eta * hp.phi * T);
  const double b1 = hp.growth(tau) - 1.0;
  const double b2 = hp.growth(tau - del) - 1.0;
  const double b5 = hp.growth(tau - del);
  const bool overlap_degenerate = (tau - del) <= 1.0;  // drift vanishes on that window
  const bool full_degenerate = tau <= 1.0;

  GpProgram prog;
  prog.vars = VarMap::layout(K, I);
  prog.alpha_hat = alpha_hat;
  const VarMap& V = prog.vars;

  // Variable boxes.
  prog.lo.assign(V.count, 1e-12);
  prog.hi.assign(V.count, 1e18);
  auto box = [&](int v, double lo, double hi) {
    prog.lo[v] = lo;
    prog.hi[v] = hi;
  };
  box(V.loss_gap, 1e-12, 1e18);
  box(V.surd, 1e-12, 1e18);
  box(V.psi_total, 1e-12, 1e18);
  box(V.slack_total, 1.0, 1e9);
  for (int k = 0; k < K; ++k) {
    box(V.at(V.energy_cmp0, k), 1e-15, 1e18);
    box(V.at(V.energy_tx0, k), 1e-15, 1e18);
    box(V.at(V.time_cmp0, k), 1e-15, 1e18);
    box(V.at(V.time_tx0, k), 1e-15, 1e18);
    box(V.at(V.noise0, k), 1e-12, 1e4);
    for (int f = 0; f < 5; ++f) box(V.at(V.slack_round0[f], k), 1.0, 1e9);
    for (int i = 0; i < I; ++i) {
      box(V.cell(V.batch0, k, i), 1.0, devices[i].data_size);
      box(V.cell(V.noise_factor0, k, i), 1e-10, 1e2);
      box(V.cell(V.slack_dev0, k, i), 1.0, 1e9);
    }
  }

  // Objective: energy and time costs, the certified gap, slack penalties.
  Posynomial& f0 = prog.objective;
  for (int k = 0; k < K; ++k) {
    add_term(f0, weights.energy_weight, {{V.at(V.energy_cmp0, k), 1.0}});
    add_term(f0, weights.energy_weight, {{V.at(V.energy_tx0, k), 1.0}});
    add_term(f0, weights.time_weight, {{V.at(V.time_cmp0, k), 1.0}});
    add_term(f0, weights.time_weight, {{V.at(V.time_tx0, k), 1.0}});
  }
  add_term(f0, weights.gap_weight, {{V.loss_gap, 1.0}});
  add_term(f0, pen.w_global, {{V.slack_total, 1.0}});
  for (int k = 0; k < K; ++k) {
    for (int f = 0; f < 5; ++f)
      add_term(f0, pen.w_round, {{V.at(V.slack_round0[f], k), 1.0}});
    for (int i = 0; i < I; ++i)
      add_term(f0, pen.w_device, {{V.cell(V.slack_dev0, k, i), 1.0}});
  }

  auto push = [&](std::string name, GpRow::Kind kind, Posynomial num, Posynomial den) {
    prog.rows.push_back({std::move(name), kind, std::move(num), std::move(den)});
  };
  auto rk = [](const char* label, int k) {
    return std::string(label) + "[" + std::to_string(k) + "]";
  };
  auto rki = [](const char* label, int k, int i) {
    return std::string(label) + "[" + std::to_string(k) + "," + std::to_string(i) + "]";
  };

  // Per-device constants: compute-energy slope in the batch size, and the
  // fixed per-upload transmit energy.
  std::vector<double> e_slope(I), e_tx(I);
  for (int i = 0; i < I; ++i) {
    e_slope[i] = 0.5 * devices[i].cap_coeff * devices[i].cycles_per_sample * tau *
                 devices[i].clock_rate * devices[i].clock_rate;
    e_tx[i] = devices[i].tx_power * weights.payload_bits / devices[i].link_rate;
  }

  for (int k = 0; k < K; ++k) {
    // Total compute energy covers the per-device sum.
    Posynomial num;
    for (int i = 0; i < I; ++i)
      add_term(num, e_slope[i], {{V.cell(V.batch0, k, i), 1.0}});
    push(rk("energy_cmp_total", k), GpRow::Kind::Inequality, std::move(num),
         Monomial::var(V.at(V.energy_cmp0, k)));

    // Total transmit energy covers the (constant) per-device sum.
    double tx_sum = 0.0;
    for (int i = 0; i < I; ++i) tx_sum += e_tx[i];
    push(rk("energy_tx_total", k), GpRow::Kind::Inequality,
         Monomial::constant(tx_sum), Monomial::var(V.at(V.energy_tx0, k)));
  }

  for (int i = 0; i < I; ++i) {
    // Battery: lifetime energy of device i within its budget.
    Posynomial num;
    for (int k = 0; k < K; ++k)
      add_term(num, e_slope[i] / devices[i].battery, {{V.cell(V.batch0, k, i), 1.0}});
    add_term(num, K * e_tx[i] / devices[i].battery, {});
    push("battery[" + std::to_string(i) + "]", GpRow::Kind::Inequality, std::move(num),
         {});
  }

  // Definitional identities for the per-device energies, which are inlined as
  // monomials everywhere above; recorded so reports can confirm them.
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i) {
      push(rki("energy_cmp_def", k, i), GpRow::Kind::Identity,
           Monomial::var(V.cell(V.batch0, k, i), 1.0, e_slope[i]),
           Monomial::var(V.cell(V.batch0, k, i), 1.0, e_slope[i]));
      push(rki("energy_tx_def", k, i), GpRow::Kind::Identity, Monomial::constant(e_tx[i]),
           Monomial::constant(e_tx[i]));
    }

  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i) {
      // Round time covers the slowest device; one row per device.
      push(rki("time_cmp_cover", k, i), GpRow::Kind::Inequality,
           Monomial::var(V.cell(V.batch0, k, i), 1.0,
                         tau * devices[i].cycles_per_sample / devices[i].clock_rate),
           Monomial::var(V.at(V.time_cmp0, k)));
      push(rki("time_tx_cover", k, i), GpRow::Kind::Inequality,
           Monomial::constant(weights.payload_bits / devices[i].link_rate),
           Monomial::var(V.at(V.time_tx0, k)));
    }

  // Certified-gap chain.
  {
    Posynomial num;
    add_term(num, m1, {});
    add_term(num, 1.0, {{V.surd, 1.0}});
    add_term(num, hp.lipschitz, {{V.psi_total, 1.0}});
    push("gap_lower", GpRow::Kind::Inequality, std::move(num),
         Monomial::var(V.loss_gap));
  }
  push("gap_lead_const", GpRow::Kind::Identity, Monomial::constant(m1),
       Monomial::constant(1.0 / (2.0 * hp.eta * hp.phi * T)));
  {
    Posynomial num;
    add_term(num, m2, {});
    add_term(num, m3, {{V.psi_total, 1.0}});
    push("surd_lower", GpRow::Kind::Inequality, std::move(num),
         Monomial::var(V.surd, 2.0));
  }
  push("surd_const", GpRow::Kind::Identity, Monomial::constant(m2),
       Monomial::constant(m1 * m1));
  push("curvature_const", GpRow::Kind::Identity, Monomial::constant(m3),
       Monomial::constant(hp.lipschitz / (hp.eta * hp.phi * T)));

  {
    // Summed divergence pinned from both sides; the upper side carries the
    // global slack.
    Posynomial sum;
    for (int k = 0; k < K; ++k) add_term(sum, 1.0, {{V.at(V.round_bound0, k), 1.0}});
    push("divergence_total_lower", GpRow::Kind::Inequality, sum,
         Monomial::var(V.psi_total));
    Posynomial num;
    add_term(num, 1.0, {{V.psi_total, 1.0}, {V.slack_total, -1.0}});
    push("divergence_total_upper", GpRow::Kind::Inequality, std::move(num),
         std::move(sum));
  }

  for (int k = 0; k < K; ++k) {
    const double a = alpha_hat[k];
    const double b3 = 1.0 - std::pow(1.0 - a, k + 1);
    const double b4 = 1.0 - a;
    const double b6 = tau - a * del;
    const int v_eps = V.at(V.staleness0, k);
    const int v_h1 = V.at(V.drift_full0, k);
    const int v_h2 = V.at(V.drift_overlap0, k);
    const int v_sig = V.at(V.noise0, k);
    const int v_psi = V.at(V.round_bound0, k);

    // Five-term round bound; both sides share the same posynomial.
    Posynomial round_terms;
    add_term(round_terms, a * b4 * b1, {{v_eps, 1.0}});
    add_term(round_terms, b4, {{v_h1, 1.0}});
    add_term(round_terms, a, {{v_h2, 1.0}});
    add_term(round_terms, a * hp.eta * del * hp.lipschitz * b5, {});
    add_term(round_terms, hp.eta * b6, {{v_sig, 1.0}});
    push(rk("round_bound_lower", k), GpRow::Kind::Inequality, round_terms,
         Monomial::var(v_psi));
    {
      Posynomial num;
      add_term(num, 1.0, {{v_psi, 1.0}, {V.at(V.slack_round0[0], k), -1.0}});
      push(rk("round_bound_upper", k), GpRow::Kind::Inequality, std::move(num),
           std::move(round_terms));
    }

    // Drift pins: the ratio form carries "drift >= window expression" on the
    // lower side and the slacked reverse on the upper side; the two together
    // squeeze the drift variable onto its defining value.
    auto drift_rows = [&](const char* lower_name, const char* upper_name, int v_h,
                          int v_slack, double window, double bgrow, bool degenerate) {
      const GpRow::Kind kind =
          degenerate ? GpRow::Kind::Degenerate : GpRow::Kind::Inequality;
      Posynomial lower_num;  // bgrow * (delta + sigma) / (beta * h)
      add_term(lower_num, bgrow * hp.delta / hp.beta, {{v_h, -1.0}});
      add_term(lower_num, bgrow / hp.beta, {{v_h, -1.0}, {v_sig, 1.0}});
      Posynomial linear;  // 1 + eta * (delta + sigma) * window / h
      add_term(linear, 1.0, {});
      add_term(linear, hp.eta * hp.delta * window, {{v_h, -1.0}});
      add_term(linear, hp.eta * window, {{v_h, -1.0}, {v_sig, 1.0}});
      push(rk(lower_name, k), kind, lower_num, linear);
      Posynomial upper_num = linear * Monomial::var(v_slack, -1.0);
      push(rk(upper_name, k), kind, std::move(upper_num), std::move(lower_num));
    };
    drift_rows("drift_full_lower", "drift_full_upper", v_h1, V.at(V.slack_round0[1], k),
               tau, b1, full_degenerate);
    drift_rows("drift_overlap_lower", "drift_overlap_upper", v_h2,
               V.at(V.slack_round0[2], k), tau - del, b2, overlap_degenerate);

    // Staleness pins.
    {
      const double c = b3 * 2.0 * hp.eta;
      Posynomial reach;  // c * (L + sigma) * tau / (a * eps)
      add_term(reach, c * hp.lipschitz * tau / a, {{v_eps, -1.0}});
      add_term(reach, c * tau / a, {{v_eps, -1.0}, {v_sig, 1.0}});
      Posynomial lagged;  // 1 + c * (L + sigma) * delay / eps
      add_term(lagged, 1.0, {});
      add_term(lagged, c * hp.lipschitz * del, {{v_eps, -1.0}});
      add_term(lagged, c * del, {{v_eps, -1.0}, {v_sig, 1.0}});
      push(rk("staleness_lower", k), GpRow::Kind::Inequality, reach, lagged);
      Posynomial num = lagged * Monomial::var(V.at(V.slack_round0[3], k), -1.0);
      push(rk("staleness_upper", k), GpRow::Kind::Inequality, std::move(num),
           std::move(reach));
    }

    // Noise pins: sigma against the weighted per-device noise factors.
    {
      Posynomial mix;
      for (int i = 0; i < I; ++i)
        add_term(mix,
                 net.rho[i] * devices[i].feature_stddev * devices[i].variability *
                     std::sqrt(2.0),
                 {{V.cell(V.noise_factor0, k, i), 1.0}});
      if (mix.empty())
        throw std::invalid_argument(
            "schedule program: every device has zero noise scale, the batch "
            "allocation has nothing to trade off");
      push(rk("noise_lower", k), GpRow::Kind::Inequality, mix, Monomial::var(v_sig));
      Posynomial num;
      add_term(num, 1.0, {{v_sig, 1.0}, {V.at(V.slack_round0[4], k), -1.0}});
      push(rk("noise_upper", k), GpRow::Kind::Inequality, std::move(num),
           std::move(mix));
    }

    // Per-device noise factors against their sampling fractions.
    for (int i = 0; i < I; ++i) {
      const int v_p = V.cell(V.noise_factor0, k, i);
      const int v_n = V.cell(V.batch0, k, i);
      Posynomial frac;  // p^2 n + n / N
      add_term(frac, 1.0, {{v_p, 2.0}, {v_n, 1.0}});
      add_term(frac, 1.0 / devices[i].data_size, {{v_n, 1.0}});
      push(rki("noise_factor_upper", k, i), GpRow::Kind::Inequality, frac, {});
      push(rki("noise_factor_lower", k, i), GpRow::Kind::Inequality,
           Monomial::var(V.cell(V.slack_dev0, k, i), -1.0), std::move(frac));
    }
  }

  return prog;
}

}
