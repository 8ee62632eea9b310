#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sfda/gp_solver.hpp"
#include "sfda/newton.hpp"

namespace sfda {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Monomial inverse(const Monomial& m) {
  Monomial r;
  r.coef = 1.0 / m.coef;
  r.powers = m.powers;
  for (auto& pw : r.powers) pw.second = -pw.second;
  return r;
}

struct EnforcedRow {
  Posynomial p;  // solver form: p(z) <= 1
  int src = -1;
  Monomial den_hat;
  bool tightened = false;  // den was a multi-term sum replaced by den_hat
};

std::vector<EnforcedRow> condense_at(const GpProgram& prog, std::span<const double> z) {
  std::vector<EnforcedRow> rows;
  rows.reserve(prog.rows.size());
  for (int r = 0; r < static_cast<int>(prog.rows.size()); ++r) {
    const GpRow& row = prog.rows[r];
    if (row.kind == GpRow::Kind::Identity) continue;
    EnforcedRow er;
    er.src = r;
    er.p = row.num;
    if (!row.den.empty()) {
      er.den_hat = row.den.is_monomial() ? row.den.terms.front() : row.den.condense(z);
      er.tightened = !row.den.is_monomial();
      er.p *= inverse(er.den_hat);
    }
    rows.push_back(std::move(er));
  }
  return rows;
}

std::vector<double> to_log(std::span<const double> y) {
  std::vector<double> z(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0)) throw std::invalid_argument("schedule solver: nonpositive point");
    z[i] = std::log(y[i]);
  }
  return z;
}

// Re-aims the combiner-dependent tail of a solved point at new weights. Each
// variable whose pin involves the weights is rescaled by the ratio of its new
// pin value to its old one, so the point keeps its relative distance to every
// wall instead of being parked at a fresh margin; a full anchor repair here
// would jam the whole chain against its pins and strangle the next solve. The
// head of the chain (batches, noise factors, drift terms, costs) does not
// involve the weights and is left alone.
void remap_combiner_tail(const HyperParams& hp, const std::vector<double>& a_old,
                         const std::vector<double>& a_new, const VarMap& V,
                         std::vector<double>& y) {
  const double tau = hp.local_steps;
  const double del = hp.delay;
  const double T = static_cast<double>(hp.horizon());
  const double m1 = 1.0 / (2.0 * hp.eta * hp.phi * T);
  const double m2 = m1 * m1;
  const double m3 = hp.lipschitz / (hp.eta * hp.phi * T);
  const double b1 = hp.growth(tau) - 1.0;
  const double b5 = hp.growth(tau - del);

  double psi_old_sum = 0.0, psi_new_sum = 0.0;
  for (int k = 0; k < V.rounds; ++k) {
    const double a = a_old[k];
    const double an = a_new[k];
    const double sig = y[V.at(V.noise0, k)];
    const double h1 = y[V.at(V.drift_full0, k)];
    const double h2 = y[V.at(V.drift_overlap0, k)];
    const auto eps_pin = [&](double aa) {
      const double b3 = 1.0 - std::pow(1.0 - aa, k + 1);
      return b3 * 2.0 * hp.eta * (hp.lipschitz + sig) * (tau / aa - del);
    };
    const auto round_sum = [&](double aa, double eps) {
      const double b4 = 1.0 - aa;
      return aa * b4 * b1 * eps + b4 * h1 + aa * h2 +
             aa * hp.eta * del * hp.lipschitz * b5 + hp.eta * (tau - aa * del) * sig;
    };

    double& eps = y[V.at(V.staleness0, k)];
    const double lift = std::max(eps / eps_pin(a), 1.0 + 1e-12);
    const double eps_new = eps_pin(an) * lift;
    double& psi = y[V.at(V.round_bound0, k)];
    const double psi_new = psi * round_sum(an, eps_new) / round_sum(a, eps);
    psi_old_sum += psi;
    psi_new_sum += psi_new;
    eps = eps_new;
    psi = psi_new;

    // The lagged-side pin needs its slack at or above the preserved lift.
    double& s3 = y[V.at(V.slack_round0[3], k)];
    const double need = (lift - (lift - 1.0) * an * del / tau) * (1.0 + 1e-9);
    if (s3 < need) s3 = need;
  }

  double& psi_total = y[V.psi_total];
  const double psi_total_new = psi_total * psi_new_sum / psi_old_sum;
  double& surd = y[V.surd];
  const double surd_new =
      surd * std::sqrt((m2 + m3 * psi_total_new) / (m2 + m3 * psi_total));
  double& gap = y[V.loss_gap];
  gap *= (m1 + surd_new + hp.lipschitz * psi_total_new) /
         (m1 + surd + hp.lipschitz * psi_total);
  surd = surd_new;
  psi_total = psi_total_new;
}

// A point that already sits strictly inside every box and row can start the
// barrier directly. Repairing such a point would be worse than useless: the
// repair parks every pinned variable a hair away from its wall, and restarting
// the barrier from that jammed corner costs hundreds of damped steps.
bool strictly_inside(const GpProgram& prog, const std::vector<double>& y) {
  for (int v = 0; v < prog.vars.count; ++v)
    if (!(y[v] > prog.lo[v] && y[v] < prog.hi[v])) return false;
  const std::vector<double> z = to_log(y);
  for (const auto& row : prog.rows) {
    if (row.kind == GpRow::Kind::Identity) continue;
    const double num = row.num.eval(z);
    const double den = row.den.empty() ? 1.0 : row.den.eval(z);
    if (!(num < den * (1.0 - 1e-12))) return false;
  }
  return true;
}

// Per-device energy constants shared by the builder, the repair, and the
// rounding step.
void energy_constants(const HyperParams& hp, const std::vector<DeviceProfile>& devices,
                      const CostWeights& weights, std::vector<double>& slope,
                      std::vector<double>& tx) {
  slope.resize(devices.size());
  tx.resize(devices.size());
  for (std::size_t i = 0; i < devices.size(); ++i) {
    slope[i] = 0.5 * devices[i].cap_coeff * devices[i].cycles_per_sample *
               hp.local_steps * devices[i].clock_rate * devices[i].clock_rate;
    tx[i] = devices[i].tx_power * weights.payload_bits / devices[i].link_rate;
  }
}

}  // namespace

double penalized_objective(const GpProgram& prog, std::span<const double> y) {
  const std::vector<double> z = to_log(y);
  return prog.objective.eval(z);
}

double max_identity_residual(const GpProgram& prog, std::span<const double> y) {
  const std::vector<double> z = to_log(y);
  double worst = 0.0;
  for (const auto& row : prog.rows) {
    if (row.kind != GpRow::Kind::Identity) continue;
    const double num = row.num.eval(z);
    const double den = row.den.empty() ? 1.0 : row.den.eval(z);
    worst = std::max(worst, std::fabs(num / den - 1.0));
  }
  return worst;
}

bool repair_anchor(const GpProgram& prog, const HyperParams& hp,
                   const std::vector<DeviceProfile>& devices, const CostWeights& weights,
                   std::vector<double>& y, double m) {
  const VarMap& V = prog.vars;
  const int K = V.rounds, I = V.devices;
  if (static_cast<int>(devices.size()) != I)
    throw std::invalid_argument("anchor repair: device count mismatch");
  if (static_cast<int>(y.size()) != V.count)
    throw std::invalid_argument("anchor repair: point size mismatch");
  if (!(m > 0.0) || m >= 1e-3)
    throw std::invalid_argument("anchor repair: margin outside (0, 1e-3)");

  const NetworkSnapshot net = snapshot_from_profiles(devices);
  const double tau = hp.local_steps;
  const double del = hp.delay;
  const double T = static_cast<double>(hp.horizon());
  const double m1 = 1.0 / (2.0 * hp.eta * hp.phi * T);
  const double m2c = m1 * m1;
  const double m3c = hp.lipschitz / (hp.eta * hp.phi * T);
  const double b1 = hp.growth(tau) - 1.0;
  const double b2 = hp.growth(tau - del) - 1.0;
  const double b5 = hp.growth(tau - del);

  std::vector<double> e_slope, e_tx;
  energy_constants(hp, devices, weights, e_slope, e_tx);

  // Batch block into the strict interior of its boxes; everything else is
  // derived from it.
  const double n_floor_rel = 1.0 + 1e-9;
  for (int i = 0; i < I; ++i) {
    const double lo = 1.0 * n_floor_rel;
    const double hi = devices[i].data_size * (1.0 - 10.0 * m);
    for (int k = 0; k < K; ++k) {
      double& n = y[V.cell(V.batch0, k, i)];
      n = std::clamp(n, lo, std::max(lo, hi));
    }
  }

  // Battery: scale each device's batch row down until its lifetime energy fits
  // with margin. Entries already at the floor stay there.
  for (int i = 0; i < I; ++i) {
    const double cap = devices[i].battery * (1.0 - m) - K * e_tx[i];
    const double lo = 1.0 * n_floor_rel;
    if (cap < K * e_slope[i] * lo) return false;  // infeasible even at batch 1
    for (int pass = 0; pass < 64; ++pass) {
      double total = 0.0;
      for (int k = 0; k < K; ++k) total += y[V.cell(V.batch0, k, i)];
      if (e_slope[i] * total <= cap) break;
      double floored = 0.0, movable = 0.0;
      for (int k = 0; k < K; ++k) {
        const double n = y[V.cell(V.batch0, k, i)];
        (n <= lo * (1.0 + 1e-12) ? floored : movable) += n;
      }
      const double want = cap / e_slope[i] - floored;
      const double factor = movable > 0.0 ? want / movable : 0.0;
      for (int k = 0; k < K; ++k) {
        double& n = y[V.cell(V.batch0, k, i)];
        if (n > lo * (1.0 + 1e-12)) n = std::max(lo, n * factor);
      }
    }
  }

  // Energy and time totals.
  for (int k = 0; k < K; ++k) {
    double ec = 0.0, tx = 0.0, tc = 0.0, tt = 0.0;
    for (int i = 0; i < I; ++i) {
      const double n = y[V.cell(V.batch0, k, i)];
      ec += e_slope[i] * n;
      tx += e_tx[i];
      tc = std::max(tc, tau * devices[i].cycles_per_sample * n / devices[i].clock_rate);
      tt = std::max(tt, weights.payload_bits / devices[i].link_rate);
    }
    y[V.at(V.energy_cmp0, k)] = ec * (1.0 + m);
    y[V.at(V.energy_tx0, k)] = tx * (1.0 + m);
    y[V.at(V.time_cmp0, k)] = tc * (1.0 + m);
    y[V.at(V.time_tx0, k)] = tt * (1.0 + m);
  }

  // Noise factors, noise levels, and the divergence chain.
  for (int k = 0; k < K; ++k) {
    const double a = prog.alpha_hat[k];
    const double b3 = 1.0 - std::pow(1.0 - a, k + 1);
    const double b4 = 1.0 - a;
    const double b6 = tau - a * del;

    double sig = 0.0;
    for (int i = 0; i < I; ++i) {
      const int v_p = V.cell(V.noise_factor0, k, i);
      const double n = y[V.cell(V.batch0, k, i)];
      const double N = devices[i].data_size;
      double p = std::sqrt(((1.0 - m) - n / N) / n);
      p = std::clamp(p, prog.lo[v_p] * (1.0 + 1e-9), prog.hi[v_p] * (1.0 - 1e-9));
      y[v_p] = p;
      const double f8 = p * p * n + n / N;
      y[V.cell(V.slack_dev0, k, i)] = std::max((1.0 + m) / f8, 1.0 + 1e-9);
      sig += net.rho[i] * devices[i].feature_stddev * devices[i].variability *
             std::sqrt(2.0) * p;
    }
    const int v_sig = V.at(V.noise0, k);
    sig = std::clamp(sig * (1.0 + m), prog.lo[v_sig] * (1.0 + 1e-6),
                     prog.hi[v_sig] * (1.0 - 1e-6));
    y[v_sig] = sig;

    const double eps = b3 * 2.0 * hp.eta * (hp.lipschitz + sig) * (tau / a - del) *
                       (1.0 + m);
    y[V.at(V.staleness0, k)] = eps;

    const int v_h1 = V.at(V.drift_full0, k);
    const int v_h2 = V.at(V.drift_overlap0, k);
    const double h1 = std::max(drift_term(tau, sig, hp) * (1.0 + m),
                               prog.lo[v_h1] * (1.0 + 1e-6));
    const double h2 = std::max(drift_term(tau - del, sig, hp) * (1.0 + m),
                               prog.lo[v_h2] * (1.0 + 1e-6));
    y[v_h1] = h1;
    y[v_h2] = h2;

    const double five = a * b4 * b1 * eps + b4 * h1 + a * h2 +
                        a * hp.eta * del * hp.lipschitz * b5 + hp.eta * sig * b6;
    y[V.at(V.round_bound0, k)] = five * (1.0 + m);

    // Slacks from the actual row ratios at the values just written.
    const double A = hp.delta + sig;
    y[V.at(V.slack_round0[0], k)] = (1.0 + m) * (1.0 + m);
    const double r3 = (h1 + hp.eta * A * tau) * hp.beta / (b1 * A);
    y[V.at(V.slack_round0[1], k)] = std::max((1.0 + m) * r3, 1.0 + 1e-9);
    const double r4 = (h2 + hp.eta * A * (tau - del)) * hp.beta / (b2 * A);
    y[V.at(V.slack_round0[2], k)] = std::max((1.0 + m) * r4, 1.0 + 1e-9);
    const double c = b3 * 2.0 * hp.eta * (hp.lipschitz + sig);
    const double r5 = (eps + c * del) / (c * tau / a);
    y[V.at(V.slack_round0[3], k)] = std::max((1.0 + m) * r5, 1.0 + 1e-9);
    y[V.at(V.slack_round0[4], k)] = (1.0 + m) * (1.0 + m);
  }

  double psi_sum = 0.0;
  for (int k = 0; k < K; ++k) psi_sum += y[V.at(V.round_bound0, k)];
  y[V.psi_total] = psi_sum * (1.0 + m);
  y[V.slack_total] = (1.0 + m) * (1.0 + m);
  y[V.surd] = std::sqrt(m2c + m3c * y[V.psi_total]) * (1.0 + m);
  y[V.loss_gap] =
      (m1 + y[V.surd] + hp.lipschitz * y[V.psi_total]) * (1.0 + m);

  // Safety clamp: everything strictly inside its box.
  for (int v = 0; v < V.count; ++v)
    y[v] = std::clamp(y[v], prog.lo[v] * (1.0 + 1e-12), prog.hi[v] * (1.0 - 1e-12));
  return true;
}

InnerReport solve_condensed(const GpProgram& prog, std::vector<double>& y,
                            const PenaltyConfig& pen) {
  pen.validate();
  const int n = prog.vars.count;
  if (static_cast<int>(y.size()) != n)
    throw std::invalid_argument("schedule solver: point size mismatch");

  std::vector<double> z = to_log(y);
  std::vector<double> zlo(n), zhi(n);
  for (int v = 0; v < n; ++v) {
    zlo[v] = std::log(prog.lo[v]);
    zhi[v] = std::log(prog.hi[v]);
    if (!(z[v] > zlo[v] && z[v] < zhi[v]))
      throw std::runtime_error("schedule solver: start outside box for " +
                               prog.vars.name(v));
  }

  const std::vector<EnforcedRow> rows = condense_at(prog, z);
  for (const auto& er : rows)
    if (!(er.p.eval(z) < 1.0))
      throw std::runtime_error("schedule solver: start violates " +
                               prog.rows[er.src].name);

  const double f0z0 = prog.objective.eval(z);
  if (!std::isfinite(f0z0) || f0z0 <= 0.0)
    throw std::runtime_error("schedule solver: bad objective at start");
  const double scale = 1.0 / f0z0;
  const double m_count = static_cast<double>(rows.size()) + 2.0 * n;

  // Scratch shared by the barrier callback.
  std::vector<double> tvals;
  std::vector<std::pair<int, double>> accum;
  accum.reserve(64);

  InnerReport rep;
  double t = 1.0;
  for (int stage = 0; stage < 64; ++stage) {
    auto barrier = [&, t](std::span<const double> zz, std::vector<double>* grad,
                          std::vector<double>* hess) -> double {
      double value = 0.0;
      if (grad) std::fill(grad->begin(), grad->end(), 0.0);
      if (hess) std::fill(hess->begin(), hess->end(), 0.0);

      // Box walls.
      for (int v = 0; v < n; ++v) {
        const double dl = zz[v] - zlo[v];
        const double dh = zhi[v] - zz[v];
        if (!(dl > 0.0 && dh > 0.0)) return kInf;
        value -= std::log(dl) + std::log(dh);
        if (grad) {
          (*grad)[v] += -1.0 / dl + 1.0 / dh;
          if (hess) (*hess)[static_cast<size_t>(v) * n + v] += 1.0 / (dl * dl) + 1.0 / (dh * dh);
        }
      }

      // Scaled objective.
      {
        const double w = t * scale;
        for (const auto& term : prog.objective.terms) {
          const double lg = term.log_at(zz);
          const double tv = std::exp(lg);
          if (!std::isfinite(tv)) return kInf;
          value += w * tv;
          if (grad) {
            for (const auto& [vi, ei] : term.powers) {
              (*grad)[vi] += w * tv * ei;
              if (hess)
                for (const auto& [vj, ej] : term.powers)
                  (*hess)[static_cast<size_t>(vi) * n + vj] += w * tv * ei * ej;
            }
          }
        }
      }

      // Constraint walls.
      for (const auto& er : rows) {
        tvals.clear();
        double p = 0.0;
        double lg_last = 0.0;
        for (const auto& term : er.p.terms) {
          lg_last = term.log_at(zz);
          const double tv = std::exp(lg_last);
          tvals.push_back(tv);
          p += tv;
        }
        const double onemp =
            er.p.terms.size() == 1 ? -std::expm1(lg_last) : 1.0 - p;
        if (!(onemp > 0.0)) return kInf;
        value -= std::log(onemp);
        if (!grad) continue;

        const double u = 1.0 / onemp;
        accum.clear();
        for (std::size_t ti = 0; ti < er.p.terms.size(); ++ti) {
          const double tv = tvals[ti];
          for (const auto& [vi, ei] : er.p.terms[ti].powers) {
            bool found = false;
            for (auto& pr : accum)
              if (pr.first == vi) {
                pr.second += tv * ei;
                found = true;
                break;
              }
            if (!found) accum.push_back({vi, tv * ei});
          }
        }
        for (const auto& [vi, gi] : accum) (*grad)[vi] += u * gi;
        if (hess) {
          for (std::size_t ti = 0; ti < er.p.terms.size(); ++ti) {
            const double tv = tvals[ti];
            for (const auto& [vi, ei] : er.p.terms[ti].powers)
              for (const auto& [vj, ej] : er.p.terms[ti].powers)
                (*hess)[static_cast<size_t>(vi) * n + vj] += u * tv * ei * ej;
          }
          for (const auto& [vi, gi] : accum)
            for (const auto& [vj, gj] : accum)
              (*hess)[static_cast<size_t>(vi) * n + vj] += u * u * gi * gj;
        }
      }
      return value;
    };

    NewtonOptions nopt;
    nopt.max_iters = pen.max_inner;
    nopt.decrement_tol = pen.newton_tol;
    const NewtonReport nr = minimize_newton(barrier, z, nopt);
    rep.stages += 1;
    rep.newton_iters += nr.iters;
    rep.converged = nr.converged;
    if (m_count / t <= pen.inner_tol) break;
    t *= pen.barrier_mu;
  }

  for (int v = 0; v < n; ++v) y[v] = std::exp(z[v]);
  rep.objective = prog.objective.eval(z);

  double gap = 0.0;
  for (const auto& er : rows) {
    if (!er.tightened) continue;
    const double lg_hat = er.den_hat.log_at(z);
    const double lg_true = prog.rows[er.src].den.log_eval(z);
    gap = std::max(gap, 1.0 - std::exp(lg_hat - lg_true));
  }
  rep.condensation_gap = gap;
  return rep;
}

SpResult solve_schedule(const std::vector<DeviceProfile>& devices, const HyperParams& hp,
                        const CostWeights& weights, const ScheduleOptions& alpha_mode,
                        const PenaltyConfig& pen) {
  hp.validate();
  weights.validate();
  pen.validate();
  if (devices.empty()) throw std::invalid_argument("schedule: no devices");
  const int K = hp.rounds;
  const int I = static_cast<int>(devices.size());

  SpResult out;
  out.batches = MinibatchSchedule::uniform(K, I, 1.0);
  out.combiner = CombinerSchedule::constant(K, 1.0);

  if (hp.delay >= hp.local_steps) {
    out.report.feasible = false;
    out.report.message =
        "delay equals or exceeds the local step count, which empties the overlap "
        "window the allocation rows are built on; reduce the delay or raise the "
        "local step count";
    return out;
  }

  const NetworkSnapshot net = snapshot_from_profiles(devices);

  // Interior start: half the local data per device, uniformly across rounds.
  std::vector<double> n0(I);
  for (int i = 0; i < I; ++i)
    n0[i] = std::clamp(std::round(devices[i].data_size / 2.0), 1.0,
                       devices[i].data_size);
  const double sigma0 = network_noise_bound(net, n0);

  std::vector<double> ahat(K);
  if (alpha_mode.mode == ScheduleMode::Fixed) {
    if (!(alpha_mode.fixed_alpha > 0.0) || alpha_mode.fixed_alpha > 1.0)
      throw std::invalid_argument("schedule: fixed combiner weight outside (0, 1]");
    std::fill(ahat.begin(), ahat.end(), alpha_mode.fixed_alpha);
  } else {
    std::fill(ahat.begin(), ahat.end(), optimal_alpha_closed_form(sigma0, hp).value);
  }

  GpProgram prog = build_schedule_program(hp, devices, weights, pen, ahat);
  std::vector<double> y(prog.vars.count, 1.0);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i) y[prog.vars.cell(prog.vars.batch0, k, i)] = n0[i];

  if (!repair_anchor(prog, hp, devices, weights, y, pen.margin)) {
    out.report.feasible = false;
    out.report.message =
        "a device battery cannot cover the run even at batch size 1; the energy "
        "budget is infeasible for this round count";
    return out;
  }

  auto refresh_alpha = [&](double sigma, int k) -> double {
    switch (alpha_mode.mode) {
      case ScheduleMode::Numeric:
        return optimal_alpha_numeric(k + 1, sigma, hp, alpha_mode.solver).value;
      case ScheduleMode::ClosedForm:
        return optimal_alpha_closed_form(sigma, hp).value;
      case ScheduleMode::Fixed:
        return alpha_mode.fixed_alpha;
    }
    return 1.0;
  };

  std::vector<double>& trace = out.report.objective_trace;
  std::vector<double> y_best;
  double obj_best = kInf;
  double gap_best = 0.0;
  bool frozen = (alpha_mode.mode == ScheduleMode::Fixed);
  bool converged = false;

  for (int iter = 0; iter < pen.max_outer; ++iter) {
    const double obj_enter = obj_best;
    const InnerReport ir = solve_condensed(prog, y, pen);
    if (ir.objective > obj_best * (1.0 + 1e-12)) {
      y = y_best;  // the previous iterate stands; treat the plateau as converged
      converged = true;
      break;
    }
    y_best = y;
    obj_best = ir.objective;
    gap_best = ir.condensation_gap;
    trace.push_back(obj_best);

    if (!frozen) {
      // Inside the loop the weights follow the asymptotic closed form of the
      // noise level alone. Re-minimizing per round here would fold each round's
      // staleness saturation back into its weight, cancelling the very pressure
      // that makes later rounds worth larger batches; the requested per-round
      // rule is applied once at the end, on the rounded schedule.
      std::vector<double> anew(K);
      double dmax = 0.0;
      for (int k = 0; k < K; ++k) {
        anew[k] =
            optimal_alpha_closed_form(y[prog.vars.at(prog.vars.noise0, k)], hp).value;
        dmax = std::max(dmax, std::fabs(anew[k] - ahat[k]));
      }
      // Only rebuild for a material shift; the final combiner pass recomputes
      // the weights exactly on the rounded batches anyway.
      if (dmax > 1e-5) {
        GpProgram prog2 = build_schedule_program(hp, devices, weights, pen, anew);
        std::vector<double> y2 = y;
        remap_combiner_tail(hp, ahat, anew, prog2.vars, y2);
        bool ok = strictly_inside(prog2, y2) ||
                  repair_anchor(prog2, hp, devices, weights, y2, pen.margin);
        if (ok) {
          const InnerReport ir2 = solve_condensed(prog2, y2, pen);
          if (ir2.objective <= obj_best * (1.0 + 1e-12)) {
            prog = std::move(prog2);
            y = std::move(y2);
            ahat = anew;
            y_best = y;
            obj_best = ir2.objective;
            gap_best = ir2.condensation_gap;
            trace.push_back(obj_best);
          } else {
            frozen = true;
            out.report.alpha_frozen = true;
          }
        } else {
          frozen = true;
          out.report.alpha_frozen = true;
        }
      }
    }

    // One whole pass (condensation plus any accepted combiner refresh) that
    // fails to buy a meaningful improvement ends the outer loop.
    const double drop = std::isfinite(obj_enter)
                            ? (obj_enter - obj_best) / std::max(1.0, std::fabs(obj_enter))
                            : kInf;
    if (drop <= pen.outer_tol) {
      converged = true;
      break;
    }
    if (!strictly_inside(prog, y) &&
        !repair_anchor(prog, hp, devices, weights, y, pen.margin)) {
      out.report.message = "anchor repair failed mid-run";  // defensive; not expected
      break;
    }
  }

  out.report.converged = converged;
  out.report.outer_iters = static_cast<int>(trace.size());
  out.report.relaxed_objective = obj_best;
  out.report.condensation_gap = gap_best;
  out.report.max_identity_residual = max_identity_residual(prog, y_best);

  const VarMap& V = prog.vars;
  double max_slack = 0.0;
  max_slack = std::max(max_slack, y_best[V.slack_total]);
  for (int k = 0; k < K; ++k) {
    for (int f = 0; f < 5; ++f)
      max_slack = std::max(max_slack, y_best[V.at(V.slack_round0[f], k)]);
    for (int i = 0; i < I; ++i)
      max_slack = std::max(max_slack, y_best[V.cell(V.slack_dev0, k, i)]);
  }
  out.report.max_slack = max_slack;

  // Integer batches, then a battery repair that walks the largest entries down.
  std::vector<double> e_slope, e_tx;
  energy_constants(hp, devices, weights, e_slope, e_tx);
  MinibatchSchedule batches = MinibatchSchedule::uniform(K, I, 1.0);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i) {
      const double raw = y_best[V.cell(V.batch0, k, i)];
      batches.sizes[static_cast<size_t>(k) * I + i] =
          std::clamp(std::round(raw), 1.0, devices[i].data_size);
    }
  for (int i = 0; i < I; ++i) {
    double spent = K * e_tx[i];
    for (int k = 0; k < K; ++k) spent += e_slope[i] * batches.at(k, i);
    while (spent > devices[i].battery) {
      int kmax = -1;
      double nmax = 1.0;
      for (int k = 0; k < K; ++k)
        if (batches.at(k, i) > nmax) {
          nmax = batches.at(k, i);
          kmax = k;
        }
      if (kmax < 0) {
        out.report.feasible = false;
        out.report.message = "battery infeasible after rounding";
        return out;
      }
      batches.sizes[static_cast<size_t>(kmax) * I + i] -= 1.0;
      spent -= e_slope[i];
    }
  }

  // Final combiner pass on the rounded noise levels.
  CombinerSchedule combiner;
  combiner.alpha.resize(K);
  for (int k = 0; k < K; ++k) {
    const double sig = network_noise_bound(net, batches.row(k));
    combiner.alpha[k] = refresh_alpha(sig, k);
  }
  combiner.validate();
  batches.validate(net);

  out.batches = std::move(batches);
  out.combiner = std::move(combiner);
  out.report.objective =
      objective_value(devices, out.batches, out.combiner, weights, hp, net);
  if (out.report.message.empty())
    out.report.message = converged ? "converged" : "iteration cap reached";
  return out;
}

}
