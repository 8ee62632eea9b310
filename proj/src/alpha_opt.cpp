#include "sfda/alpha_opt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sfda {

namespace {

// Golden-section minimization on [lo, hi]; psi is unimodal there in practice,
// and when it is not, the bracket came from a fine grid so the local optimum
// found is the global one up to grid resolution.
template <typename F>
double golden_min(F&& f, double lo, double hi, int iters) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < iters; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

AlphaResult optimal_alpha_numeric(int k, double sigma_k, const HyperParams& hp,
                                  const AlphaSolverConfig& cfg) {
  hp.validate();
  if (k < 0) throw std::invalid_argument("alpha solver: negative round index");
  if (cfg.grid_points < 2) throw std::invalid_argument("alpha solver: grid too small");

  const auto psi = [&](double a) { return round_divergence_bound(k, a, sigma_k, hp); };

  const double lo = cfg.floor;
  const double hi = 1.0;
  int best = cfg.grid_points;  // scan from 1 downward so ties keep the largest
  double best_val = psi(hi);
  for (int i = cfg.grid_points - 1; i >= 0; --i) {
    const double a = lo + (hi - lo) * static_cast<double>(i) / cfg.grid_points;
    const double v = psi(a);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }

  const double cell = (hi - lo) / cfg.grid_points;
  const double bracket_lo = std::max(lo, lo + (best - 1) * cell);
  const double bracket_hi = std::min(hi, lo + (best + 1) * cell);
  double a_star = golden_min(psi, bracket_lo, bracket_hi, cfg.refine_iters);

  AlphaResult r;
  const double refined = psi(a_star);
  if (psi(1.0) <= refined + 1e-12 * std::fabs(refined)) {
    // The boundary matches the refined minimum; prefer the exact endpoint.
    r.value = 1.0;
    r.clamped = (best == cfg.grid_points);
  } else if (1.0 - a_star < cfg.snap_tol) {
    r.value = 1.0;
    r.clamped = true;
  } else {
    r.value = a_star;
    r.clamped = (a_star <= lo + cell);  // pressed against the floor
  }
  return r;
}

AlphaResult optimal_alpha_closed_form(double sigma_inf, const HyperParams& hp) {
  hp.validate();
  if (sigma_inf < 0.0) throw std::invalid_argument("alpha solver: negative noise");
  const double tau = hp.local_steps;
  const double del = hp.delay;
  const double ls = hp.lipschitz + sigma_inf;
  const double b1 = hp.growth(tau) - 1.0;
  const double b5 = hp.growth(tau - del);
  const double gd = hp.growth(del) - 1.0;

  const double numer = 2.0 * hp.eta * tau * ls * b1;
  const double denom = 2.0 * hp.eta * del * ls * b1 + hp.eta * del * hp.lipschitz * b5 -
                       ((hp.delta + sigma_inf) / hp.beta) * b5 * gd +
                       hp.eta * hp.delta * del;

  AlphaResult r;
  if (denom <= 0.0) {
    r.value = 1.0;
    r.clamped = true;
    return r;
  }
  const double a = std::sqrt(numer / denom);
  if (a >= 1.0) {
    r.value = 1.0;
    r.clamped = true;
  } else {
    r.value = a;
    r.clamped = false;
  }
  return r;
}

CombinerSchedule build_combiner_schedule(const std::vector<double>& sigmas,
                                         const HyperParams& hp,
                                         const ScheduleOptions& opt) {
  hp.validate();
  if (static_cast<int>(sigmas.size()) != hp.rounds)
    throw std::invalid_argument("combiner schedule: noise vector length != rounds");

  CombinerSchedule sched;
  sched.alpha.resize(sigmas.size());
  switch (opt.mode) {
    case ScheduleMode::Fixed:
      if (!(opt.fixed_alpha > 0.0) || opt.fixed_alpha > 1.0)
        throw std::invalid_argument("combiner schedule: fixed weight outside (0, 1]");
      std::fill(sched.alpha.begin(), sched.alpha.end(), opt.fixed_alpha);
      break;
    case ScheduleMode::ClosedForm:
      for (std::size_t j = 0; j < sigmas.size(); ++j)
        sched.alpha[j] = optimal_alpha_closed_form(sigmas[j], hp).value;
      break;
    case ScheduleMode::Numeric:
      for (std::size_t j = 0; j < sigmas.size(); ++j)
        sched.alpha[j] =
            optimal_alpha_numeric(static_cast<int>(j) + 1, sigmas[j], hp, opt.solver)
                .value;
      break;
  }
  sched.validate();
  return sched;
}

}
