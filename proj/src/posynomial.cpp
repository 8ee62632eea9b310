#include "sfda/posynomial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace sfda {

double Monomial::log_at(std::span<const double> z) const {
  double s = std::log(coef);
  for (const auto& [idx, expnt] : powers) {
    if (idx < 0 || idx >= static_cast<int>(z.size()))
      throw std::out_of_range("monomial: variable index outside point");
    s += expnt * z[idx];
  }
  return s;
}

double Monomial::exponent_of(int index) const {
  for (const auto& [idx, expnt] : powers)
    if (idx == index) return expnt;
  return 0.0;
}

void Monomial::set_power(int index, double exponent) {
  auto it = std::lower_bound(powers.begin(), powers.end(), index,
                             [](const auto& p, int i) { return p.first < i; });
  if (it != powers.end() && it->first == index) {
    if (exponent == 0.0)
      powers.erase(it);
    else
      it->second = exponent;
  } else if (exponent != 0.0) {
    powers.insert(it, {index, exponent});
  }
}

Monomial& Monomial::operator*=(const Monomial& other) {
  coef *= other.coef;
  for (const auto& [idx, expnt] : other.powers)
    set_power(idx, exponent_of(idx) + expnt);
  return *this;
}

Posynomial& Posynomial::operator+=(const Posynomial& other) {
  terms.insert(terms.end(), other.terms.begin(), other.terms.end());
  return *this;
}

Posynomial& Posynomial::operator+=(Monomial m) {
  terms.push_back(std::move(m));
  return *this;
}

Posynomial& Posynomial::operator*=(const Monomial& m) {
  for (auto& t : terms) t *= m;
  return *this;
}

int Posynomial::max_var() const {
  int m = -1;
  for (const auto& t : terms)
    for (const auto& [idx, expnt] : t.powers) m = std::max(m, idx);
  return m;
}

double Posynomial::eval(std::span<const double> z,
                        std::vector<double>* term_vals) const {
  if (term_vals) {
    term_vals->clear();
    term_vals->reserve(terms.size());
  }
  double total = 0.0;
  for (const auto& t : terms) {
    const double lg = t.log_at(z);
    const double v = lg > 700.0 ? std::numeric_limits<double>::infinity() : std::exp(lg);
    if (term_vals) term_vals->push_back(v);
    total += v;
  }
  return total;
}

double Posynomial::log_eval(std::span<const double> z) const {
  if (terms.empty()) return -std::numeric_limits<double>::infinity();
  double peak = -std::numeric_limits<double>::infinity();
  std::vector<double> logs;
  logs.reserve(terms.size());
  for (const auto& t : terms) {
    logs.push_back(t.log_at(z));
    peak = std::max(peak, logs.back());
  }
  if (!std::isfinite(peak)) return peak;
  double s = 0.0;
  for (double lg : logs) s += std::exp(lg - peak);
  return peak + std::log(s);
}

Monomial Posynomial::condense(std::span<const double> z) const {
  if (terms.empty()) throw std::invalid_argument("condense: empty sum");
  std::vector<double> logs;
  logs.reserve(terms.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& t : terms) {
    logs.push_back(t.log_at(z));
    peak = std::max(peak, logs.back());
  }
  if (!std::isfinite(peak)) throw std::invalid_argument("condense: anchor overflows");
  double denom = 0.0;
  for (double lg : logs) denom += std::exp(lg - peak);
  const double log_total = peak + std::log(denom);

  double log_coef = 0.0;
  std::map<int, double> expo;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const double lam = std::exp(logs[j] - log_total);
    if (lam < 1e-300) continue;
    log_coef += lam * (std::log(terms[j].coef) - std::log(lam));
    for (const auto& [idx, expnt] : terms[j].powers) expo[idx] += lam * expnt;
  }

  Monomial out;
  out.coef = std::exp(log_coef);
  out.powers.reserve(expo.size());
  for (const auto& [idx, expnt] : expo)
    if (expnt != 0.0) out.powers.push_back({idx, expnt});
  return out;
}

}
