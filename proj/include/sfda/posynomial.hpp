#pragma once

#include <span>
#include <utility>
#include <vector>

namespace sfda {

// Product of a positive coefficient and powers of a few variables. Variables
// are identified by dense integer indices; evaluation happens in log space,
// i.e. z[i] = ln y[i], where the monomial's log is affine.
struct Monomial {
  double coef = 1.0;
  std::vector<std::pair<int, double>> powers;  // sorted by variable index

  static Monomial constant(double c) { return Monomial{c, {}}; }
  static Monomial var(int index, double exponent = 1.0, double c = 1.0) {
    return Monomial{c, {{index, exponent}}};
  }

  double log_at(std::span<const double> z) const;
  double exponent_of(int index) const;
  void set_power(int index, double exponent);  // removes the entry when 0
  Monomial& operator*=(const Monomial& other);
  friend Monomial operator*(Monomial a, const Monomial& b) { return a *= b; }
};

// Sum of monomials. Kept flat; no like-term merging is attempted beyond what
// construction produces, since the solver only evaluates.
struct Posynomial {
  std::vector<Monomial> terms;

  Posynomial() = default;
  Posynomial(Monomial m) { terms.push_back(std::move(m)); }

  Posynomial& operator+=(const Posynomial& other);
  Posynomial& operator+=(Monomial m);
  Posynomial& operator*=(const Monomial& m);
  friend Posynomial operator+(Posynomial a, const Posynomial& b) { return a += b; }
  friend Posynomial operator*(Posynomial a, const Monomial& b) { return a *= b; }

  bool empty() const { return terms.empty(); }
  bool is_monomial() const { return terms.size() == 1; }
  int max_var() const;

  // Value at z; term_vals (when given) receives one entry per term. Overflow
  // saturates to +inf, which callers treat as an infeasible point.
  double eval(std::span<const double> z, std::vector<double>* term_vals = nullptr) const;

  // Log of the value via a max-shifted sum; safe for widely scaled terms.
  double log_eval(std::span<const double> z) const;

  // Best local monomial approximation at the anchor: a weighted geometric mean
  // of the terms that matches the value there and underestimates elsewhere.
  Monomial condense(std::span<const double> z) const;
};

}
