#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sfda/posynomial.hpp"

using namespace sfda;

namespace {

std::vector<double> logs(std::initializer_list<double> values) {
  std::vector<double> z;
  for (double v : values) z.push_back(std::log(v));
  return z;
}

}  // namespace

TEST_CASE("monomial evaluation and algebra") {
  const Monomial m = Monomial::var(0, 2.0, 3.0);  // 3 x^2
  CHECK(std::exp(m.log_at(logs({5.0, 1.0}))) == doctest::Approx(75.0));
  CHECK(m.exponent_of(0) == 2.0);
  CHECK(m.exponent_of(1) == 0.0);

  Monomial p = Monomial::var(0) * Monomial::var(1, -1.0, 0.5);  // 0.5 x / y
  CHECK(std::exp(p.log_at(logs({4.0, 2.0}))) == doctest::Approx(1.0));
  p *= Monomial::var(1);  // cancels the y exponent entirely
  CHECK(p.exponent_of(1) == 0.0);
  CHECK(p.powers.size() == 1);

  Monomial q = Monomial::constant(2.0);
  q.set_power(3, 1.5);
  q.set_power(1, 2.0);
  CHECK(q.powers.front().first == 1);  // kept sorted
  q.set_power(1, 0.0);
  CHECK(q.powers.size() == 1);
}

TEST_CASE("posynomial evaluation") {
  Posynomial p;
  p += Monomial::var(0);                 // x
  p += Monomial::var(1, 2.0);            // y^2
  p += Monomial::constant(4.0);          // 4
  const auto z = logs({2.0, 3.0});
  std::vector<double> parts;
  CHECK(p.eval(z, &parts) == doctest::Approx(15.0));
  REQUIRE(parts.size() == 3);
  CHECK(parts[0] == doctest::Approx(2.0));
  CHECK(parts[1] == doctest::Approx(9.0));
  CHECK(parts[2] == doctest::Approx(4.0));
  CHECK(p.log_eval(z) == doctest::Approx(std::log(15.0)));
  CHECK(p.max_var() == 1);
  CHECK_FALSE(p.is_monomial());
  CHECK(Posynomial{}.empty());
}

TEST_CASE("evaluation saturates instead of overflowing") {
  Posynomial p(Monomial::var(0));
  const std::vector<double> z = {800.0};  // e^800 is far past double range
  CHECK(p.eval(z) == std::numeric_limits<double>::infinity());
  // The log form stays finite and exact.
  CHECK(p.log_eval(z) == doctest::Approx(800.0));
}

TEST_CASE("log form is stable for widely scaled terms") {
  Posynomial p;
  p += Monomial::var(0);
  p += Monomial::var(1);
  const std::vector<double> z = {500.0, 500.0 + std::log(2.0)};
  // x + y = e^500 (1 + 2); direct eval would overflow nothing here but the
  // shifted sum must match log(3) + 500 exactly.
  CHECK(p.log_eval(z) == doctest::Approx(500.0 + std::log(3.0)));
}

TEST_CASE("condensing x + y at equal values gives the geometric mean") {
  Posynomial p;
  p += Monomial::var(0);
  p += Monomial::var(1);
  const Monomial m = p.condense(logs({1.0, 1.0}));
  CHECK(m.coef == doctest::Approx(2.0));
  CHECK(m.exponent_of(0) == doctest::Approx(0.5));
  CHECK(m.exponent_of(1) == doctest::Approx(0.5));
  // 2 sqrt(xy) at x = 4, y = 9 is 12.
  CHECK(std::exp(m.log_at(logs({4.0, 9.0}))) == doctest::Approx(12.0));
}

TEST_CASE("condensation touches at the anchor and stays below elsewhere") {
  Posynomial p;
  p += Monomial::var(0, 2.0, 3.0);       // 3 x^2
  p += Monomial::var(1, -1.0, 5.0);      // 5 / y
  p += Monomial::constant(0.25);
  const auto anchor = logs({0.7, 2.0});
  const Monomial m = p.condense(anchor);

  CHECK(std::exp(m.log_at(anchor)) == doctest::Approx(p.eval(anchor)).epsilon(1e-12));
  for (double x : {0.1, 0.5, 1.0, 3.0})
    for (double y : {0.2, 1.0, 4.0, 9.0}) {
      const auto z = logs({x, y});
      CHECK(std::exp(m.log_at(z)) <= p.eval(z) * (1.0 + 1e-12));
    }
}

TEST_CASE("condense rejects empty and overflowing input") {
  CHECK_THROWS_AS(Posynomial{}.condense(logs({1.0})), std::invalid_argument);
  Posynomial p(Monomial::var(0));
  const std::vector<double> z = {std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(p.condense(z), std::invalid_argument);
}

TEST_CASE("out of range variable index is reported") {
  const Monomial m = Monomial::var(5);
  const std::vector<double> z = {0.0, 0.0};
  CHECK_THROWS_AS(m.log_at(z), std::out_of_range);
}
