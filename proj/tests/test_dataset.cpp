#include <cmath>

#include "doctest.h"
#include "sfda/dataset.hpp"

using namespace sfda;

namespace {

Dataset tiny_binary() {
  Dataset d;
  d.features = {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {-1.0, 0.5}};
  d.labels = {1.0, 0.0, 1.0, 0.0};
  return d;
}

Dataset tiny_ridge() {
  Dataset d;
  d.features = {{1.0, 2.0}, {0.5, -1.0}, {2.0, 0.0}};
  d.labels = {3.0, -0.5, 1.0};
  return d;
}

// Central differences against the analytic gradient.
void check_gradient(const Dataset& d, LossKind kind, const ModelParams& w) {
  const std::vector<double> g = gradient(w, d, kind);
  const double h = 1e-6;
  for (int j = 0; j < w.dim(); ++j) {
    ModelParams hi = w, lo = w;
    hi.weights[j] += h;
    lo.weights[j] -= h;
    const double fd = (loss(hi, d, kind) - loss(lo, d, kind)) / (2 * h);
    CHECK(g[j] == doctest::Approx(fd).epsilon(1e-5));
  }
}

}  // namespace

TEST_CASE("vector helpers") {
  std::vector<double> a{1.0, 2.0, 3.0}, b{-1.0, 0.5, 2.0};
  CHECK(dot(a, b) == doctest::Approx(6.0));
  CHECK(norm2(a) == doctest::Approx(std::sqrt(14.0)));
  axpy(2.0, b, a);
  CHECK(a[0] == doctest::Approx(-1.0));
  CHECK(a[1] == doctest::Approx(3.0));
  CHECK(a[2] == doctest::Approx(7.0));
}

TEST_CASE("loss hand values") {
  Dataset d = tiny_binary();
  ModelParams w0 = ModelParams::zeros(2);
  // At w = 0 every logistic sample costs ln 2.
  CHECK(loss(w0, d, LossKind::Logistic) == doctest::Approx(std::log(2.0)));

  Dataset r = tiny_ridge();
  // Ridge at w = 0: mean of 0.5 y^2.
  const double expect = 0.5 * (9.0 + 0.25 + 1.0) / 3.0;
  CHECK(loss(w0, r, LossKind::Ridge) == doctest::Approx(expect));
}

TEST_CASE("analytic gradient matches finite differences") {
  ModelParams w{std::vector<double>{0.3, -0.7}};
  check_gradient(tiny_binary(), LossKind::Logistic, w);
  check_gradient(tiny_ridge(), LossKind::Ridge, w);
}

TEST_CASE("gradient equals mean of sample gradients") {
  Dataset d = tiny_ridge();
  ModelParams w{std::vector<double>{0.3, -0.7}};
  const std::vector<double> g = gradient(w, d, LossKind::Ridge);
  std::vector<double> acc(2, 0.0);
  for (int i = 0; i < d.size(); ++i)
    axpy(1.0 / d.size(), sample_gradient(w, d.features[i], d.labels[i], LossKind::Ridge),
         acc);
  CHECK(g[0] == doctest::Approx(acc[0]).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(acc[1]).epsilon(1e-14));
}

TEST_CASE("minibatch gradient is unbiased") {
  Dataset d = tiny_binary();
  ModelParams w{std::vector<double>{0.2, 0.4}};
  const std::vector<double> g = gradient(w, d, LossKind::Logistic);
  Rng rng(99);
  std::vector<double> acc(2, 0.0);
  const int draws = 200000;
  for (int r = 0; r < draws; ++r) {
    const auto [mg, picks] = minibatch_gradient(w, d, 2, rng, LossKind::Logistic);
    CHECK(picks.size() == 2);
    axpy(1.0 / draws, mg, acc);
  }
  CHECK(acc[0] == doctest::Approx(g[0]).epsilon(0.02));
  CHECK(acc[1] == doctest::Approx(g[1]).epsilon(0.02));
}

TEST_CASE("full-batch draw is the exact gradient and uses no randomness") {
  Dataset d = tiny_binary();
  ModelParams w{std::vector<double>{0.2, 0.4}};
  Rng rng(7);
  const Rng before = rng;
  const auto [mg, picks] = minibatch_gradient(w, d, d.size(), rng, LossKind::Logistic);
  CHECK(rng == before);  // stream untouched
  CHECK(picks.size() == static_cast<size_t>(d.size()));
  for (int i = 0; i < d.size(); ++i) CHECK(picks[i] == i);
  const std::vector<double> g = gradient(w, d, LossKind::Logistic);
  CHECK(mg[0] == g[0]);  // bit-identical, same summation order
  CHECK(mg[1] == g[1]);
}

TEST_CASE("minibatch gradient rejects bad batch sizes") {
  Dataset d = tiny_binary();
  ModelParams w = ModelParams::zeros(2);
  Rng rng(1);
  CHECK_THROWS_AS(minibatch_gradient(w, d, 0, rng, LossKind::Logistic),
                  std::invalid_argument);
  CHECK_THROWS_AS(minibatch_gradient(w, d, d.size() + 1, rng, LossKind::Logistic),
                  std::invalid_argument);
}

TEST_CASE("classification accuracy thresholds at zero") {
  Dataset d;
  d.features = {{1.0}, {-1.0}, {2.0}};
  d.labels = {1.0, 0.0, 0.0};
  ModelParams w{std::vector<double>{1.0}};
  // Scores 1, -1, 2 -> predictions 1, 0, 1; two of three match.
  CHECK(classification_accuracy(w, d) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("synthetic generator shapes and determinism") {
  const auto a = generate_synthetic(42, 3, 10, 4, 1.0);
  const auto b = generate_synthetic(42, 3, 10, 4, 1.0);
  REQUIRE(a.size() == 3);
  for (const Dataset& d : a) {
    CHECK(d.size() == 10);
    CHECK(d.dim() == 4);
    d.validate();
  }
  for (int i = 0; i < 3; ++i)
    for (int s = 0; s < 10; ++s)
      for (int j = 0; j < 4; ++j)
        CHECK(a[i].features[s][j] == b[i].features[s][j]);

  // The first devices do not change when more are requested.
  const auto wider = generate_synthetic(42, 4, 10, 4, 1.0);
  for (int s = 0; s < 10; ++s)
    CHECK(wider[2].features[s][0] == a[2].features[s][0]);
}

TEST_CASE("dataset validation catches shape problems") {
  Dataset d;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  d.features = {{1.0, 2.0}, {3.0}};
  d.labels = {0.0, 1.0};
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
}
