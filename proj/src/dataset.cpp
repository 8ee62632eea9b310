#include "sfda/dataset.hpp"

#include <cmath>
#include <stdexcept>

namespace sfda {

void Dataset::validate() const {
  if (features.size() != labels.size())
    throw std::invalid_argument("dataset: feature and label counts differ");
  if (features.empty()) throw std::invalid_argument("dataset: empty");
  const std::size_t dim = features[0].size();
  if (dim == 0) throw std::invalid_argument("dataset: zero-dimensional features");
  for (const auto& row : features)
    if (row.size() != dim) throw std::invalid_argument("dataset: ragged feature rows");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t j = 0; j < x.size(); ++j) y[j] += a * x[j];
}

namespace {

double logistic_sample_loss(double z, double y) {
  // ln(1 + e^z) - y z, evaluated in the overflow-safe form.
  return std::fmax(z, 0.0) - y * z + std::log1p(std::exp(-std::fabs(z)));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double sample_loss(const ModelParams& model, std::span<const double> x, double y,
                   LossKind kind) {
  const double z = dot(model.weights, x);
  if (kind == LossKind::Logistic) return logistic_sample_loss(z, y);
  const double r = z - y;
  return 0.5 * r * r;
}

std::vector<double> sample_gradient(const ModelParams& model, std::span<const double> x,
                                    double y, LossKind kind) {
  const double z = dot(model.weights, x);
  const double c = (kind == LossKind::Logistic) ? sigmoid(z) - y : z - y;
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) g[j] = c * x[j];
  return g;
}

double loss(const ModelParams& model, const Dataset& data, LossKind kind) {
  data.validate();
  if (model.dim() != data.dim())
    throw std::invalid_argument("loss: model/data dimension mismatch");
  double s = 0.0;
  for (int i = 0; i < data.size(); ++i)
    s += sample_loss(model, data.features[i], data.labels[i], kind);
  return s / data.size();
}

std::vector<double> gradient(const ModelParams& model, const Dataset& data, LossKind kind) {
  data.validate();
  if (model.dim() != data.dim())
    throw std::invalid_argument("gradient: model/data dimension mismatch");
  std::vector<double> g(data.dim(), 0.0);
  for (int i = 0; i < data.size(); ++i) {
    const double z = dot(model.weights, data.features[i]);
    const double c = (kind == LossKind::Logistic) ? sigmoid(z) - data.labels[i]
                                                  : z - data.labels[i];
    axpy(c, data.features[i], g);
  }
  const double inv = 1.0 / data.size();
  for (double& v : g) v *= inv;
  return g;
}

std::pair<std::vector<double>, std::vector<int>> minibatch_gradient(
    const ModelParams& model, const Dataset& data, int batch, Rng& rng, LossKind kind) {
  data.validate();
  if (batch < 1 || batch > data.size())
    throw std::invalid_argument("minibatch_gradient: batch outside [1, N]");
  if (model.dim() != data.dim())
    throw std::invalid_argument("minibatch_gradient: model/data dimension mismatch");
  if (batch == data.size()) {
    // Full batch: the exact mean gradient, summed in natural order so it is
    // bit-identical to gradient(); no randomness is consumed.
    std::vector<int> picks(data.size());
    for (int i = 0; i < data.size(); ++i) picks[i] = i;
    return {gradient(model, data, kind), std::move(picks)};
  }
  std::vector<int> picks = sample_without_replacement(rng, data.size(), batch);
  std::vector<double> g(data.dim(), 0.0);
  for (int i : picks) {
    const double z = dot(model.weights, data.features[i]);
    const double c = (kind == LossKind::Logistic) ? sigmoid(z) - data.labels[i]
                                                  : z - data.labels[i];
    axpy(c, data.features[i], g);
  }
  const double inv = 1.0 / batch;
  for (double& v : g) v *= inv;
  return {std::move(g), std::move(picks)};
}

double classification_accuracy(const ModelParams& model, const Dataset& data) {
  data.validate();
  int hits = 0;
  for (int i = 0; i < data.size(); ++i) {
    const double z = dot(model.weights, data.features[i]);
    const double pred = z >= 0.0 ? 1.0 : 0.0;
    if (pred == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / data.size();
}

std::vector<Dataset> generate_synthetic(std::uint64_t seed, int devices, int per_device,
                                        int dim, double heterogeneity) {
  if (devices < 1 || per_device < 1 || dim < 1)
    throw std::invalid_argument("generate_synthetic: counts must be positive");
  if (heterogeneity < 0.0)
    throw std::invalid_argument("generate_synthetic: heterogeneity must be >= 0");

  // Shared class centroids, one draw per run.
  Rng base(substream_seed(seed, 0));
  std::vector<double> mu0(dim), mu1(dim);
  const double spread = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int j = 0; j < dim; ++j) {
    const double dir = normal01(base);
    mu0[j] = -spread + 0.25 * spread * dir;
    mu1[j] = +spread + 0.25 * spread * dir;
  }

  std::vector<Dataset> out(devices);
  for (int i = 0; i < devices; ++i) {
    Rng rng(substream_seed(seed, 1 + i));
    // Device- and class-specific centroid displacement, scaled by the knob.
    std::vector<double> shift0(dim), shift1(dim);
    for (int j = 0; j < dim; ++j) {
      shift0[j] = heterogeneity * spread * 1.5 * normal01(rng);
      shift1[j] = heterogeneity * spread * 1.5 * normal01(rng);
    }
    Dataset& d = out[i];
    d.features.resize(per_device);
    d.labels.resize(per_device);
    for (int s = 0; s < per_device; ++s) {
      const int y = s % 2;  // balanced classes
      const auto& mu = (y == 0) ? mu0 : mu1;
      const auto& sh = (y == 0) ? shift0 : shift1;
      auto& row = d.features[s];
      row.resize(dim);
      for (int j = 0; j < dim; ++j) row[j] = mu[j] + sh[j] + 0.8 * spread * normal01(rng);
      d.labels[s] = y;
    }
  }
  return out;
}

}
