#include "sfda/constants.hpp"

#include <cmath>
#include <stdexcept>

namespace sfda {

void DataConstants::validate(double lipschitz) const {
  if (variability < 0.0 || feature_stddev < 0.0 || dissimilarity < 0.0)
    throw std::invalid_argument("data constants must be nonnegative");
  if (dissimilarity > 2.0 * lipschitz + 1e-12)
    throw std::invalid_argument("dissimilarity exceeds twice the gradient bound");
}

double feature_stddev(const Dataset& data) {
  data.validate();
  if (data.size() < 2)
    throw std::invalid_argument("feature_stddev: need at least two samples");
  const int n = data.size(), m = data.dim();
  std::vector<double> mean(m, 0.0);
  for (const auto& row : data.features) axpy(1.0, row, mean);
  for (double& v : mean) v /= n;
  double trace = 0.0;
  for (const auto& row : data.features)
    for (int j = 0; j < m; ++j) {
      const double d = row[j] - mean[j];
      trace += d * d;
    }
  return std::sqrt(trace / (n - 1));
}

double local_variability(const Dataset& data, LossKind kind, const ModelParams& at) {
  data.validate();
  const int n = data.size();
  std::vector<std::vector<double>> grads(n);
  for (int i = 0; i < n; ++i)
    grads[i] = sample_gradient(at, data.features[i], data.labels[i], kind);
  double best = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      double dx = 0.0, dg = 0.0;
      for (int j = 0; j < data.dim(); ++j) {
        const double fx = data.features[a][j] - data.features[b][j];
        const double fg = grads[a][j] - grads[b][j];
        dx += fx * fx;
        dg += fg * fg;
      }
      if (dx <= 0.0) continue;  // identical feature rows carry no ratio
      best = std::fmax(best, std::sqrt(dg / dx));
    }
  return best;
}

ConstantsReport estimate_constants(std::span<const Dataset> data, LossKind kind,
                                   int probe_count, std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("estimate_constants: no devices");
  if (probe_count < 2)
    throw std::invalid_argument("estimate_constants: need at least two probes");
  const int dim = data[0].dim();
  double total = 0.0;
  for (const auto& d : data) {
    d.validate();
    if (d.size() < 2)
      throw std::invalid_argument("estimate_constants: device with fewer than two samples");
    if (d.dim() != dim)
      throw std::invalid_argument("estimate_constants: devices disagree on dimension");
    total += d.size();
  }
  const int devices = static_cast<int>(data.size());
  std::vector<double> rho(devices);
  for (int i = 0; i < devices; ++i) rho[i] = data[i].size() / total;

  // Probe weights: the origin plus normal draws at mixed scales.
  Rng rng(substream_seed(seed, 0xC0));
  std::vector<ModelParams> probes;
  probes.reserve(probe_count);
  probes.push_back(ModelParams::zeros(dim));
  for (int p = 1; p < probe_count; ++p) {
    ModelParams w = ModelParams::zeros(dim);
    const double scale = std::exp(uniform_in(rng, std::log(0.25), std::log(2.5)));
    for (int j = 0; j < dim; ++j) w.weights[j] = scale * normal01(rng);
    probes.push_back(std::move(w));
  }

  ConstantsReport rep;
  rep.per_device.resize(devices);
  for (int i = 0; i < devices; ++i)
    rep.per_device[i].feature_stddev = feature_stddev(data[i]);

  // Per-probe device gradients feed every remaining estimate.
  std::vector<std::vector<double>> dev_grad(devices), prev_grad(devices);
  double lipschitz = 0.0, smoothness = 0.0;
  std::vector<double> max_dissim(devices, 0.0);
  for (int p = 0; p < probe_count; ++p) {
    std::vector<double> global(dim, 0.0);
    for (int i = 0; i < devices; ++i) {
      dev_grad[i] = gradient(probes[p], data[i], kind);
      axpy(rho[i], dev_grad[i], global);
      lipschitz = std::fmax(lipschitz, norm2(dev_grad[i]));
    }
    for (int i = 0; i < devices; ++i) {
      std::vector<double> diff = dev_grad[i];
      axpy(-1.0, global, diff);
      max_dissim[i] = std::fmax(max_dissim[i], norm2(diff));
    }
    if (p > 0) {
      // Smoothness from consecutive probe pairs (isotropic directions).
      double dw = 0.0;
      for (int j = 0; j < dim; ++j) {
        const double d = probes[p].weights[j] - probes[p - 1].weights[j];
        dw += d * d;
      }
      dw = std::sqrt(dw);
      if (dw > 1e-12) {
        for (int i = 0; i < devices; ++i) {
          std::vector<double> dg = dev_grad[i];
          axpy(-1.0, prev_grad[i], dg);
          smoothness = std::fmax(smoothness, norm2(dg) / dw);
        }
      }
    }
    prev_grad = dev_grad;
  }

  // Variability at a handful of probes (pairs scale quadratically in N).
  const int theta_probes = std::min(probe_count, 8);
  for (int i = 0; i < devices; ++i) {
    double theta = 0.0;
    for (int p = 0; p < theta_probes; ++p)
      theta = std::fmax(theta, local_variability(data[i], kind, probes[p]));
    rep.per_device[i].variability = theta;
    rep.per_device[i].dissimilarity = max_dissim[i];
  }

  rep.lipschitz = lipschitz;
  rep.smoothness = smoothness;
  rep.dissimilarity = 0.0;
  for (int i = 0; i < devices; ++i) {
    rep.per_device[i].validate(lipschitz);
    rep.dissimilarity += rho[i] * rep.per_device[i].dissimilarity;
  }
  return rep;
}

}
