#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sfda/random.hpp"

namespace sfda {

// Supervised sample set held by one device. Labels are 0/1 for the logistic
// model and unrestricted reals for the ridge model.
struct Dataset {
  std::vector<std::vector<double>> features;  // one row per sample
  std::vector<double> labels;

  int size() const { return static_cast<int>(features.size()); }
  int dim() const { return features.empty() ? 0 : static_cast<int>(features[0].size()); }
  void validate() const;  // throws std::invalid_argument on shape problems
};

struct ModelParams {
  std::vector<double> weights;

  int dim() const { return static_cast<int>(weights.size()); }
  static ModelParams zeros(int dim) { return ModelParams{std::vector<double>(dim, 0.0)}; }
};

enum class LossKind { Logistic, Ridge };

// Mean per-sample loss over the dataset.
double loss(const ModelParams& model, const Dataset& data, LossKind kind);

// Loss for one sample.
double sample_loss(const ModelParams& model, std::span<const double> x, double y,
                   LossKind kind);

// Exact mean gradient over the dataset.
std::vector<double> gradient(const ModelParams& model, const Dataset& data, LossKind kind);

// Gradient of one sample's loss.
std::vector<double> sample_gradient(const ModelParams& model, std::span<const double> x,
                                    double y, LossKind kind);

// Mean gradient over `batch` samples drawn uniformly without replacement.
// A fresh draw every call; the chosen indices are returned for inspection.
std::pair<std::vector<double>, std::vector<int>> minibatch_gradient(
    const ModelParams& model, const Dataset& data, int batch, Rng& rng, LossKind kind);

// Fraction of samples whose thresholded prediction matches the label
// (logistic model, threshold 1/2).
double classification_accuracy(const ModelParams& model, const Dataset& data);

// Per-device synthetic binary classification data. Devices share base class
// centroids; `heterogeneity` scales per-device, per-class centroid shifts so
// larger values increase the gradient dissimilarity across devices.
std::vector<Dataset> generate_synthetic(std::uint64_t seed, int devices,
                                        int per_device, int dim, double heterogeneity);

// Basic vector helpers used throughout.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void axpy(double a, std::span<const double> x, std::span<double> y);  // y += a*x

}
