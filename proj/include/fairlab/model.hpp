#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fairlab/dataset.hpp"

namespace fairlab {

/// Numerically stable logistic function.
double sigmoid(double z);

/// Fixed random ReLU projection followed by a trainable logistic head:
/// p(x) = sigmoid(w . ReLU(U x) + bias).
///
/// U is drawn once from Normal(0, 1/d) and never changes; only `w` and `bias`
/// are parameters. The head starts at zero so an untrained model outputs 0.5
/// everywhere.
class RandomFeatureModel {
 public:
  RandomFeatureModel(std::size_t width, std::size_t input_dim, std::uint64_t seed);

  std::size_t width() const { return static_cast<std::size_t>(projection_.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(projection_.cols()); }
  std::uint64_t seed() const { return seed_; }

  const Matrix& projection() const { return projection_; }

  Vector& head_weights() { return weights_; }
  const Vector& head_weights() const { return weights_; }
  double& head_bias() { return bias_; }
  double head_bias() const { return bias_; }

  /// ReLU(X U^T), one row per input row.
  Matrix hidden(const Matrix& features) const;

  /// w . h + bias for every row of an already-projected hidden matrix.
  Vector logits_from_hidden(const Matrix& hidden) const;

 private:
  Matrix projection_;
  Vector weights_;
  double bias_ = 0.0;
  std::uint64_t seed_;
};

RandomFeatureModel init_model(std::size_t width, std::size_t input_dim, std::uint64_t seed);

struct ModelOutputs {
  Vector probabilities;
  Vector logits;
  Matrix hidden;
};

ModelOutputs forward(const RandomFeatureModel& model, const Matrix& features);

/// 1 where p >= tau, else 0.
std::vector<std::uint8_t> predict(std::span<const double> probabilities, double tau);
std::vector<std::uint8_t> predict(const RandomFeatureModel& model, const Matrix& features,
                                  double tau);

struct HeadGradient {
  Vector weights;
  double bias = 0.0;
};

/// Chain rule from dL/dp through the sigmoid and the linear head.
HeadGradient head_gradient(const RandomFeatureModel& model, const Matrix& features,
                           std::span<const double> upstream);

/// Same, but starting from dL/dz (z = logit) on precomputed hidden rows.
HeadGradient head_gradient_from_logits(const Matrix& hidden, std::span<const double> logit_grad);

/// JSON checkpoint: {format, version, d, m, seed, w, bias}. U is regenerated
/// from the seed on load.
void save_model(const RandomFeatureModel& model, const std::filesystem::path& path);
RandomFeatureModel load_model(const std::filesystem::path& path);

}  // namespace fairlab
