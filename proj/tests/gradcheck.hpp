#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "fairlab/losses.hpp"
#include "fairlab/model.hpp"

namespace fairlab::test {

/// A random head, hidden matrix and batches for probing total-loss gradients.
struct GradProbe {
  RandomFeatureModel model{1, 1, 0};
  Matrix hidden;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> attrs;
  std::vector<std::size_t> primary_rows;
  std::vector<std::size_t> mindiff_rows;
  LossConfig config;
};

inline GradProbe make_probe(std::uint64_t seed, double lambda, bool flood, bool decay,
                            KernelFamily family = KernelFamily::gaussian) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> width_dist(2, 12);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t m = width_dist(rng);
  const std::size_t n = 24;
  GradProbe p;
  p.model = init_model(m, 3, seed);
  for (Eigen::Index k = 0; k < p.model.head_weights().size(); ++k) p.model.head_weights()(k) = 0.6 * g(rng);
  p.model.head_bias() = 0.3 * g(rng);
  p.hidden = Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < p.hidden.rows(); ++i) {
    for (Eigen::Index k = 0; k < p.hidden.cols(); ++k) p.hidden(i, k) = std::max(0.0, g(rng));
  }
  // rows 0..5 are (y=1, a=0), rows 6..11 are (y=1, a=1), the rest are random
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    p.labels.push_back(i < 12 ? 1 : static_cast<std::uint8_t>(coin(rng)));
    p.attrs.push_back(i < 6 ? 0 : i < 12 ? 1 : static_cast<std::uint8_t>(coin(rng)));
  }
  std::uniform_int_distribution<std::size_t> row(0, n - 1);
  for (int k = 0; k < 10; ++k) p.primary_rows.push_back(row(rng));
  std::uniform_int_distribution<std::size_t> pos0(0, 5), pos1(6, 11);
  for (int k = 0; k < 4; ++k) p.mindiff_rows.push_back(pos0(rng));
  for (int k = 0; k < 4; ++k) p.mindiff_rows.push_back(pos1(rng));

  p.config.lambda = lambda;
  p.config.kernel.family = family;
  p.config.kernel.bandwidth = family == KernelFamily::gaussian ? 0.5 : 0.7;
  if (decay) p.config.weight_decay = 0.05 + 0.5 * std::abs(g(rng));
  if (flood) {
    // flood level on either side of the current primary loss
    const HeadBatch primary(p.hidden, p.labels, p.attrs, p.primary_rows);
    const auto z = primary.logits(p.model);
    std::vector<std::uint8_t> y;
    for (std::size_t k = 0; k < primary.size(); ++k) y.push_back(primary.label(k));
    const double lp = bce_from_logits(z, y);
    p.config.flood_level = coin(rng) ? 0.5 * lp : 1.5 * lp;
  }
  return p;
}

struct GradCheck {
  double relative_error = 0.0;
  double loss = 0.0;
  double total_recompute_error = 0.0;
};

/// Relative error ||fd - analytic|| / max(||analytic||, ||fd||) with central differences.
inline GradCheck check_gradient(const GradProbe& p, double h = 1e-6) {
  const HeadBatch primary(p.hidden, p.labels, p.attrs, p.primary_rows);
  const HeadBatch mindiff(p.hidden, p.labels, p.attrs, p.mindiff_rows);
  const auto base = total_loss_and_gradient(p.model, primary, mindiff, p.config);
  const Eigen::Index m = p.model.head_weights().size();
  Vector analytic(m + 1), numeric(m + 1);
  analytic.head(m) = base.gradient.weights;
  analytic(m) = base.gradient.bias;
  for (Eigen::Index k = 0; k <= m; ++k) {
    auto plus = p.model, minus = p.model;
    if (k < m) {
      plus.head_weights()(k) += h;
      minus.head_weights()(k) -= h;
    } else {
      plus.head_bias() += h;
      minus.head_bias() -= h;
    }
    const double fp = total_loss_and_gradient(plus, primary, mindiff, p.config).breakdown.total;
    const double fm = total_loss_and_gradient(minus, primary, mindiff, p.config).breakdown.total;
    numeric(k) = (fp - fm) / (2 * h);
  }
  GradCheck out;
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-12});
  out.relative_error = (analytic - numeric).norm() / scale;
  out.loss = base.breakdown.total;
  out.total_recompute_error = std::abs(base.breakdown.total - base.breakdown.recomputed_total());
  return out;
}

}  // namespace fairlab::test
