#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairlab/model.hpp"

namespace fairlab {

enum class KernelFamily { gaussian, laplace };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/// Kernel on the (0,1) output space.
///   gaussian: exp(-(x-y)^2 / (2 sigma^2))
///   laplace:  exp(-|x-y| / sigma)
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double bandwidth = 0.5;

  void validate() const;
  double operator()(double x, double y) const;
  /// d k(x, y) / dx. Zero at x == y for both families.
  double dx(double x, double y) const;
};

/// Mean binary cross-entropy. Probabilities are clamped to [1e-12, 1 - 1e-12]
/// inside the logarithms only.
double bce_loss(std::span<const double> probabilities, std::span<const std::uint8_t> labels);

/// Mean binary cross-entropy evaluated from logits (no clamping needed).
double bce_from_logits(std::span<const double> logits, std::span<const std::uint8_t> labels);

/// Biased (V-statistic) squared MMD between two samples; clamped at 0.
double mmd_squared(std::span<const double> s, std::span<const double> t, const KernelSpec& k);

struct MmdWithGradient {
  double value = 0.0;
  std::vector<double> ds;  // d MMD^2 / d s_i
  std::vector<double> dt;  // d MMD^2 / d t_j
};

MmdWithGradient mmd_squared_with_gradient(std::span<const double> s, std::span<const double> t,
                                          const KernelSpec& k);

/// Squared MMD between the outputs of the (y=1, a=0) and (y=1, a=1) rows.
/// Throws MissingSubgroup if either is empty.
double mindiff_loss(std::span<const double> outputs, std::span<const std::uint8_t> labels,
                    std::span<const std::uint8_t> attrs, const KernelSpec& k);

/// |primary - b| + b
double flood_transform(double primary, double b);

/// strength * (|w|^2 + bias^2) / 2
double weight_decay_penalty(const RandomFeatureModel& model, double strength);
HeadGradient weight_decay_gradient(const RandomFeatureModel& model, double strength);

struct LossBreakdown {
  double primary = 0.0;
  double mindiff = 0.0;
  double weight_penalty = 0.0;
  double total = 0.0;
  std::optional<double> flood_level;
  double lambda = 0.0;

  double effective_primary() const {
    return flood_level ? flood_transform(primary, *flood_level) : primary;
  }
  double recomputed_total() const {
    return effective_primary() + lambda * mindiff + weight_penalty;
  }
};

struct LossConfig {
  double lambda = 0.0;
  std::optional<double> flood_level;
  double weight_decay = 0.0;
  KernelSpec kernel;

  void validate() const;
};

/// Rows of a precomputed hidden-feature matrix together with their labels and
/// attributes. Holds references; the source arrays must outlive the batch.
class HeadBatch {
 public:
  HeadBatch() = default;
  HeadBatch(const Matrix& hidden, std::span<const std::uint8_t> labels,
            std::span<const std::uint8_t> attrs, std::vector<std::size_t> rows);

  /// Every row of the source, in order.
  static HeadBatch all(const Matrix& hidden, std::span<const std::uint8_t> labels,
                       std::span<const std::uint8_t> attrs);

  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  auto hidden_row(std::size_t k) const { return hidden_->row(static_cast<Eigen::Index>(rows_[k])); }
  std::uint8_t label(std::size_t k) const { return labels_[rows_[k]]; }
  std::uint8_t attr(std::size_t k) const { return attrs_[rows_[k]]; }
  std::size_t width() const { return hidden_ ? static_cast<std::size_t>(hidden_->cols()) : 0; }

  std::vector<double> logits(const RandomFeatureModel& model) const;
  /// Accumulates sum_k g_k * h_k into `grad` (bias gets sum_k g_k).
  void accumulate(std::span<const double> logit_grad, HeadGradient& grad) const;

 private:
  const Matrix* hidden_ = nullptr;
  std::span<const std::uint8_t> labels_;
  std::span<const std::uint8_t> attrs_;
  std::vector<std::size_t> rows_;
};

struct LossAndGradient {
  LossBreakdown breakdown;
  HeadGradient gradient;
};

/// MinDiff term alone (unweighted) with its gradient with respect to the head.
LossAndGradient mindiff_loss_and_gradient(const RandomFeatureModel& model,
                                          const HeadBatch& batch, const KernelSpec& k);

/// Total objective: flood(L_P) + lambda * L_M + weight decay, and its exact
/// gradient with respect to (w, bias). When flooding is active and L_P < b
/// the primary gradient is negated; L_P == b descends.
LossAndGradient total_loss_and_gradient(const RandomFeatureModel& model,
                                        const HeadBatch& primary_batch,
                                        const HeadBatch& mindiff_batch, const LossConfig& config);

}  // namespace fairlab
