#pragma once

#include <span>

namespace fairlab {

struct Aggregate {
  double mean = 0.0;
  /// Half-width of the two-sided 95% Student-t interval; 0 for n = 1.
  double ci_half_width = 0.0;
  std::size_t n = 0;

  double lower() const { return mean - ci_half_width; }
  double upper() const { return mean + ci_half_width; }
};

/// Sample mean and 95% CI half-width t_{0.975, n-1} * s / sqrt(n).
Aggregate aggregate(std::span<const double> values);

/// Quantile of Student's t distribution with `dof` degrees of freedom.
double student_t_quantile(double probability, double dof);

/// One-sided paired t-test of H1: mean(a - b) < 0. Returns the p-value.
/// Degenerate case (zero spread of differences): 0 if the mean difference is
/// negative, else 1.
double paired_t_test_less(std::span<const double> a, std::span<const double> b);

}  // namespace fairlab
