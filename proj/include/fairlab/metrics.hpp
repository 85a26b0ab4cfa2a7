#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace fairlab {

/// Error rate and equality-of-opportunity report for one prediction vector.
struct EvalReport {
  double error = 0.0;
  double fnr_a0 = 0.0;
  double fnr_a1 = 0.0;
  double fnr_gap = 0.0;
  /// counts[y][a]
  std::array<std::array<std::size_t, 2>, 2> counts{};
};

/// Throws UndefinedFnr if (y=1, a=0) or (y=1, a=1) is empty.
EvalReport evaluate(std::span<const std::uint8_t> predictions,
                    std::span<const std::uint8_t> labels, std::span<const std::uint8_t> attrs);

/// Misclassification fraction only; defined for any non-empty input.
double error_rate(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels);

/// Smallest width whose training error is <= tolerance. Widths must be
/// strictly increasing. Throws NotFound if no width qualifies.
std::size_t interpolation_threshold(const std::vector<std::pair<std::size_t, double>>& table,
                                    double tolerance = 0.0);

}  // namespace fairlab
