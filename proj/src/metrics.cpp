#include "fairlab/metrics.hpp"

#include <cmath>
#include <string>

#include "fairlab/error.hpp"

namespace fairlab {

double error_rate(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels) {
  if (predictions.size() != labels.size()) {
    throw DimensionMismatch("metrics: predictions and labels differ in length");
  }
  if (predictions.empty()) throw InvalidArgument("metrics: empty input");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += (predictions[i] != labels[i]);
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

EvalReport evaluate(std::span<const std::uint8_t> predictions,
                    std::span<const std::uint8_t> labels, std::span<const std::uint8_t> attrs) {
  if (predictions.size() != labels.size() || labels.size() != attrs.size()) {
    throw DimensionMismatch("metrics: predictions, labels and attrs differ in length");
  }
  EvalReport r;
  r.error = error_rate(predictions, labels);
  std::array<std::size_t, 2> false_neg{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++r.counts[labels[i]][attrs[i]];
    if (labels[i] == 1 && predictions[i] == 0) ++false_neg[attrs[i]];
  }
  for (int a = 0; a < 2; ++a) {
    if (r.counts[1][a] == 0) {
      throw UndefinedFnr("metrics: no positive examples with a=" + std::to_string(a));
    }
  }
  r.fnr_a0 = static_cast<double>(false_neg[0]) / static_cast<double>(r.counts[1][0]);
  r.fnr_a1 = static_cast<double>(false_neg[1]) / static_cast<double>(r.counts[1][1]);
  r.fnr_gap = std::abs(r.fnr_a0 - r.fnr_a1);
  return r;
}

std::size_t interpolation_threshold(const std::vector<std::pair<std::size_t, double>>& table,
                                    double tolerance) {
  if (table.empty()) throw InvalidArgument("interpolation threshold: empty table");
  for (std::size_t i = 1; i < table.size(); ++i) {
    if (table[i].first <= table[i - 1].first) {
      throw InvalidArgument("interpolation threshold: widths must be strictly increasing");
    }
  }
  for (const auto& [width, err] : table) {
    if (err <= tolerance) return width;
  }
  throw NotFound("interpolation threshold: no width reaches training error <= tolerance");
}

}  // namespace fairlab
