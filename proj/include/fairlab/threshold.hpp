#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <vector>

namespace fairlab {

struct ThresholdPair {
  double tau_a0 = 0.5;
  double tau_a1 = 0.5;
};

/// Scores with the labels and attributes they were produced for.
struct ScoredSplit {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> attrs;

  void validate() const;
};

/// Per-group thresholds chosen on validation data under an FNR-gap bound.
struct ThresholdSelection {
  ThresholdPair thresholds;
  std::size_t grid_index_a0 = 0;
  std::size_t grid_index_a1 = 0;
  double val_error = 0.0;
  double val_fnr_gap = 0.0;
  double constraint = 0.0;
};

struct ConstrainedResult {
  ThresholdPair thresholds;
  double val_error = 0.0;
  double val_fnr_gap = 0.0;
  double test_error = 0.0;
  double test_fnr_gap = 0.0;
  double constraint = 0.0;
  bool feasible = true;
};

/// Grid point k of a g-point grid on [0, 1]: k / (g - 1).
double grid_value(std::size_t k, std::size_t grid_resolution);

/// Error and FNR gap of the rule "predict 1 iff score >= tau_{a}".
struct GroupRuleMetrics {
  double error = 0.0;
  double fnr_gap = 0.0;
};
GroupRuleMetrics apply_thresholds(const ScoredSplit& split, const ThresholdPair& thresholds);

/// Exhaustive search over the g x g grid for the pair with the lowest
/// validation error among pairs whose FNR gap is <= thr (+1e-12). Ties break
/// on smaller gap, then lexicographically smaller (tau_a0, tau_a1).
ThresholdSelection threshold_correct(const ScoredSplit& val, double thr,
                                     std::size_t grid_resolution = 201);

/// Chooses thresholds on `val`, then reports them on `test` without re-tuning.
ConstrainedResult constrained_test_error(const ScoredSplit& val, const ScoredSplit& test,
                                         double thr, std::size_t grid_resolution = 201);

/// One constrained result per constraint value.
std::vector<ConstrainedResult> pareto_front(const ScoredSplit& val, const ScoredSplit& test,
                                            std::span<const double> thr_list,
                                            std::size_t grid_resolution = 201);

void write_pareto_csv(const std::vector<ConstrainedResult>& front, std::ostream& out);

/// Scores file: header `split,score,y,a` with split in {val, test}.
struct ScoresFile {
  ScoredSplit val;
  ScoredSplit test;
};
ScoresFile load_scores_csv(const std::filesystem::path& path);
void save_scores_csv(const ScoresFile& scores, const std::filesystem::path& path);

}  // namespace fairlab
