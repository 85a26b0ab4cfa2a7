#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "fairlab/dataset.hpp"
#include "fairlab/stats.hpp"
#include "fairlab/trainer.hpp"

namespace fairlab {

enum class RegularizerKind { none, weight_decay, early_stopping, flooding, batch_size };

/// One regularization variant applied on top of the base training config.
struct Regularizer {
  RegularizerKind kind = RegularizerKind::none;
  /// Strength for weight decay, flood level for flooding, batch size for
  /// batch sizing; unused otherwise.
  double value = 0.0;
  StopCriterion criterion = StopCriterion::primary_val_loss;

  /// Canonical label: none, wd=<s>, es(LP), es(LT), fl=<b>, bs=<n>.
  std::string name() const;
  static Regularizer parse(const std::string& label);
  TrainConfig apply(TrainConfig base) const;
};

struct SweepConfig {
  std::string name = "custom";
  SpuriousSpec data;
  SplitSpec split;
  std::vector<std::size_t> widths;
  std::vector<double> lambdas{0.0, 0.5, 1.0, 1.5};
  std::vector<Regularizer> regularizers{Regularizer{}};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  TrainConfig base;
  std::vector<double> thr_values{0.1};
  std::size_t grid_resolution = 201;
  std::uint64_t master_seed = 0;
  /// Worker threads; 0 means the hardware concurrency. FAIRLAB_THREADS caps either.
  std::size_t threads = 0;
  bool keep_traces = false;

  void validate() const;
};

/// Model-init and batch-sampling seeds for one run, mixed from the master
/// seed, the cell coordinates and the replicate seed value. Every cell draws
/// independently; reordering the seed list does not change any run.
struct RunSeeds {
  std::uint64_t init = 0;
  std::uint64_t sampling = 0;
};
RunSeeds derive_run_seeds(std::uint64_t master_seed, std::size_t width, double lambda,
                          const std::string& regularizer, std::uint64_t seed);

struct RunRecord {
  std::size_t width = 0;
  double lambda = 0.0;
  std::string regularizer;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;
  /// Metric name -> value, in a fixed order.
  std::vector<std::pair<std::string, double>> metrics;
  TrainTrace trace;

  double metric(const std::string& name) const;
};

struct CellSummary {
  std::size_t width = 0;
  double lambda = 0.0;
  std::string regularizer;
  std::vector<std::pair<std::string, Aggregate>> metrics;
  std::size_t n_runs = 0;
  std::size_t n_failed = 0;

  const Aggregate& metric(const std::string& name) const;
};

struct SweepResult {
  std::vector<RunRecord> runs;
  std::vector<CellSummary> cells;

  /// Runs of one cell, in seed-list order.
  std::vector<const RunRecord*> cell_runs(std::size_t width, double lambda,
                                          const std::string& regularizer) const;
  const CellSummary& cell(std::size_t width, double lambda, const std::string& regularizer) const;
};

/// Metric name for the constrained test / validation error at constraint thr.
std::string constrained_test_metric(double thr);
std::string constrained_val_metric(double thr);
std::string constrained_test_gap_metric(double thr);

/// Trains and evaluates a single (width, lambda, regularizer, seed) run on
/// prepared splits. Never throws for training failures; they are recorded.
RunRecord run_single(const SweepConfig& config, const DatasetSplits& data, std::size_t width,
                     double lambda, const Regularizer& regularizer, std::uint64_t seed);

SweepResult run_sweep(const SweepConfig& config);

void write_results_csv(const SweepResult& result, std::ostream& out);
void write_runs_csv(const SweepResult& result, std::ostream& out);

/// Synthetic fixture used by every preset: 4,000 rows, d = 64,
/// majority_fraction 0.95, positive_fraction 0.25.
SpuriousSpec standard_fixture();
SplitSpec standard_split();
/// Training schedule scaled down for desk-size runs.
TrainConfig desk_train_config();

std::vector<std::string> preset_names();
SweepConfig preset(const std::string& name);

}  // namespace fairlab
