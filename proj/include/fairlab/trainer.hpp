#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "fairlab/dataset.hpp"
#include "fairlab/losses.hpp"
#include "fairlab/model.hpp"

namespace fairlab {

enum class StopCriterion { primary_val_loss, total_val_loss };

struct EarlyStopping {
  StopCriterion criterion = StopCriterion::primary_val_loss;
  /// Consecutive evaluations without improvement before stopping.
  std::size_t patience = 10;
};

struct TrainConfig {
  std::size_t total_steps = 30000;
  std::size_t batch_size = 128;
  std::size_t mindiff_batch_size = 16;
  double lambda = 0.0;
  double lr_initial = 0.01;
  double lr_decay_factor = 10.0;
  std::size_t lr_decay_every = 10000;
  double weight_decay = 0.0;
  std::optional<double> flood_level;
  std::optional<EarlyStopping> early_stopping;
  std::size_t eval_every = 250;
  KernelSpec kernel;
  std::uint64_t seed = 0;

  void validate() const;
  LossConfig loss_config() const { return {lambda, flood_level, weight_decay, kernel}; }
};

double lr_at(std::size_t step, const TrainConfig& config);

/// Sets total_steps and rescales lr_decay_every to ceil(steps / 3), keeping
/// the three learning-rate phases of the default schedule.
TrainConfig with_total_steps(TrainConfig config, std::size_t steps);

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::size_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(std::size_t n_params = 0)
      : first_moment(Vector::Zero(static_cast<Eigen::Index>(n_params))),
        second_moment(Vector::Zero(static_cast<Eigen::Index>(n_params))) {}
};

/// One bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr);

/// Row indices into the training set for one step.
struct BatchIndices {
  std::vector<std::size_t> primary;
  std::vector<std::size_t> mindiff;  // first half (y=1,a=0), second half (y=1,a=1)
};

/// Draws primary and MinDiff batches. Keeps a scratch permutation so that
/// each draw is O(batch size).
class BatchSampler {
 public:
  BatchSampler(const GroupedDataset& train, const TrainConfig& config);
  BatchIndices sample(Rng& rng);

 private:
  std::size_t n_;
  std::size_t batch_size_;
  std::size_t mindiff_batch_size_;
  bool mindiff_;
  std::vector<std::size_t> scratch_;
  std::vector<std::size_t> positives_a0_;
  std::vector<std::size_t> positives_a1_;
};

/// Primary rows uniformly without replacement (with replacement when
/// batch_size > N); MinDiff rows with replacement from each positive subgroup.
BatchIndices sample_batches(const GroupedDataset& train, const TrainConfig& config, Rng& rng);

struct TracePoint {
  std::size_t step = 0;
  double lr = 0.0;
  double train_lp = 0.0;
  double train_lm = 0.0;
  double train_lt = 0.0;
  double train_err = 0.0;
  double train_fnr_gap = 0.0;  // NaN when a positive subgroup is empty
  double val_lp = 0.0;
  double val_lt = 0.0;
  double val_err = 0.0;
  double val_fnr_gap = 0.0;
  /// Norm of the gradient of lambda * L_M on the training probe set.
  double train_lm_grad_norm = 0.0;
};

using TrainTrace = std::vector<TracePoint>;

void write_trace_csv(const TrainTrace& trace, std::ostream& out);
void save_trace_csv(const TrainTrace& trace, const std::filesystem::path& path);

struct TrainedModel {
  RandomFeatureModel model;
  TrainTrace trace;
  std::optional<std::size_t> stopped_early_at;
  /// Step of the returned parameters (the best checkpoint under early stopping).
  std::size_t checkpoint_step = 0;
  TrainConfig config;
};

/// Adam on the total objective for `total_steps` steps. Evaluates at step 0,
/// every `eval_every` steps and at the final step. With early stopping the
/// best checkpoint under the chosen validation criterion is returned.
TrainedModel train(RandomFeatureModel model, const GroupedDataset& train_data,
                   const GroupedDataset& val_data, const TrainConfig& config);

}  // namespace fairlab
