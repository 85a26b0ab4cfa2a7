#include "fairlab/trainer.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "fairlab/error.hpp"
#include "fairlab/metrics.hpp"

namespace fairlab {

void TrainConfig::validate() const {
  if (total_steps < 1) throw InvalidArgument("train config: total_steps must be >= 1");
  if (batch_size < 1) throw InvalidArgument("train config: batch_size must be >= 1");
  if (lambda > 0.0 && mindiff_batch_size < 1) {
    throw InvalidArgument("train config: mindiff_batch_size must be >= 1 when lambda > 0");
  }
  if (!(lr_initial > 0.0)) throw InvalidArgument("train config: lr_initial must be > 0");
  if (!(lr_decay_factor > 1.0)) throw InvalidArgument("train config: lr_decay_factor must be > 1");
  if (lr_decay_every < 1) throw InvalidArgument("train config: lr_decay_every must be >= 1");
  if (eval_every < 1 || eval_every > total_steps) {
    throw InvalidArgument("train config: eval_every must lie in [1, total_steps]");
  }
  if (early_stopping && early_stopping->patience < 1) {
    throw InvalidArgument("train config: early-stopping patience must be >= 1");
  }
  loss_config().validate();
}

double lr_at(std::size_t step, const TrainConfig& config) {
  const auto drops = static_cast<double>(step / config.lr_decay_every);
  return config.lr_initial / std::pow(config.lr_decay_factor, drops);
}

TrainConfig with_total_steps(TrainConfig config, std::size_t steps) {
  if (steps == 0) throw InvalidArgument("train config: total_steps must be >= 1");
  config.total_steps = steps;
  config.lr_decay_every = std::max<std::size_t>(1, (steps + 2) / 3);
  return config;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr) {
  const auto n = params.size();
  if (grads.size() != n || static_cast<std::size_t>(state.first_moment.size()) != n ||
      static_cast<std::size_t>(state.second_moment.size()) != n) {
    throw DimensionMismatch("adam: parameters, gradients and moments must be conformal");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    double& m = state.first_moment(k);
    double& v = state.second_moment(k);
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

BatchSampler::BatchSampler(const GroupedDataset& train, const TrainConfig& config)
    : n_(train.size()),
      batch_size_(config.batch_size),
      mindiff_batch_size_(config.mindiff_batch_size),
      mindiff_(config.lambda > 0.0),
      scratch_(train.size()) {
  if (n_ == 0) throw InvalidArgument("sampler: empty training set");
  for (std::size_t i = 0; i < n_; ++i) {
    scratch_[i] = i;
    if (train.labels[i] == 1) (train.attrs[i] == 0 ? positives_a0_ : positives_a1_).push_back(i);
  }
  if (mindiff_) {
    if (positives_a0_.empty()) throw MissingSubgroup("sampler: no (y=1, a=0) training rows");
    if (positives_a1_.empty()) throw MissingSubgroup("sampler: no (y=1, a=1) training rows");
  }
}

BatchIndices BatchSampler::sample(Rng& rng) {
  BatchIndices out;
  out.primary.resize(batch_size_);
  if (batch_size_ <= n_) {
    for (std::size_t i = 0; i < batch_size_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n_ - 1);
      std::swap(scratch_[i], scratch_[pick(rng)]);
      out.primary[i] = scratch_[i];
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
    for (auto& r : out.primary) r = pick(rng);
  }
  if (mindiff_) {
    out.mindiff.reserve(2 * mindiff_batch_size_);
    for (const auto* group : {&positives_a0_, &positives_a1_}) {
      std::uniform_int_distribution<std::size_t> pick(0, group->size() - 1);
      for (std::size_t k = 0; k < mindiff_batch_size_; ++k) out.mindiff.push_back((*group)[pick(rng)]);
    }
  }
  return out;
}

BatchIndices sample_batches(const GroupedDataset& train, const TrainConfig& config, Rng& rng) {
  BatchSampler sampler(train, config);
  return sampler.sample(rng);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ProbeResult {
  double lp = 0.0;
  double lm = 0.0;
  double lt = 0.0;
  double err = 0.0;
  double gap = kNaN;
  double lm_grad_norm = 0.0;
};

bool has_both_positive_groups(const GroupedDataset& data) {
  return data.count(1, 0) > 0 && data.count(1, 1) > 0;
}

ProbeResult probe(const RandomFeatureModel& model, const Matrix& hidden, const GroupedDataset& data,
                  const LossConfig& loss, bool with_lm_gradient) {
  ProbeResult r;
  const Vector z = model.logits_from_hidden(hidden);
  const std::span<const double> zs(z.data(), static_cast<std::size_t>(z.size()));
  r.lp = bce_from_logits(zs, data.labels);

  std::vector<double> p(zs.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(zs[i]);
  const auto pred = predict(p, 0.5);
  r.err = error_rate(pred, data.labels);

  if (has_both_positive_groups(data)) {
    r.gap = evaluate(pred, data.labels, data.attrs).fnr_gap;
    if (with_lm_gradient) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.labels[i] == 1) rows.push_back(i);
      }
      const HeadBatch positives(hidden, data.labels, data.attrs, std::move(rows));
      const auto lm = mindiff_loss_and_gradient(model, positives, loss.kernel);
      r.lm = lm.breakdown.mindiff;
      const double b = lm.gradient.bias;
      r.lm_grad_norm = loss.lambda * std::sqrt(lm.gradient.weights.squaredNorm() + b * b);
    } else {
      r.lm = mindiff_loss(p, data.labels, data.attrs, loss.kernel);
    }
  }

  LossBreakdown br;
  br.primary = r.lp;
  br.mindiff = r.lm;
  br.lambda = loss.lambda;
  br.flood_level = loss.flood_level;
  br.weight_penalty = loss.weight_decay > 0.0 ? weight_decay_penalty(model, loss.weight_decay) : 0.0;
  r.lt = br.recomputed_total();
  return r;
}

}  // namespace

TrainedModel train(RandomFeatureModel model, const GroupedDataset& train_data,
                   const GroupedDataset& val_data, const TrainConfig& config) {
  config.validate();
  train_data.validate();
  val_data.validate();
  if (train_data.dim() != model.input_dim() || val_data.dim() != model.input_dim()) {
    throw DimensionMismatch("train: data dimension does not match model input dimension");
  }
  if (val_data.size() == 0) throw InvalidArgument("train: empty validation set");

  const LossConfig loss = config.loss_config();
  const Matrix train_hidden = model.hidden(train_data.features);
  const Matrix val_hidden = model.hidden(val_data.features);
  const std::size_t m = model.width();

  BatchSampler sampler(train_data, config);
  Rng rng(config.seed);
  AdamState adam(m + 1);
  std::vector<double> params(m + 1, 0.0);
  std::vector<double> grads(m + 1, 0.0);
  auto pull = [&] {
    for (std::size_t i = 0; i < m; ++i) params[i] = model.head_weights()(static_cast<Eigen::Index>(i));
    params[m] = model.head_bias();
  };
  auto push = [&] {
    for (std::size_t i = 0; i < m; ++i) model.head_weights()(static_cast<Eigen::Index>(i)) = params[i];
    model.head_bias() = params[m];
  };
  pull();

  TrainedModel out{model, {}, std::nullopt, 0, config};
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const bool lm_grad = config.lambda > 0.0;

  // Returns true when early stopping fires.
  auto evaluate_at = [&](std::size_t step) {
    const auto tr = probe(model, train_hidden, train_data, loss, lm_grad);
    const auto va = probe(model, val_hidden, val_data, loss, false);
    TracePoint pt;
    pt.step = step;
    pt.lr = lr_at(step < config.total_steps ? step : config.total_steps - 1, config);
    pt.train_lp = tr.lp;
    pt.train_lm = tr.lm;
    pt.train_lt = tr.lt;
    pt.train_err = tr.err;
    pt.train_fnr_gap = tr.gap;
    pt.val_lp = va.lp;
    pt.val_lt = va.lt;
    pt.val_err = va.err;
    pt.val_fnr_gap = va.gap;
    pt.train_lm_grad_norm = tr.lm_grad_norm;
    if (!std::isfinite(tr.lt) || !std::isfinite(va.lt)) throw NonFiniteLoss(static_cast<long>(step));
    out.trace.push_back(pt);

    if (!config.early_stopping) return false;
    const double value =
        config.early_stopping->criterion == StopCriterion::primary_val_loss ? va.lp : va.lt;
    if (value < best) {
      best = value;
      since_best = 0;
      out.model = model;
      out.checkpoint_step = step;
      return false;
    }
    return ++since_best >= config.early_stopping->patience;
  };

  std::size_t step = 0;
  bool stopped = false;
  for (; step < config.total_steps; ++step) {
    if (step % config.eval_every == 0 && evaluate_at(step)) {
      stopped = true;
      break;
    }
    const auto idx = sampler.sample(rng);
    const HeadBatch primary(train_hidden, train_data.labels, train_data.attrs, idx.primary);
    const HeadBatch mindiff = idx.mindiff.empty()
                                  ? HeadBatch()
                                  : HeadBatch(train_hidden, train_data.labels, train_data.attrs,
                                              idx.mindiff);
    const auto lg = total_loss_and_gradient(model, primary, mindiff, loss);
    if (!std::isfinite(lg.breakdown.total)) throw NonFiniteLoss(static_cast<long>(step));
    for (std::size_t i = 0; i < m; ++i) grads[i] = lg.gradient.weights(static_cast<Eigen::Index>(i));
    grads[m] = lg.gradient.bias;
    adam_step(params, grads, adam, lr_at(step, config));
    push();
  }
  if (!stopped) stopped = evaluate_at(step);

  if (stopped) out.stopped_early_at = out.trace.back().step;
  if (!config.early_stopping) {
    out.model = model;
    out.checkpoint_step = step;
  }
  return out;
}

void write_trace_csv(const TrainTrace& trace, std::ostream& out) {
  out << "step,lr,train_lp,train_lm,train_lt,train_err,train_fnr_gap,val_lp,val_lt,val_err,"
         "val_fnr_gap\n";
  std::array<char, 32> buf{};
  auto num = [&](double v) {
    if (std::isnan(v)) {
      out << "nan";
      return;
    }
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.write(buf.data(), res.ptr - buf.data());
  };
  for (const auto& p : trace) {
    out << p.step << ',';
    for (double v : {p.lr, p.train_lp, p.train_lm, p.train_lt, p.train_err, p.train_fnr_gap,
                     p.val_lp, p.val_lt, p.val_err}) {
      num(v);
      out << ',';
    }
    num(p.val_fnr_gap);
    out << '\n';
  }
}

void save_trace_csv(const TrainTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_trace_csv(trace, out);
}

}  // namespace fairlab
