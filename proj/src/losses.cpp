#include "fairlab/losses.hpp"

#include <algorithm>
#include <cmath>

#include "fairlab/error.hpp"

namespace fairlab {

std::string to_string(KernelFamily family) {
  return family == KernelFamily::gaussian ? "gaussian" : "laplace";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "laplace") return KernelFamily::laplace;
  throw InvalidArgument("unknown kernel family '" + name + "'");
}

void KernelSpec::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw InvalidArgument("kernel: bandwidth must be > 0");
  }
}

double KernelSpec::operator()(double x, double y) const {
  const double diff = x - y;
  if (family == KernelFamily::gaussian) {
    return std::exp(-diff * diff / (2.0 * bandwidth * bandwidth));
  }
  return std::exp(-std::abs(diff) / bandwidth);
}

double KernelSpec::dx(double x, double y) const {
  const double diff = x - y;
  if (family == KernelFamily::gaussian) {
    return -diff / (bandwidth * bandwidth) * (*this)(x, y);
  }
  if (diff == 0.0) return 0.0;
  return -(diff > 0.0 ? 1.0 : -1.0) / bandwidth * (*this)(x, y);
}

namespace {

constexpr double kProbClamp = 1e-12;

void check_batch(std::size_t n, std::size_t m) {
  if (n == 0) throw InvalidArgument("loss: empty batch");
  if (n != m) throw DimensionMismatch("loss: probabilities and labels differ in length");
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

double bce_loss(std::span<const double> probabilities, std::span<const std::uint8_t> labels) {
  check_batch(probabilities.size(), labels.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities[i], kProbClamp, 1.0 - kProbClamp);
    sum -= labels[i] ? std::log(p) : std::log1p(-p);
  }
  return sum / static_cast<double>(probabilities.size());
}

double bce_from_logits(std::span<const double> logits, std::span<const std::uint8_t> labels) {
  check_batch(logits.size(), labels.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    // -log sigmoid(z) = softplus(-z), -log(1 - sigmoid(z)) = softplus(z)
    sum += labels[i] ? softplus(-logits[i]) : softplus(logits[i]);
  }
  return sum / static_cast<double>(logits.size());
}

namespace {

double mean_kernel(std::span<const double> a, std::span<const double> b, const KernelSpec& k) {
  double sum = 0.0;
  for (double x : a) {
    for (double y : b) sum += k(x, y);
  }
  return sum / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

}  // namespace

double mmd_squared(std::span<const double> s, std::span<const double> t, const KernelSpec& k) {
  if (s.empty() || t.empty()) throw InvalidArgument("mmd: both samples must be non-empty");
  k.validate();
  const double value = mean_kernel(s, s, k) + mean_kernel(t, t, k) - 2.0 * mean_kernel(s, t, k);
  return std::max(value, 0.0);
}

MmdWithGradient mmd_squared_with_gradient(std::span<const double> s, std::span<const double> t,
                                          const KernelSpec& k) {
  MmdWithGradient out;
  out.value = mmd_squared(s, t, k);
  const double n = static_cast<double>(s.size());
  const double m = static_cast<double>(t.size());
  out.ds.assign(s.size(), 0.0);
  out.dt.assign(t.size(), 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    double self = 0.0;
    double cross = 0.0;
    for (double y : s) self += k.dx(s[i], y);
    for (double y : t) cross += k.dx(s[i], y);
    out.ds[i] = 2.0 * self / (n * n) - 2.0 * cross / (n * m);
  }
  for (std::size_t j = 0; j < t.size(); ++j) {
    double self = 0.0;
    double cross = 0.0;
    for (double y : t) self += k.dx(t[j], y);
    for (double x : s) cross += k.dx(t[j], x);
    out.dt[j] = 2.0 * self / (m * m) - 2.0 * cross / (n * m);
  }
  return out;
}

double mindiff_loss(std::span<const double> outputs, std::span<const std::uint8_t> labels,
                    std::span<const std::uint8_t> attrs, const KernelSpec& k) {
  if (outputs.size() != labels.size() || outputs.size() != attrs.size()) {
    throw DimensionMismatch("mindiff: outputs, labels and attrs differ in length");
  }
  std::vector<double> s;
  std::vector<double> t;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (labels[i] != 1) continue;
    (attrs[i] == 0 ? s : t).push_back(outputs[i]);
  }
  if (s.empty()) throw MissingSubgroup("mindiff: no (y=1, a=0) rows in batch");
  if (t.empty()) throw MissingSubgroup("mindiff: no (y=1, a=1) rows in batch");
  return mmd_squared(s, t, k);
}

double flood_transform(double primary, double b) { return std::abs(primary - b) + b; }

double weight_decay_penalty(const RandomFeatureModel& model, double strength) {
  if (strength < 0.0) throw InvalidArgument("weight decay: strength must be >= 0");
  const double bias = model.head_bias();
  return strength * (model.head_weights().squaredNorm() + bias * bias) / 2.0;
}

HeadGradient weight_decay_gradient(const RandomFeatureModel& model, double strength) {
  if (strength < 0.0) throw InvalidArgument("weight decay: strength must be >= 0");
  return {strength * model.head_weights(), strength * model.head_bias()};
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("loss: lambda must be >= 0");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw InvalidArgument("loss: weight decay must be >= 0");
  }
  if (flood_level && !(*flood_level >= 0.0)) throw InvalidArgument("loss: flood level must be >= 0");
  kernel.validate();
}

HeadBatch::HeadBatch(const Matrix& hidden, std::span<const std::uint8_t> labels,
                     std::span<const std::uint8_t> attrs, std::vector<std::size_t> rows)
    : hidden_(&hidden), labels_(labels), attrs_(attrs), rows_(std::move(rows)) {
  const auto n = static_cast<std::size_t>(hidden.rows());
  if (labels.size() != n || attrs.size() != n) {
    throw DimensionMismatch("batch: hidden rows, labels and attrs differ in length");
  }
  for (auto r : rows_) {
    if (r >= n) throw InvalidArgument("batch: row index out of range");
  }
}

HeadBatch HeadBatch::all(const Matrix& hidden, std::span<const std::uint8_t> labels,
                         std::span<const std::uint8_t> attrs) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(hidden.rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return HeadBatch(hidden, labels, attrs, std::move(rows));
}

std::vector<double> HeadBatch::logits(const RandomFeatureModel& model) const {
  if (!empty() && width() != model.width()) {
    throw DimensionMismatch("batch: hidden width does not match model width");
  }
  std::vector<double> z(size());
  const auto& w = model.head_weights();
  for (std::size_t k = 0; k < size(); ++k) z[k] = hidden_row(k).dot(w) + model.head_bias();
  return z;
}

void HeadBatch::accumulate(std::span<const double> logit_grad, HeadGradient& grad) const {
  for (std::size_t k = 0; k < size(); ++k) {
    if (logit_grad[k] == 0.0) continue;
    grad.weights.noalias() += logit_grad[k] * hidden_row(k).transpose();
    grad.bias += logit_grad[k];
  }
}

namespace {

// Adds lambda * d L_M / d z to `logit_grad` (one entry per batch row) and
// returns L_M.
double mindiff_logit_gradient(const HeadBatch& batch, std::span<const double> logits,
                              const KernelSpec& k, double scale, std::vector<double>& logit_grad) {
  std::vector<double> s, t;
  std::vector<std::size_t> s_rows, t_rows;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    if (batch.label(r) != 1) continue;
    const double p = sigmoid(logits[r]);
    if (batch.attr(r) == 0) {
      s.push_back(p);
      s_rows.push_back(r);
    } else {
      t.push_back(p);
      t_rows.push_back(r);
    }
  }
  if (s.empty()) throw MissingSubgroup("mindiff: no (y=1, a=0) rows in batch");
  if (t.empty()) throw MissingSubgroup("mindiff: no (y=1, a=1) rows in batch");
  const auto mmd = mmd_squared_with_gradient(s, t, k);
  auto chain = [&](std::size_t row, double dp) {
    const double z = logits[row];
    logit_grad[row] += scale * dp * sigmoid(z) * sigmoid(-z);
  };
  for (std::size_t i = 0; i < s.size(); ++i) chain(s_rows[i], mmd.ds[i]);
  for (std::size_t j = 0; j < t.size(); ++j) chain(t_rows[j], mmd.dt[j]);
  return mmd.value;
}

}  // namespace

LossAndGradient mindiff_loss_and_gradient(const RandomFeatureModel& model,
                                          const HeadBatch& batch, const KernelSpec& k) {
  k.validate();
  const auto z = batch.logits(model);
  std::vector<double> g(batch.size(), 0.0);
  LossAndGradient out;
  out.breakdown.mindiff = mindiff_logit_gradient(batch, z, k, 1.0, g);
  out.breakdown.lambda = 1.0;
  out.breakdown.total = out.breakdown.mindiff;
  out.gradient.weights = Vector::Zero(static_cast<Eigen::Index>(model.width()));
  batch.accumulate(g, out.gradient);
  return out;
}

LossAndGradient total_loss_and_gradient(const RandomFeatureModel& model,
                                        const HeadBatch& primary_batch,
                                        const HeadBatch& mindiff_batch, const LossConfig& config) {
  config.validate();
  if (primary_batch.empty()) throw InvalidArgument("loss: empty primary batch");

  LossAndGradient out;
  auto& br = out.breakdown;
  br.lambda = config.lambda;
  br.flood_level = config.flood_level;
  out.gradient.weights = Vector::Zero(static_cast<Eigen::Index>(model.width()));

  const auto z = primary_batch.logits(model);
  std::vector<std::uint8_t> y(primary_batch.size());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = primary_batch.label(k);
  br.primary = bce_from_logits(z, y);

  // Below the flood level the primary term is ascended.
  double sign = 1.0;
  if (config.flood_level && br.primary < *config.flood_level) sign = -1.0;
  const double n = static_cast<double>(z.size());
  std::vector<double> g(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) g[k] = sign * (sigmoid(z[k]) - y[k]) / n;
  primary_batch.accumulate(g, out.gradient);

  const bool use_mindiff = config.lambda > 0.0 || !mindiff_batch.empty();
  if (use_mindiff) {
    const auto zm = mindiff_batch.logits(model);
    std::vector<double> gm(zm.size(), 0.0);
    br.mindiff = mindiff_logit_gradient(mindiff_batch, zm, config.kernel, config.lambda, gm);
    if (config.lambda > 0.0) mindiff_batch.accumulate(gm, out.gradient);
  }

  if (config.weight_decay > 0.0) {
    br.weight_penalty = weight_decay_penalty(model, config.weight_decay);
    out.gradient.weights.noalias() += config.weight_decay * model.head_weights();
    out.gradient.bias += config.weight_decay * model.head_bias();
  }

  br.total = br.recomputed_total();
  return out;
}

}  // namespace fairlab
