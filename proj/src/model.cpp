#include "fairlab/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "fairlab/error.hpp"

namespace fairlab {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

RandomFeatureModel::RandomFeatureModel(std::size_t width, std::size_t input_dim,
                                       std::uint64_t seed)
    : seed_(seed) {
  if (width == 0) throw InvalidArgument("model: width must be >= 1");
  if (input_dim == 0) throw InvalidArgument("model: input dimension must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(input_dim)));
  projection_.resize(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(input_dim));
  for (Eigen::Index i = 0; i < projection_.rows(); ++i) {
    for (Eigen::Index j = 0; j < projection_.cols(); ++j) projection_(i, j) = gauss(rng);
  }
  weights_ = Vector::Zero(static_cast<Eigen::Index>(width));
}

Matrix RandomFeatureModel::hidden(const Matrix& features) const {
  if (static_cast<std::size_t>(features.cols()) != input_dim()) {
    throw DimensionMismatch("model: feature width " + std::to_string(features.cols()) +
                            " does not match input dimension " + std::to_string(input_dim()));
  }
  Matrix h = features * projection_.transpose();
  return h.cwiseMax(0.0);
}

Vector RandomFeatureModel::logits_from_hidden(const Matrix& hidden) const {
  if (static_cast<std::size_t>(hidden.cols()) != width()) {
    throw DimensionMismatch("model: hidden width does not match model width");
  }
  return (hidden * weights_).array() + bias_;
}

RandomFeatureModel init_model(std::size_t width, std::size_t input_dim, std::uint64_t seed) {
  return RandomFeatureModel(width, input_dim, seed);
}

ModelOutputs forward(const RandomFeatureModel& model, const Matrix& features) {
  ModelOutputs out;
  out.hidden = model.hidden(features);
  out.logits = model.logits_from_hidden(out.hidden);
  out.probabilities = out.logits.unaryExpr([](double z) { return sigmoid(z); });
  return out;
}

std::vector<std::uint8_t> predict(std::span<const double> probabilities, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidArgument("predict: tau must lie in [0, 1]");
  std::vector<std::uint8_t> out(probabilities.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i) out[i] = probabilities[i] >= tau;
  return out;
}

std::vector<std::uint8_t> predict(const RandomFeatureModel& model, const Matrix& features,
                                  double tau) {
  const auto out = forward(model, features);
  return predict(std::span<const double>(out.probabilities.data(),
                                         static_cast<std::size_t>(out.probabilities.size())),
                 tau);
}

HeadGradient head_gradient_from_logits(const Matrix& hidden, std::span<const double> logit_grad) {
  if (static_cast<std::size_t>(hidden.rows()) != logit_grad.size()) {
    throw DimensionMismatch("head gradient: upstream length does not match batch size");
  }
  const Eigen::Map<const Vector> g(logit_grad.data(), static_cast<Eigen::Index>(logit_grad.size()));
  HeadGradient out;
  out.weights = hidden.transpose() * g;
  out.bias = g.sum();
  return out;
}

HeadGradient head_gradient(const RandomFeatureModel& model, const Matrix& features,
                           std::span<const double> upstream) {
  const auto out = forward(model, features);
  if (static_cast<std::size_t>(out.logits.size()) != upstream.size()) {
    throw DimensionMismatch("head gradient: upstream length does not match batch size");
  }
  std::vector<double> logit_grad(upstream.size());
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    const double z = out.logits(static_cast<Eigen::Index>(i));
    // p(1-p) written as sigmoid(z) * sigmoid(-z) to stay accurate when saturated
    logit_grad[i] = upstream[i] * sigmoid(z) * sigmoid(-z);
  }
  return head_gradient_from_logits(out.hidden, logit_grad);
}

void save_model(const RandomFeatureModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "fairlab-model";
  j["version"] = 1;
  j["d"] = model.input_dim();
  j["m"] = model.width();
  j["seed"] = model.seed();
  j["w"] = std::vector<double>(model.head_weights().data(),
                               model.head_weights().data() + model.head_weights().size());
  j["bias"] = model.head_bias();
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

RandomFeatureModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (j.at("format") != "fairlab-model" || j.at("version") != 1) {
      throw Error("model checkpoint: unsupported format or version");
    }
    RandomFeatureModel model(j.at("m").get<std::size_t>(), j.at("d").get<std::size_t>(),
                             j.at("seed").get<std::uint64_t>());
    const auto w = j.at("w").get<std::vector<double>>();
    if (w.size() != model.width()) throw Error("model checkpoint: w has wrong length");
    model.head_weights() = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    model.head_bias() = j.at("bias").get<double>();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("model checkpoint: ") + e.what());
  }
}

}  // namespace fairlab
