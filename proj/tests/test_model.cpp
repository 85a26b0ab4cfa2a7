#include <doctest.h>

#include <cmath>
#include <random>

#include "fairlab/error.hpp"
#include "fairlab/model.hpp"
#include "helpers.hpp"

using namespace fairlab;

namespace {

Matrix random_features(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = g(rng);
  }
  return x;
}

void randomize_head(RandomFeatureModel& m, std::uint64_t seed, double scale) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  for (Eigen::Index k = 0; k < m.head_weights().size(); ++k) m.head_weights()(k) = g(rng);
  m.head_bias() = g(rng);
}

}  // namespace

TEST_CASE("sigmoid matches the scalar oracle and stays stable at the extremes") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(6.0) == doctest::Approx(0.9975273768433653).epsilon(1e-15));
  CHECK(sigmoid(-6.0) == doctest::Approx(1.0 - 0.9975273768433653).epsilon(1e-12));
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(-800.0) < 1e-300);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(std::isfinite(sigmoid(-1e308)));
}

TEST_CASE("init is deterministic with a zero head") {
  const auto a = init_model(10, 5, 42);
  const auto b = init_model(10, 5, 42);
  CHECK((a.projection().array() == b.projection().array()).all());
  CHECK(a.head_weights().isZero());
  CHECK(a.head_bias() == 0.0);
  CHECK_FALSE((a.projection().array() == init_model(10, 5, 43).projection().array()).all());
  CHECK_THROWS_AS(init_model(0, 5, 1), InvalidArgument);
  CHECK_THROWS_AS(init_model(5, 0, 1), InvalidArgument);
}

TEST_CASE("projection entries have variance 1/d") {
  const std::size_t m = 10000, d = 512;
  const auto model = init_model(m, d, 7);
  const double mean_sq = model.projection().squaredNorm() / static_cast<double>(m * d);
  CHECK(mean_sq >= 0.97 / static_cast<double>(d));
  CHECK(mean_sq <= 1.03 / static_cast<double>(d));
}

TEST_CASE("an untrained model outputs one half everywhere") {
  const auto model = init_model(20, 4, 3);
  const auto out = forward(model, random_features(7, 4, 1));
  for (Eigen::Index i = 0; i < out.probabilities.size(); ++i) CHECK(out.probabilities(i) == 0.5);
}

TEST_CASE("forward composes ReLU projection, linear head and sigmoid") {
  auto model = init_model(6, 3, 5);
  randomize_head(model, 9, 0.7);
  const Matrix x = random_features(4, 3, 2);
  const auto out = forward(model, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double z = model.head_bias();
    for (Eigen::Index k = 0; k < 6; ++k) {
      double h = 0.0;
      for (Eigen::Index j = 0; j < 3; ++j) h += model.projection()(k, j) * x(i, j);
      z += model.head_weights()(k) * std::max(h, 0.0);
    }
    CHECK(out.logits(i) == doctest::Approx(z).epsilon(1e-12));
    CHECK(out.probabilities(i) == doctest::Approx(sigmoid(z)).epsilon(1e-12));
    CHECK(out.probabilities(i) > 0.0);
    CHECK(out.probabilities(i) < 1.0);
  }
  CHECK(out.hidden.minCoeff() >= 0.0);
}

TEST_CASE("a large bias saturates the output") {
  auto model = init_model(3, 2, 1);
  model.head_bias() = 100.0;
  const auto out = forward(model, random_features(5, 2, 8));
  for (Eigen::Index i = 0; i < out.probabilities.size(); ++i) CHECK(out.probabilities(i) > 1 - 1e-9);
}

TEST_CASE("forward rejects a feature width that differs from d") {
  const auto model = init_model(3, 2, 1);
  CHECK_THROWS_AS(forward(model, random_features(2, 3, 1)), DimensionMismatch);
}

TEST_CASE("forward is equivariant under row permutations") {
  auto model = init_model(8, 3, 4);
  randomize_head(model, 1, 1.0);
  const Matrix x = random_features(5, 3, 6);
  Matrix xp(5, 3);
  const int perm[5] = {3, 0, 4, 1, 2};
  for (int i = 0; i < 5; ++i) xp.row(i) = x.row(perm[i]);
  const auto a = forward(model, x);
  const auto b = forward(model, xp);
  for (int i = 0; i < 5; ++i) CHECK(b.probabilities(i) == a.probabilities(perm[i]));
}

TEST_CASE("predict classifies ties as positive") {
  const std::vector<double> p{0.3, 0.5, 0.7};
  CHECK(predict(p, 0.5) == std::vector<std::uint8_t>{0, 1, 1});
  CHECK(predict(p, 0.0) == std::vector<std::uint8_t>{1, 1, 1});
  CHECK(predict(p, 1.0) == std::vector<std::uint8_t>{0, 0, 0});
  CHECK_THROWS_AS(predict(p, 1.5), InvalidArgument);
}

TEST_CASE("head gradient: zero upstream, sparsity and finite differences") {
  auto model = init_model(5, 3, 2);
  randomize_head(model, 3, 0.5);
  const Matrix x = random_features(6, 3, 4);

  const std::vector<double> zeros(6, 0.0);
  const auto g0 = head_gradient(model, x, zeros);
  CHECK(g0.weights.isZero());
  CHECK(g0.bias == 0.0);

  Matrix h = Matrix::Zero(1, 5);
  h(0, 2) = 1.0;
  const std::vector<double> one{0.7};
  const auto gs = head_gradient_from_logits(h, one);
  for (Eigen::Index k = 0; k < 5; ++k) CHECK((k == 2 ? gs.weights(k) != 0.0 : gs.weights(k) == 0.0));

  // L = sum_i c_i p_i^2, so dL/dp_i = 2 c_i p_i
  Rng rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int probe = 0; probe < 100; ++probe) {
    auto m = init_model(4, 3, 100 + probe);
    randomize_head(m, 200 + probe, 0.8);
    const Matrix xs = random_features(5, 3, 300 + probe);
    std::vector<double> c(5);
    for (auto& v : c) v = u(rng);
    auto loss = [&](const RandomFeatureModel& mm) {
      const auto o = forward(mm, xs);
      double l = 0.0;
      for (int i = 0; i < 5; ++i) l += c[i] * o.probabilities(i) * o.probabilities(i);
      return l;
    };
    const auto o = forward(m, xs);
    std::vector<double> up(5);
    for (int i = 0; i < 5; ++i) up[i] = 2 * c[i] * o.probabilities(i);
    const auto g = head_gradient(m, xs, up);
    const double eps = 1e-6;
    const Eigen::Index n = m.head_weights().size();
    Vector fd(n + 1), an(n + 1);
    for (Eigen::Index k = 0; k <= n; ++k) {
      auto plus = m, minus = m;
      if (k < n) {
        plus.head_weights()(k) += eps;
        minus.head_weights()(k) -= eps;
      } else {
        plus.head_bias() += eps;
        minus.head_bias() -= eps;
      }
      fd(k) = (loss(plus) - loss(minus)) / (2 * eps);
      an(k) = k < n ? g.weights(k) : g.bias;
    }
    CHECK((fd - an).norm() <= 1e-5 * std::max(an.norm(), 1e-8));
  }
}

TEST_CASE("checkpoint round trip regenerates U bitwise") {
  test::TempDir dir("model");
  auto model = init_model(12, 4, 77);
  randomize_head(model, 5, 0.3);
  save_model(model, dir / "m.json");
  const auto back = load_model(dir / "m.json");
  CHECK((back.projection().array() == model.projection().array()).all());
  CHECK((back.head_weights().array() == model.head_weights().array()).all());
  CHECK(back.head_bias() == model.head_bias());
  CHECK(back.seed() == 77);
}
