#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fairlab/error.hpp"
#include "fairlab/losses.hpp"
#include "gradcheck.hpp"
#include "helpers.hpp"

using namespace fairlab;

namespace {

// Independent double-sum oracle written against the kernel formula directly.
double mmd_oracle(const std::vector<double>& s, const std::vector<double>& t, double sigma) {
  auto k = [&](double x, double y) { return std::exp(-(x - y) * (x - y) / (2 * sigma * sigma)); };
  double ss = 0, tt = 0, st = 0;
  for (double a : s)
    for (double b : s) ss += k(a, b);
  for (double a : t)
    for (double b : t) tt += k(a, b);
  for (double a : s)
    for (double b : t) st += k(a, b);
  const double n = static_cast<double>(s.size()), m = static_cast<double>(t.size());
  return std::max(0.0, ss / (n * n) + tt / (m * m) - 2 * st / (n * m));
}

}  // namespace

TEST_CASE("bce examples") {
  const std::vector<double> half{0.5, 0.5};
  const std::vector<std::uint8_t> y10{1, 0};
  CHECK(bce_loss(half, y10) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  const std::vector<double> p{0.9, 0.2, 0.7};
  const std::vector<std::uint8_t> y{1, 0, 1};
  const double expected = -(std::log(0.9) + std::log(0.8) + std::log(0.7)) / 3.0;
  CHECK(bce_loss(p, y) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(bce_loss(p, y) == doctest::Approx(0.228393).epsilon(1e-6));

  const std::vector<double> exact{1.0, 0.0, 1.0};
  CHECK(bce_loss(exact, y) <= 1e-11);
  CHECK(std::isfinite(bce_loss(exact, y)));

  CHECK_THROWS_AS(bce_loss(std::vector<double>{}, std::vector<std::uint8_t>{}), InvalidArgument);
  CHECK_THROWS_AS(bce_loss(p, y10), DimensionMismatch);
}

TEST_CASE("bce from logits agrees with bce on probabilities") {
  const std::vector<double> z{-3.0, 0.0, 2.5, 12.0};
  const std::vector<std::uint8_t> y{0, 1, 1, 0};
  std::vector<double> p;
  for (double v : z) p.push_back(sigmoid(v));
  CHECK(bce_from_logits(z, y) == doctest::Approx(bce_loss(p, y)).epsilon(1e-9));
}

TEST_CASE("bce is invariant under joint permutation") {
  const std::vector<double> p{0.9, 0.2, 0.7, 0.4};
  const std::vector<std::uint8_t> y{1, 0, 1, 0};
  const std::vector<double> pp{0.4, 0.7, 0.9, 0.2};
  const std::vector<std::uint8_t> yp{0, 1, 1, 0};
  CHECK(bce_loss(p, y) == doctest::Approx(bce_loss(pp, yp)).epsilon(1e-15));
}

TEST_CASE("mmd examples") {
  KernelSpec unit{KernelFamily::gaussian, 1.0};
  const std::vector<double> zero{0.0}, one{1.0};
  CHECK(mmd_squared(zero, one, unit) == doctest::Approx(2 - 2 * std::exp(-0.5)).epsilon(1e-15));
  CHECK(mmd_squared(zero, one, unit) == doctest::Approx(0.786939).epsilon(1e-6));

  const std::vector<double> s{0.1, 0.7, 0.3, 0.3};
  CHECK(mmd_squared(s, s, KernelSpec{}) == 0.0);
  CHECK_THROWS_AS(mmd_squared(std::vector<double>{}, s, KernelSpec{}), InvalidArgument);
  CHECK_THROWS_AS(mmd_squared(s, s, KernelSpec{KernelFamily::gaussian, 0.0}), InvalidArgument);
}

TEST_CASE("mmd matches the double-sum oracle and is symmetric and permutation invariant") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 6);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> s(static_cast<std::size_t>(len(rng))), t(static_cast<std::size_t>(len(rng)));
    for (auto& v : s) v = u(rng);
    for (auto& v : t) v = u(rng);
    const KernelSpec k{KernelFamily::gaussian, 0.5};
    const double v = mmd_squared(s, t, k);
    CHECK(std::abs(v - mmd_oracle(s, t, 0.5)) <= 1e-12);
    CHECK(v == doctest::Approx(mmd_squared(t, s, k)).epsilon(1e-14));
    auto sp = s;
    std::reverse(sp.begin(), sp.end());
    CHECK(std::abs(mmd_squared(sp, t, k) - v) <= 1e-14);
    CHECK(v >= 0.0);
  }
}

TEST_CASE("laplace kernel value and derivative") {
  const KernelSpec k{KernelFamily::laplace, 0.5};
  CHECK(k(0.2, 0.7) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(k.dx(0.3, 0.3) == 0.0);
  const double h = 1e-7;
  CHECK(k.dx(0.2, 0.7) == doctest::Approx((k(0.2 + h, 0.7) - k(0.2 - h, 0.7)) / (2 * h)).epsilon(1e-6));
  CHECK(to_string(KernelFamily::laplace) == "laplace");
  CHECK(kernel_family_from_string("gaussian") == KernelFamily::gaussian);
  CHECK_THROWS_AS(kernel_family_from_string("cosine"), InvalidArgument);
}

TEST_CASE("mmd gradient matches finite differences") {
  Rng rng(8);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (auto family : {KernelFamily::gaussian, KernelFamily::laplace}) {
    const KernelSpec k{family, 0.4};
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> s(4), t(3);
      for (auto& v : s) v = u(rng);
      for (auto& v : t) v = u(rng);
      const auto g = mmd_squared_with_gradient(s, t, k);
      const double h = 1e-7;
      for (std::size_t i = 0; i < s.size(); ++i) {
        auto sp = s, sm = s;
        sp[i] += h;
        sm[i] -= h;
        const double fd = (mmd_squared(sp, t, k) - mmd_squared(sm, t, k)) / (2 * h);
        CHECK(std::abs(fd - g.ds[i]) <= 1e-6 * std::max(1.0, std::abs(fd)));
      }
      for (std::size_t j = 0; j < t.size(); ++j) {
        auto tp = t, tm = t;
        tp[j] += h;
        tm[j] -= h;
        const double fd = (mmd_squared(s, tp, k) - mmd_squared(s, tm, k)) / (2 * h);
        CHECK(std::abs(fd - g.dt[j]) <= 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("mindiff loss examples") {
  const std::vector<std::uint8_t> y{1, 1, 0, 1};
  const std::vector<std::uint8_t> a{0, 1, 1, 1};
  const std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
  CHECK(mindiff_loss(flat, y, a, KernelSpec{}) == 0.0);

  const std::vector<double> out{0.9, 0.1, 0.4, 0.1};
  const double expected = 2.0 - 2.0 * std::exp(-0.64 / (2 * 0.25));
  CHECK(mindiff_loss(out, y, a, KernelSpec{}) == doctest::Approx(expected).epsilon(1e-14));

  const std::vector<std::uint8_t> a0{0, 0, 1, 0};
  CHECK_THROWS_AS(mindiff_loss(out, y, a0, KernelSpec{}), MissingSubgroup);
}

TEST_CASE("flooding transform") {
  CHECK(flood_transform(0.2, 0.1) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(flood_transform(0.05, 0.1) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(flood_transform(0.1, 0.1) == 0.1);
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const double lp = u(rng), b = u(rng);
    CHECK(flood_transform(lp, b) >= b);
    if (lp >= b) CHECK(flood_transform(lp, b) == doctest::Approx(lp).epsilon(1e-15));
  }
}

TEST_CASE("weight decay penalty and gradient") {
  RandomFeatureModel m(2, 1, 0);
  m.head_weights() << 3.0, 4.0;
  CHECK(weight_decay_penalty(m, 1.0) == 12.5);
  CHECK(weight_decay_penalty(m, 0.0) == 0.0);
  m.head_bias() = -0.5;
  const auto g = weight_decay_gradient(m, 0.3);
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < 2; ++k) {
    auto p = m, q = m;
    p.head_weights()(k) += h;
    q.head_weights()(k) -= h;
    const double fd = (weight_decay_penalty(p, 0.3) - weight_decay_penalty(q, 0.3)) / (2 * h);
    CHECK(std::abs(fd - g.weights(k)) <= 1e-8);
  }
  auto p = m, q = m;
  p.head_bias() += h;
  q.head_bias() -= h;
  CHECK(std::abs((weight_decay_penalty(p, 0.3) - weight_decay_penalty(q, 0.3)) / (2 * h) - g.bias) <= 1e-8);
  CHECK_THROWS_AS(weight_decay_penalty(m, -1.0), InvalidArgument);
}

TEST_CASE("total loss reduces to bce when every extra term is off") {
  auto p = test::make_probe(3, 0.0, false, false);
  const HeadBatch primary(p.hidden, p.labels, p.attrs, p.primary_rows);
  const auto r = total_loss_and_gradient(p.model, primary, HeadBatch{}, p.config);
  const auto z = primary.logits(p.model);
  std::vector<std::uint8_t> y;
  for (std::size_t k = 0; k < primary.size(); ++k) y.push_back(primary.label(k));
  CHECK(r.breakdown.total == doctest::Approx(bce_from_logits(z, y)).epsilon(1e-15));
  HeadGradient expected{Vector::Zero(static_cast<Eigen::Index>(p.model.width())), 0.0};
  std::vector<double> g;
  for (std::size_t k = 0; k < z.size(); ++k) g.push_back((sigmoid(z[k]) - y[k]) / static_cast<double>(z.size()));
  primary.accumulate(g, expected);
  CHECK((r.gradient.weights - expected.weights).norm() <= 1e-15);
  CHECK(r.gradient.bias == doctest::Approx(expected.bias).epsilon(1e-15));
}

TEST_CASE("below the flood level the primary gradient is negated") {
  auto p = test::make_probe(4, 0.0, false, false);
  const HeadBatch primary(p.hidden, p.labels, p.attrs, p.primary_rows);
  const auto plain = total_loss_and_gradient(p.model, primary, HeadBatch{}, p.config);
  auto flooded_cfg = p.config;
  flooded_cfg.flood_level = plain.breakdown.primary + 0.1;
  const auto flooded = total_loss_and_gradient(p.model, primary, HeadBatch{}, flooded_cfg);
  CHECK((flooded.gradient.weights + plain.gradient.weights).norm() == 0.0);
  CHECK(flooded.gradient.bias == -plain.gradient.bias);
  CHECK(flooded.breakdown.total == doctest::Approx(plain.breakdown.primary + 0.2).epsilon(1e-12));

  // at exactly the flood level the descent branch is used
  flooded_cfg.flood_level = plain.breakdown.primary;
  const auto at = total_loss_and_gradient(p.model, primary, HeadBatch{}, flooded_cfg);
  CHECK((at.gradient.weights - plain.gradient.weights).norm() == 0.0);
}

TEST_CASE("total loss gradient matches central differences on random configurations") {
  int probes = 0;
  for (std::uint64_t seed = 0; seed < 36; ++seed) {
    for (double lambda : {0.0, 0.5, 1.5}) {
      const bool flood = seed % 2 == 0;
      const bool decay = (seed / 2) % 2 == 0;
      const auto family = seed % 3 == 0 ? KernelFamily::laplace : KernelFamily::gaussian;
      const auto p = test::make_probe(1000 + seed, lambda, flood, decay, family);
      const auto r = test::check_gradient(p);
      CHECK(r.relative_error < 1e-5);
      CHECK(r.total_recompute_error <= 1e-12);
      ++probes;
    }
  }
  CHECK(probes >= 100);
}

TEST_CASE("mindiff term is required to have both positive subgroups when lambda > 0") {
  auto p = test::make_probe(6, 1.0, false, false);
  const HeadBatch primary(p.hidden, p.labels, p.attrs, p.primary_rows);
  const HeadBatch only_a0(p.hidden, p.labels, p.attrs, {0, 1, 2});
  CHECK_THROWS_AS(total_loss_and_gradient(p.model, primary, only_a0, p.config), MissingSubgroup);
}

TEST_CASE("invalid loss configurations are rejected") {
  auto p = test::make_probe(7, 0.0, false, false);
  const HeadBatch primary(p.hidden, p.labels, p.attrs, p.primary_rows);
  auto cfg = p.config;
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(total_loss_and_gradient(p.model, primary, HeadBatch{}, cfg), InvalidArgument);
  cfg = p.config;
  cfg.flood_level = -0.1;
  CHECK_THROWS_AS(total_loss_and_gradient(p.model, primary, HeadBatch{}, cfg), InvalidArgument);
  CHECK_THROWS_AS(total_loss_and_gradient(p.model, HeadBatch{}, HeadBatch{}, p.config), InvalidArgument);
}
