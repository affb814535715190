#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "cosparse/errors.hpp"
#include "cosparse/fracdiff.hpp"
#include "cosparse/prior.hpp"
#include "cosparse/signal.hpp"

using namespace cosparse;

namespace {

std::vector<OrderSigma> quadratic_points(double a, double b, double c, std::vector<double> orders) {
  std::vector<OrderSigma> pts;
  for (double f : orders) pts.push_back({f, std::sqrt(c * std::exp2(-2.0 * a * f * f - 2.0 * b * f))});
  return pts;
}

}  // namespace

TEST_CASE("laplace sigma: two-point data") {
  const std::vector<double> v = {0.3, -0.3, 0.3, -0.3, -0.3};
  CHECK(laplace_ml_sigma(v) == doctest::Approx(std::sqrt(2.0) * 0.3).epsilon(1e-15));
}

TEST_CASE("laplace sigma: Monte Carlo consistency") {
  // Laplace with standard deviation 1 has scale 1/sqrt(2); draw by inverse CDF.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const double scale = 1.0 / std::sqrt(2.0);
  std::vector<double> samples(100000);
  for (auto& s : samples) {
    const double p = u(rng);
    s = -scale * (p < 0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::abs(p));
  }
  const double sigma = laplace_ml_sigma(samples);
  CHECK(sigma >= 0.98);
  CHECK(sigma <= 1.02);
}

TEST_CASE("laplace sigma: degenerate input") {
  const std::vector<double> zeros(10, 0.0);
  CHECK_THROWS_AS(laplace_ml_sigma(zeros), DegenerateSigmaError);
  CHECK_THROWS_AS(laplace_ml_sigma(std::span<const double>{}), DegenerateSigmaError);
}

TEST_CASE("order sigma pools difference coefficients") {
  std::vector<Eigen::VectorXd> frames = {Eigen::VectorXd::LinSpaced(16, 0.0, 1.0),
                                         Eigen::VectorXd::LinSpaced(16, 1.0, -2.0)};
  const auto d = difference_matrix(1.5, 16);
  double sum = 0.0;
  for (const auto& x : frames) sum += (d * x).cwiseAbs().sum();
  CHECK(estimate_order_sigma(frames, 1.5) == doctest::Approx(std::sqrt(2.0) * sum / 32.0).epsilon(1e-14));

  const std::vector<Eigen::VectorXd> flat = {Eigen::VectorXd::Zero(8)};
  CHECK_THROWS_AS(estimate_order_sigma(flat, 2.0), DegenerateSigmaError);
  const std::vector<Eigen::VectorXd> ragged = {Eigen::VectorXd::Ones(8), Eigen::VectorXd::Ones(9)};
  CHECK_THROWS_AS(estimate_order_sigma(ragged, 2.0), DimensionMismatchError);
}

TEST_CASE("order sigma scales with the frames") {
  const auto data = synthesize_dataset(3, 10, 64, 0.0, 4);
  auto frames = data.samples();
  const double base = estimate_order_sigma(frames, 4.0);
  for (auto& f : frames) f *= 3.0;
  CHECK(estimate_order_sigma(frames, 4.0) == doctest::Approx(3.0 * base).epsilon(1e-12));
}

TEST_CASE("variance fit: exact quadratic recovery") {
  const auto pts = quadratic_points(0.5, -4.0, 16.0, {3.5, 4.0, 4.5});
  const auto m = fit_variance_model(pts);
  CHECK(std::abs(m.a - 0.5) <= 1e-9);
  CHECK(std::abs(m.b + 4.0) <= 1e-9);
  CHECK(std::abs(m.c - 16.0) <= 1e-9);
  CHECK(m.residual <= 1e-9);
  CHECK(m.per_order_sigma.size() == 3);
}

TEST_CASE("variance fit: constant sigma") {
  const std::vector<OrderSigma> pts = {{2.0, 0.7}, {3.0, 0.7}, {5.0, 0.7}};
  const auto m = fit_variance_model(pts);
  CHECK(std::abs(m.a) <= 1e-12);
  CHECK(std::abs(m.b) <= 1e-12);
  CHECK(m.c == doctest::Approx(0.49).epsilon(1e-12));
}

TEST_CASE("variance fit: noisy regression") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.01);
  std::vector<OrderSigma> pts;
  for (double f : {3.0, 3.5, 4.0, 4.5, 5.0}) {
    const double log2var = std::log2(2.0) - 2.0 * (-0.4) * f * f - 2.0 * 3.2 * f + g(rng);
    pts.push_back({f, std::sqrt(std::exp2(log2var))});
  }
  const auto m = fit_variance_model(pts);
  CHECK(m.residual < 0.05);
  CHECK(m.a == doctest::Approx(-0.4).epsilon(0.1));
}

TEST_CASE("variance fit: underdetermined designs") {
  const std::vector<OrderSigma> two = {{3.0, 1.0}, {4.0, 2.0}};
  CHECK_THROWS_AS(fit_variance_model(two), UnderdeterminedFitError);
  const std::vector<OrderSigma> repeated = {{4.0, 1.0}, {4.0, 1.1}, {3.0, 0.9}};
  CHECK_THROWS_AS(fit_variance_model(repeated), UnderdeterminedFitError);
}

TEST_CASE("variance model predictions") {
  OrderVarianceModel m;
  m.a = 0.25;
  m.b = -1.0;
  m.c = 4.0;
  CHECK(m.log2_variance(2.0) == doctest::Approx(2.0 - 2.0 + 4.0));
  CHECK(m.variance(2.0) == doctest::Approx(16.0));
  CHECK(m.sigma(2.0) == doctest::Approx(4.0));
}

TEST_CASE("weights: flat model gives ones") {
  OrderVarianceModel flat;
  const double orders[] = {3.5, 4.0, 4.5};
  const auto w = build_weights(flat, orders, 16);
  CHECK(w.values.size() == 48);
  CHECK(w.values == Eigen::VectorXd::Ones(48));
  CHECK(w.group_count == 3);
  CHECK(w.group_size == 16);
}

TEST_CASE("weights: direct substitution") {
  OrderVarianceModel m;
  m.a = 0.5;
  m.b = -4.0;
  m.c = 1.0;
  const double orders[] = {4.0};
  const auto w = build_weights(m, orders, 3);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(w.values(i) == std::exp2(-8.0));
}

TEST_CASE("weights are inverse sigma and peak at the variance minimum") {
  // Variance minimum at f = -b / (2a) = 4.
  OrderVarianceModel m;
  m.a = -0.5;
  m.b = 4.0;
  m.c = 0.01;
  const double orders[] = {3.5, 4.0, 4.5};
  const auto w = build_weights(m, orders, 8);
  for (std::size_t g = 0; g < 3; ++g) CHECK(w.group_value(g) == doctest::Approx(1.0 / m.sigma(orders[g])));
  CHECK(w.group_value(1) > w.group_value(0));
  CHECK(w.group_value(1) > w.group_value(2));
}

TEST_CASE("weights: groups contiguous and equal") {
  const auto m = fit_variance_model(quadratic_points(-0.3, 2.0, 0.5, {3.0, 4.0, 5.0}));
  const double orders[] = {3.5, 4.0, 4.5, 5.0};
  const auto w = build_weights(m, orders, 10);
  CHECK(w.values.size() == 40);
  for (std::size_t g = 0; g < 4; ++g)
    for (Eigen::Index k = 0; k < 10; ++k)
      CHECK(w.values(static_cast<Eigen::Index>(g) * 10 + k) == w.group_value(g));
}

TEST_CASE("weights: clipping bounds the dynamic range") {
  OrderVarianceModel m;
  m.a = 0.0;
  m.b = 10.0;  // weight 2^(10 f)
  m.c = 1.0;
  const double orders[] = {0.0, 1.0, 2.0};
  const auto w = build_weights(m, orders, 2, 100.0);
  CHECK(w.values.maxCoeff() / w.values.minCoeff() == doctest::Approx(100.0));
  CHECK(w.values.minCoeff() == 1.0);
  CHECK((w.values.array() > 0.0).all());
}

TEST_CASE("weights depend only on the model, not the sigma list order") {
  auto pts = quadratic_points(-0.2, 1.5, 2.0, {3.0, 3.5, 4.0, 4.5, 5.0});
  const auto m1 = fit_variance_model(pts);
  std::reverse(pts.begin(), pts.end());
  const auto m2 = fit_variance_model(pts);
  const double orders[] = {3.5, 4.0, 4.5};
  const auto w1 = build_weights(m1, orders, 4);
  const auto w2 = build_weights(m2, orders, 4);
  CHECK((w1.values - w2.values).cwiseAbs().maxCoeff() <= 1e-10 * w1.values.maxCoeff());
}

TEST_CASE("weights scale inversely with the training frames") {
  const auto data = synthesize_dataset(3, 20, 64, 0.0, 9);
  auto frames = data.samples();
  const std::vector<double> orders = {3.5, 4.0, 4.5};
  auto fit = [&](const std::vector<Eigen::VectorXd>& fr) {
    std::vector<OrderSigma> pts;
    for (double f : orders) pts.push_back({f, estimate_order_sigma(fr, f)});
    return build_weights(fit_variance_model(pts), orders, 64);
  };
  const auto w1 = fit(frames);
  for (auto& f : frames) f *= 2.5;
  const auto w2 = fit(frames);
  CHECK(((w2.values * 2.5 - w1.values).cwiseAbs().array() <= 1e-9 * w1.values.array()).all());
}

TEST_CASE("weights: invalid inputs") {
  OrderVarianceModel bad;
  bad.c = 0.0;
  const double orders[] = {4.0};
  CHECK_THROWS(build_weights(bad, orders, 4));
  OrderVarianceModel ok;
  CHECK_THROWS_AS(build_weights(ok, std::span<const double>{}, 4), InvalidOrderSetError);
}

TEST_CASE("uniform weights") {
  const auto w = uniform_weights(3, 5);
  CHECK(w.values == Eigen::VectorXd::Ones(15));
  CHECK(w.group_count == 3);
}

TEST_CASE("model record round trip") {
  auto m = fit_variance_model(quadratic_points(-0.31, 2.4, 0.016, {3.5, 4.0, 4.5}));
  std::stringstream buf;
  write_model(buf, m);
  const auto back = read_model(buf);
  CHECK(back.a == m.a);
  CHECK(back.b == m.b);
  CHECK(back.c == m.c);
  CHECK(back.residual == m.residual);
  REQUIRE(back.per_order_sigma.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.per_order_sigma[i].order == m.per_order_sigma[i].order);
    CHECK(back.per_order_sigma[i].sigma == m.per_order_sigma[i].sigma);
  }
}

TEST_CASE("model record: missing key") {
  std::stringstream buf("a=1\nb=2\n");
  CHECK_THROWS_AS(read_model(buf), ParseError);
}

TEST_CASE("training on synthetic spikes: variance minimum near order 4") {
  const auto data = synthesize_dataset(3, 34, 128, 0.0, 7);
  auto frames = data.samples();
  frames.resize(100);
  std::vector<OrderSigma> pts;
  for (double f : {3.5, 4.0, 4.5}) pts.push_back({f, estimate_order_sigma(frames, f)});
  const auto m = fit_variance_model(pts);
  REQUIRE(m.a < 0.0);  // convex in f, so a minimum exists
  const double vertex = -m.b / (2.0 * m.a);
  CHECK(vertex > 3.0);
  CHECK(vertex < 4.5);
}
