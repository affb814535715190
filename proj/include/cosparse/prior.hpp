#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cosparse {

struct OrderSigma {
  double order = 0.0;
  double sigma = 0.0;
};

/// Log-quadratic law for the analysis-coefficient variance across orders:
///
///   sigma²(f) = c · 2^(-2 a f² - 2 b f)
///
/// One global (a, b, c) is fitted over all training orders.
struct OrderVarianceModel {
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
  std::vector<OrderSigma> per_order_sigma;
  // RMS of the log2(sigma²) regression residuals.
  double residual = 0.0;

  double variance(double order) const;
  double sigma(double order) const;
  double log2_variance(double order) const;
};

// Grouped weights, one constant block of n entries per dictionary order.
struct WeightVector {
  Eigen::VectorXd values;
  std::size_t group_count = 0;
  Eigen::Index group_size = 0;

  double group_value(std::size_t g) const {
    return values(static_cast<Eigen::Index>(g) * group_size);
  }
};

inline constexpr double kDefaultClipRatio = 1e4;

// Laplacian maximum-likelihood standard deviation: sqrt(2) · mean|z|.
double laplace_ml_sigma(std::span<const double> samples);

// Pools the order-f difference coefficients of every frame and returns the
// Laplacian ML standard deviation. Throws DegenerateSigmaError on all-zero input.
double estimate_order_sigma(std::span<const Eigen::VectorXd> frames, double order);

// Least-squares fit of log2 sigma² against (-2f², -2f, 1). Needs >= 3 distinct orders.
OrderVarianceModel fit_variance_model(std::span<const OrderSigma> points);

// w_g = 1 / sigma(f_g) = 2^(a f² + b f) / sqrt(c), repeated n times per group.
// Large weights are capped so that max/min <= clip_ratio.
WeightVector build_weights(const OrderVarianceModel& model, std::span<const double> orders,
                           Eigen::Index n, double clip_ratio = kDefaultClipRatio);

WeightVector uniform_weights(std::size_t groups, Eigen::Index n);

// Key-value text record: a, b, c, orders, sigmas, residual.
void write_model(std::ostream& out, const OrderVarianceModel& model);
void write_model(const std::filesystem::path& path, const OrderVarianceModel& model);
OrderVarianceModel read_model(std::istream& in);
OrderVarianceModel read_model(const std::filesystem::path& path);

}  // namespace cosparse
