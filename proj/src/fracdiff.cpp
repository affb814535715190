#include "cosparse/fracdiff.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "cosparse/errors.hpp"

namespace cosparse {

namespace {

void check_order(double order) {
  if (!std::isfinite(order) || order < 0.0) {
    std::ostringstream msg;
    msg << "difference order must be finite and nonnegative, got " << order;
    throw InvalidOrderError(msg.str());
  }
}

}  // namespace

DifferenceCoefficients fod_coefficients(double order, std::size_t length) {
  check_order(order);
  if (length == 0) throw InvalidShapeError("coefficient length must be at least 1");

  DifferenceCoefficients out;
  out.order = order;
  out.coeffs.resize(length);
  out.coeffs[0] = 1.0;
  for (std::size_t k = 0; k + 1 < length; ++k) {
    const double kd = static_cast<double>(k);
    out.coeffs[k + 1] = out.coeffs[k] * (kd - order) / (kd + 1.0);
  }
  return out;
}

Eigen::MatrixXd difference_matrix(double order, Eigen::Index n) {
  check_order(order);
  if (n < 1) throw InvalidShapeError("frame length must be at least 1");

  const auto c = fod_coefficients(order, static_cast<std::size_t>(n)).coeffs;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) d(i, j) = c[static_cast<std::size_t>(j - i)];
  }
  return d;
}

Eigen::MatrixXd AnalysisDictionary::unscaled_block(std::size_t i) const {
  const Eigen::Index n = frame_length();
  if (i >= group_count()) throw InvalidShapeError("block index out of range");
  return matrix_.middleRows(static_cast<Eigen::Index>(i) * n, n) / scale_;
}

AnalysisDictionary AnalysisDictionary::from_matrix(Eigen::MatrixXd matrix) {
  if (matrix.rows() < 1 || matrix.cols() < 1) throw InvalidShapeError("empty dictionary");
  AnalysisDictionary dict;
  dict.kind_ = Kind::kGeneric;
  dict.matrix_ = std::move(matrix);
  return dict;
}

AnalysisDictionary build_mfod(std::span<const double> orders, Eigen::Index n) {
  if (orders.empty()) throw InvalidOrderSetError("order set is empty");
  if (n < 1) throw InvalidShapeError("frame length must be at least 1");
  for (double f : orders) check_order(f);
  for (std::size_t i = 0; i < orders.size(); ++i) {
    for (std::size_t j = i + 1; j < orders.size(); ++j) {
      if (orders[i] == orders[j]) {
        std::ostringstream msg;
        msg << "duplicate order " << orders[i] << " in order set";
        throw InvalidOrderSetError(msg.str());
      }
    }
  }

  const auto q = static_cast<Eigen::Index>(orders.size());
  AnalysisDictionary dict;
  dict.kind_ = AnalysisDictionary::Kind::kDifference;
  dict.orders_.assign(orders.begin(), orders.end());
  dict.scale_ = 1.0 / std::sqrt(static_cast<double>(q));
  dict.matrix_.resize(q * n, n);
  for (Eigen::Index i = 0; i < q; ++i) {
    dict.matrix_.middleRows(i * n, n) =
        dict.scale_ * difference_matrix(orders[static_cast<std::size_t>(i)], n);
  }
  return dict;
}

AnalysisDictionary build_random_tight_frame(Eigen::Index l, Eigen::Index n, std::uint64_t seed) {
  if (n < 1 || l < n) throw InvalidShapeError("tight frame needs l >= n >= 1");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(l, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < l; ++i) g(i, j) = gauss(rng);

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(l, n);

  AnalysisDictionary dict;
  dict.kind_ = AnalysisDictionary::Kind::kRandomTightFrame;
  dict.scale_ = std::sqrt(static_cast<double>(l) / static_cast<double>(n));
  dict.matrix_ = dict.scale_ * q;
  return dict;
}

OrderDistanceReport order_distance(std::span<const double> orders) {
  OrderDistanceReport report;
  if (orders.size() < 2) return report;
  const auto [lo, hi] = std::minmax_element(orders.begin(), orders.end());
  report.max_distance = *hi - *lo;
  report.within_recommended = report.max_distance >= 0.25 && report.max_distance <= 0.5;
  return report;
}

Eigen::VectorXd apply_analysis(const AnalysisDictionary& dict, const Eigen::VectorXd& x) {
  if (x.size() != dict.frame_length()) {
    std::ostringstream msg;
    msg << "signal length " << x.size() << " does not match dictionary frame length "
        << dict.frame_length();
    throw DimensionMismatchError(msg.str());
  }
  return dict.matrix() * x;
}

}  // namespace cosparse
