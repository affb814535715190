#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cosparse {

// Grünwald–Letnikov weights of (1 - z)^order, truncated to a finite length.
struct DifferenceCoefficients {
  double order = 0.0;
  std::vector<double> coeffs;
};

// c_0 = 1, c_{k+1} = c_k (k - f) / (k + 1). The recurrence stays finite where
// the gamma-ratio form overflows.
DifferenceCoefficients fod_coefficients(double order, std::size_t length);

// Square n x n upper-triangular Toeplitz difference operator. Row i holds
// c_0..c_{n-1-i} starting at column i; rows near the frame end are truncated,
// so the diagonal stays 1 and the matrix stays invertible.
Eigen::MatrixXd difference_matrix(double order, Eigen::Index n);

/// Redundant analysis operator Ω (l x n) used by the co-sparse model.
///
/// Difference dictionaries stack one n x n block per order, scaled by 1/sqrt(q).
/// Random tight frames carry no orders.
class AnalysisDictionary {
 public:
  enum class Kind { kDifference, kRandomTightFrame, kGeneric };

  const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
  const std::vector<double>& orders() const noexcept { return orders_; }
  Kind kind() const noexcept { return kind_; }
  Eigen::Index frame_length() const noexcept { return matrix_.cols(); }
  Eigen::Index rows() const noexcept { return matrix_.rows(); }
  double scale() const noexcept { return scale_; }
  double redundancy() const noexcept {
    return static_cast<double>(matrix_.rows()) / static_cast<double>(matrix_.cols());
  }
  // Number of weight groups: q for difference dictionaries, 1 otherwise.
  std::size_t group_count() const noexcept { return orders_.empty() ? 1 : orders_.size(); }

  // Block i, without the 1/sqrt(q) scale.
  Eigen::MatrixXd unscaled_block(std::size_t i) const;

  friend AnalysisDictionary build_mfod(std::span<const double> orders, Eigen::Index n);
  friend AnalysisDictionary build_random_tight_frame(Eigen::Index l, Eigen::Index n,
                                                     std::uint64_t seed);

  // Wrap an arbitrary l x n operator (e.g. loaded from CSV).
  static AnalysisDictionary from_matrix(Eigen::MatrixXd matrix);

 private:
  AnalysisDictionary() = default;

  Kind kind_ = Kind::kDifference;
  std::vector<double> orders_;
  double scale_ = 1.0;
  Eigen::MatrixXd matrix_;
};

AnalysisDictionary build_mfod(std::span<const double> orders, Eigen::Index n);

// l x n matrix with orthogonal columns, Ωᵀ Ω = (l / n) I. Deterministic per seed.
AnalysisDictionary build_random_tight_frame(Eigen::Index l, Eigen::Index n, std::uint64_t seed);

struct OrderDistanceReport {
  double max_distance = 0.0;
  bool within_recommended = false;
};

// Largest pairwise gap; the [1/4, 1/2] band is advisory only.
OrderDistanceReport order_distance(std::span<const double> orders);

Eigen::VectorXd apply_analysis(const AnalysisDictionary& dict, const Eigen::VectorXd& x);

}  // namespace cosparse
