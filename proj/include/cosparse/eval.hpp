#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cosparse {

inline constexpr double kGoodPrdThreshold = 5.0;
inline constexpr double kDefaultCoSparsityTolerance = 1e-3;

// 100 · ‖x − x̂‖₂ / ‖x‖₂ (percent).
double prd(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat);

// Percentage of entries strictly below threshold.
double good_probability(std::span<const double> prds, double threshold = kGoodPrdThreshold);

// |{i : |z_i| <= tol · ‖z‖∞}|; tol = 0 counts exact zeros.
Eigen::Index co_sparsity(const Eigen::VectorXd& z, double tol);

struct Quartiles {
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
};

// Linear interpolation between order statistics (position p·(N−1)).
double percentile(std::span<const double> values, double p);
Quartiles quartiles(std::span<const double> values);

struct ReconstructionReport {
  std::vector<double> per_spike_prd;
  double mean_prd = 0.0;
  double good_probability = 0.0;
  Quartiles quartiles;
  double min_prd = 0.0;
  double max_prd = 0.0;
  Eigen::Index num_measurements = 0;
};

ReconstructionReport summarize_reconstruction(std::vector<double> prds, Eigen::Index num_measurements,
                                              double threshold = kGoodPrdThreshold);

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // n x k, columns ordered by descending eigenvalue
  Eigen::VectorXd eigenvalues; // all n covariance eigenvalues, descending
  Eigen::Index rank = 0;       // count of eigenvalues above the numerical floor
};

// Sample-covariance PCA. Each component's largest-magnitude loading is positive.
PcaModel fit_pca(std::span<const Eigen::VectorXd> frames, Eigen::Index num_components);

// Rows are frames, columns are component scores.
Eigen::MatrixXd project(const PcaModel& model, std::span<const Eigen::VectorXd> frames);

// fit_pca + project. Components beyond the data rank come out as zero columns
// (a warning goes to stderr).
Eigen::MatrixXd pca_features(std::span<const Eigen::VectorXd> frames, Eigen::Index num_components = 10);

// Full Haar decomposition per frame (n zero-padded to a power of two), keeping
// the num_features coefficients with the largest variance across frames.
Eigen::MatrixXd haar_features(std::span<const Eigen::VectorXd> frames, Eigen::Index num_features = 10);

// Best-of-restarts Lloyd k-means with k-means++ seeding. Labels are 0..k-1.
std::vector<int> kmeans_classify(const Eigen::MatrixXd& features, int k, int restarts,
                                 std::uint64_t seed, int max_iter = 300);

struct ClassificationReport {
  double accuracy = 0.0;
  // Rows are true classes, columns are predicted clusters after relabeling by
  // the accuracy-maximizing permutation. Class order follows sorted labels.
  std::vector<std::vector<int>> confusion;
  std::vector<int> class_labels;
  int features_used = 0;
};

// Accuracy maximized over cluster→class permutations (at most 6 labels per side).
ClassificationReport classification_accuracy(std::span<const int> predicted, std::span<const int> truth);

std::string to_json(const ReconstructionReport& report);
std::string to_json(const ClassificationReport& report);

}  // namespace cosparse
