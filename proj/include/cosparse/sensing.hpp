#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace cosparse {

// Seeded i.i.d. Bernoulli sensing matrix with entries ±1/sqrt(m).
struct SensingMatrix {
  Eigen::MatrixXd entries;
  std::uint64_t seed = 0;
  double scale = 0.0;

  Eigen::Index m() const noexcept { return entries.rows(); }
  Eigen::Index n() const noexcept { return entries.cols(); }
  double compression_ratio() const noexcept {
    return static_cast<double>(m()) / static_cast<double>(n());
  }
};

struct MeasurementVector {
  Eigen::VectorXd values;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

// m > n is accepted (warns on stderr); m < 1 or n < 1 throws InvalidShapeError.
SensingMatrix bernoulli_matrix(Eigen::Index m, Eigen::Index n, std::uint64_t seed);

// y = Φx + e, e ~ N(0, noise_sigma²) drawn from noise_seed. noise_sigma = 0 is exact.
MeasurementVector measure(const SensingMatrix& phi, const Eigen::VectorXd& x, double noise_sigma,
                          std::uint64_t noise_seed);

// One row per spike, m comma-separated values.
void write_measurements_csv(const std::filesystem::path& path,
                            const std::vector<MeasurementVector>& measurements);
std::vector<MeasurementVector> read_measurements_csv(const std::filesystem::path& path);

}  // namespace cosparse
