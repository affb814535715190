#include "cosparse/sensing.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "cosparse/errors.hpp"
#include "text_fields.hpp"

namespace cosparse {

SensingMatrix bernoulli_matrix(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw InvalidShapeError("sensing matrix needs m >= 1 and n >= 1");
  if (m > n) std::cerr << "warning: m = " << m << " > n = " << n << ", not compressive\n";

  SensingMatrix phi;
  phi.seed = seed;
  phi.scale = 1.0 / std::sqrt(static_cast<double>(m));
  phi.entries.resize(m, n);

  // Signs come from raw engine bits; distribution objects are not portable.
  std::mt19937_64 rng(seed);
  std::uint64_t bits = 0;
  int remaining = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (remaining == 0) {
        bits = rng();
        remaining = 64;
      }
      phi.entries(i, j) = (bits & 1u) ? phi.scale : -phi.scale;
      bits >>= 1;
      --remaining;
    }
  }
  return phi;
}

MeasurementVector measure(const SensingMatrix& phi, const Eigen::VectorXd& x, double noise_sigma,
                          std::uint64_t noise_seed) {
  if (x.size() != phi.n()) {
    std::ostringstream msg;
    msg << "signal length " << x.size() << " does not match sensing matrix width " << phi.n();
    throw DimensionMismatchError(msg.str());
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw std::invalid_argument("noise sigma must be finite and nonnegative");

  MeasurementVector y;
  y.noise_sigma = noise_sigma;
  y.seed = noise_seed;
  y.values = phi.entries * x;
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> gauss(0.0, noise_sigma);
    for (Eigen::Index i = 0; i < y.values.size(); ++i) y.values(i) += gauss(rng);
  }
  return y;
}

void write_measurements_csv(const std::filesystem::path& path,
                            const std::vector<MeasurementVector>& measurements) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& y : measurements) {
    for (Eigen::Index i = 0; i < y.values.size(); ++i) {
      if (i) out << ',';
      out << detail::format_double(y.values(i));
    }
    out << '\n';
  }
}

std::vector<MeasurementVector> read_measurements_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<MeasurementVector> out;
  std::string line;
  std::size_t row = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line);
    if (out.empty()) width = fields.size();
    if (fields.size() != width)
      throw ParseError("expected " + std::to_string(width) + " values, found " +
                           std::to_string(fields.size()),
                       row);
    MeasurementVector y;
    y.values.resize(static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < width; ++i)
      y.values(static_cast<Eigen::Index>(i)) = detail::parse_number<double>(fields[i], row);
    out.push_back(std::move(y));
  }
  return out;
}

}  // namespace cosparse
