#pragma once

#include <filesystem>
#include <iosfwd>

#include <Eigen/Dense>

namespace cosparse {

// Matrix CSV: first line "rows,cols", then one row-major line per matrix row.
// Values are printed with 17 significant digits so a round trip is exact.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);

Eigen::MatrixXd read_matrix_csv(std::istream& in);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

}  // namespace cosparse
