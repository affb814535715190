#include "cosparse/matrix_io.hpp"

#include <fstream>
#include <string>

#include "cosparse/errors.hpp"
#include "text_fields.hpp"

namespace cosparse {

using detail::parse_number;
using detail::split;

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  out << m.rows() << ',' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << detail::format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_matrix_csv(out, m);
}

Eigen::MatrixXd read_matrix_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing 'rows,cols' header", 1);
  const auto header = split(line);
  if (header.size() != 2) throw ParseError("header must be 'rows,cols'", 1);
  const auto rows = parse_number<long>(header[0], 1);
  const auto cols = parse_number<long>(header[1], 1);
  if (rows < 0 || cols < 0) throw ParseError("negative matrix shape", 1);

  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    const std::size_t row = static_cast<std::size_t>(i) + 2;
    if (!std::getline(in, line)) throw ParseError("unexpected end of file", row);
    const auto fields = split(line);
    if (static_cast<long>(fields.size()) != cols)
      throw ParseError("expected " + std::to_string(cols) + " fields, found " +
                           std::to_string(fields.size()),
                       row);
    for (long j = 0; j < cols; ++j) m(i, j) = parse_number<double>(fields[static_cast<std::size_t>(j)], row);
  }
  return m;
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_matrix_csv(in);
}

}  // namespace cosparse
