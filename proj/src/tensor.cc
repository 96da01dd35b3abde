#include "mtnews/tensor.h"

#include <istream>
#include <ostream>
#include <sstream>

#include "mtnews/common.h"

namespace mtnews {

void write_matrix_block(std::ostream& out, std::string_view name, const Matrix& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

Matrix read_matrix_block(std::istream& in, std::string_view expected_name) {
  std::string header;
  if (!std::getline(in, header)) {
    throw ParseError(0, "checkpoint truncated before block '" + std::string(expected_name) + "'");
  }
  const auto fields = split_whitespace(header);
  if (fields.size() != 3 || fields[0] != expected_name) {
    throw ParseError(0, "expected block '" + std::string(expected_name) + "', got '" + header + "'");
  }
  const auto rows = parse_int(fields[1]);
  const auto cols = parse_int(fields[2]);
  if (rows < 0 || cols < 0) throw ParseError(0, "negative block shape");
  Matrix m(rows, cols);
  std::string line;
  for (long long r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) {
      throw ParseError(0, "block '" + std::string(expected_name) + "' truncated");
    }
    const auto values = split_whitespace(line);
    if (static_cast<long long>(values.size()) != cols) {
      throw ParseError(0, "block '" + std::string(expected_name) + "' row has wrong width");
    }
    for (long long c = 0; c < cols; ++c) m(r, c) = parse_double(values[c]);
  }
  return m;
}

}  // namespace mtnews
