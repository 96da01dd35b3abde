#ifndef MTNEWS_TENSOR_H_
#define MTNEWS_TENSOR_H_

#include <iosfwd>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace mtnews {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Vector = Eigen::VectorXd;

// A trainable parameter with its gradient accumulator (same shape).
struct Tensor {
  std::string name;
  Matrix value;
  Matrix grad;

  Tensor() = default;
  Tensor(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

// Text parameter block: "<name> <rows> <cols>" then one line per row of
// shortest round-trip decimals separated by single spaces.
void write_matrix_block(std::ostream& out, std::string_view name, const Matrix& m);
// Reads a block written by write_matrix_block. Throws ParseError when the
// name differs from `expected_name` or the block is malformed.
Matrix read_matrix_block(std::istream& in, std::string_view expected_name);

}  // namespace mtnews

#endif  // MTNEWS_TENSOR_H_
