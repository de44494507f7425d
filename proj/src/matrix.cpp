#include "bliss/matrix.hpp"

#include <Eigen/Dense>

namespace bliss {

namespace {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;
using MutMap = Eigen::Map<EigenRowMajor>;

void check_inner(std::int64_t a, std::int64_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": inner dimensions " + std::to_string(a) + " vs " +
                                std::to_string(b));
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a.cols, b.rows, "matmul");
  Matrix c(a.rows, b.cols);
  MutMap(c.data.data(), c.rows, c.cols) =
      ConstMap(a.data.data(), a.rows, a.cols) * ConstMap(b.data.data(), b.rows, b.cols);
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  check_inner(a.rows, b.rows, "matmul_at_b");
  Matrix c(a.cols, b.cols);
  MutMap(c.data.data(), c.rows, c.cols) =
      ConstMap(a.data.data(), a.rows, a.cols).transpose() * ConstMap(b.data.data(), b.rows, b.cols);
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols, b.cols, "matmul_a_bt");
  Matrix c(a.rows, b.rows);
  MutMap(c.data.data(), c.rows, c.cols) =
      ConstMap(a.data.data(), a.rows, a.cols) * ConstMap(b.data.data(), b.rows, b.cols).transpose();
  return c;
}

bool all_finite(const Matrix& m) {
  for (double v : m.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace bliss
